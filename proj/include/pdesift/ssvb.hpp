#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdesift/basis.hpp"
#include "pdesift/dictionary.hpp"
#include "pdesift/error.hpp"
#include "pdesift/stridge.hpp"

namespace pdesift {

enum class InitMethod { Ridge, Stridge };

inline const char* init_method_name(InitMethod m) noexcept { return m == InitMethod::Ridge ? "ridge" : "stridge"; }

inline InitMethod parse_init_method(const std::string& s)
{
    if (s == "ridge") return InitMethod::Ridge;
    if (s == "stridge") return InitMethod::Stridge;
    fail(Errc::Config, "unknown vb.init '" + s + "'");
}

/// Prior and stopping settings. All quantities refer to the standardized
/// problem (unit-RMS columns and target).
struct SsvbConfig {
    double v_s = 10.0;     // slab variance scale
    double a_sigma = 1e-4; // inverse-gamma shape
    double b_sigma = 1e-4; // inverse-gamma rate
    double p0 = 0.1;       // prior inclusion probability
    double rho = 1e-6;     // stop once the ELBO gain drops below this
    int max_sweeps = 500;
    InitMethod init = InitMethod::Stridge;
    double init_retained = 0.95; // stridge init: probability for retained columns
    double init_dropped = 1e-3;  // stridge init: probability for dropped columns

    void validate() const
    {
        require(v_s > 0 && a_sigma > 0 && b_sigma > 0 && rho > 0, Errc::InvalidArgument,
                "vb hyperparameters must be positive");
        require(p0 > 0 && p0 < 1, Errc::InvalidArgument, "p0 must lie in (0, 1)");
        require(max_sweeps >= 1, Errc::InvalidArgument, "max_sweeps must be >= 1");
        require(init_dropped > 0 && init_dropped < init_retained && init_retained < 1, Errc::InvalidArgument,
                "initial probabilities must satisfy 0 < dropped < retained < 1");
    }
};

/// Mean-field posterior: q(coefficients) = N(mu, Sigma), q(noise variance) =
/// IG(a_q, b_q), q(inclusion_i) = Bernoulli(w_i).
struct VbState {
    Eigen::VectorXd mu;
    Eigen::MatrixXd Sigma;
    double log_det_sigma = 0.0;
    double a_q = 0.0;
    double b_q = 0.0;
    double tau = 1.0; // a_q / b_q, the expected noise precision
    Eigen::VectorXd w;
    std::vector<double> elbo_trace;
};

/// Data summaries reused by every sweep.
struct SufficientStats {
    Eigen::MatrixXd D;
    Eigen::VectorXd y;
    Eigen::MatrixXd G;   // D^T D
    Eigen::VectorXd Dty; // D^T y
    double yty = 0.0;

    SufficientStats() = default;
    SufficientStats(Eigen::MatrixXd d, Eigen::VectorXd target) : D(std::move(d)), y(std::move(target))
    {
        require(D.rows() == y.size() && D.rows() > 0 && D.cols() > 0, Errc::InvalidArgument,
                "empty or mismatched regression problem");
        G = D.transpose() * D;
        Dty = D.transpose() * y;
        yty = y.squaredNorm();
    }

    Eigen::Index n() const noexcept { return D.rows(); }
    Eigen::Index k() const noexcept { return D.cols(); }
};

namespace vb {

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr double eta_clamp = 30.0;

/// psi(x) for x > 0: recurrence up to x >= 6, then the asymptotic series.
inline double digamma(double x)
{
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double r = 1.0 / (x * x);
    return acc + std::log(x) - 0.5 / x - r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r / 132))));
}

inline Eigen::MatrixXd omega(const Eigen::VectorXd& w)
{
    Eigen::MatrixXd o = w * w.transpose();
    o.diagonal() = w; // w_i(1 - w_i) + w_i^2
    return o;
}

/// E_q ||y - D (z . phi)||^2 + E_q ||phi||^2 / v_s, summed from nonnegative
/// pieces so it stays accurate when the fit is nearly exact.
inline double expected_sq_error(const SufficientStats& st, const VbState& s, double v_s)
{
    const Eigen::VectorXd wm = s.w.cwiseProduct(s.mu);
    const double resid = (st.y - st.D * wm).squaredNorm();
    double spread = 0.0;
    for (Eigen::Index i = 0; i < st.k(); ++i) spread += st.G(i, i) * s.w(i) * (1.0 - s.w(i)) * s.mu(i) * s.mu(i);
    const double cov = (st.G.cwiseProduct(omega(s.w)).cwiseProduct(s.Sigma)).sum();
    return resid + spread + std::max(cov, 0.0) + (s.mu.squaredNorm() + s.Sigma.trace()) / v_s;
}

inline double bernoulli_terms(const Eigen::VectorXd& w, double p0)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double wi = w(i);
        acc += wi * std::log(p0) + (1.0 - wi) * std::log1p(-p0);
        acc -= wi * std::log(wi) + (1.0 - wi) * std::log1p(-wi);
    }
    return acc;
}

/// A = G . Omega + I / v_s, the scaled posterior precision.
inline Eigen::MatrixXd precision(const SufficientStats& st, const Eigen::VectorXd& w, double v_s)
{
    Eigen::MatrixXd A = st.G.cwiseProduct(omega(w));
    A.diagonal().array() += 1.0 / v_s;
    return A;
}

} // namespace vb

/// Coefficient block: Sigma = (tau A)^-1, mu = A^-1 (w . D^T y).
inline void update_coefficients(const SufficientStats& st, VbState& s, const SsvbConfig& cfg)
{
    const Eigen::MatrixXd A = vb::precision(st, s.w, cfg.v_s);
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) fail(Errc::NumericalBreakdown, "posterior precision is not positive definite");
    const Eigen::Index k = st.k();
    s.mu = llt.solve(s.w.cwiseProduct(st.Dty));
    Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(k, k));
    Ainv = 0.5 * (Ainv + Ainv.transpose());
    s.Sigma = Ainv / s.tau;
    const double log_det_a = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    s.log_det_sigma = -static_cast<double>(k) * std::log(s.tau) - log_det_a;
    if (!s.mu.allFinite() || !s.Sigma.allFinite() || !std::isfinite(s.log_det_sigma))
        fail(Errc::NumericalBreakdown, "non-finite coefficient posterior");
}

/// Noise block: a_q = a + N/2 + K/2, b_q = b + E[squared error]/2, tau = a_q/b_q.
inline void update_noise(const SufficientStats& st, VbState& s, const SsvbConfig& cfg)
{
    s.a_q = cfg.a_sigma + 0.5 * static_cast<double>(st.n()) + 0.5 * static_cast<double>(st.k());
    s.b_q = cfg.b_sigma + 0.5 * vb::expected_sq_error(st, s, cfg.v_s);
    s.tau = s.a_q / s.b_q;
}

/// Inclusion block, one coordinate at a time using the latest w_j.
inline void update_inclusion(const SufficientStats& st, VbState& s, const SsvbConfig& cfg)
{
    const double prior = vb::logit(cfg.p0);
    // visit the most probable terms first so they absorb the signal before
    // weaker, correlated candidates are weighed against the residual; ties go
    // to the column most correlated with the target
    std::vector<Eigen::Index> order(static_cast<std::size_t>(st.k()));
    for (Eigen::Index i = 0; i < st.k(); ++i) order[static_cast<std::size_t>(i)] = i;
    const auto corr = [&](Eigen::Index i) { return std::abs(st.Dty(i)) / std::sqrt(std::max(st.G(i, i), 1e-300)); };
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (s.w(a) != s.w(b)) return s.w(a) > s.w(b);
        return corr(a) > corr(b);
    });
    for (Eigen::Index i : order) {
        double cross = 0.0;
        for (Eigen::Index j = 0; j < st.k(); ++j) {
            if (j == i) continue;
            cross += st.G(i, j) * s.w(j) * (s.mu(j) * s.mu(i) + s.Sigma(j, i));
        }
        double eta = prior - 0.5 * s.tau * (s.mu(i) * s.mu(i) + s.Sigma(i, i)) * st.G(i, i)
                     + s.tau * (st.Dty(i) * s.mu(i) - cross);
        eta = std::clamp(eta, -vb::eta_clamp, vb::eta_clamp);
        s.w(i) = vb::expit(eta);
    }
}

/// Evidence lower bound of the full mean-field objective at any valid state.
inline double compute_elbo(const SufficientStats& st, const VbState& s, const SsvbConfig& cfg)
{
    const double n = static_cast<double>(st.n()), k = static_cast<double>(st.k());
    const double ln2pi = std::log(2.0 * std::numbers::pi);
    const double e_log_var = std::log(s.b_q) - vb::digamma(s.a_q);
    const double q = vb::expected_sq_error(st, s, cfg.v_s);
    double elbo = 0.0;
    // likelihood and slab prior
    elbo += -0.5 * n * ln2pi - 0.5 * k * std::log(2.0 * std::numbers::pi * cfg.v_s) - 0.5 * (n + k) * e_log_var;
    // inverse-gamma prior
    elbo += cfg.a_sigma * std::log(cfg.b_sigma) - std::lgamma(cfg.a_sigma) - (cfg.a_sigma + 1.0) * e_log_var;
    // Gaussian entropy
    elbo += 0.5 * k * (1.0 + ln2pi) + 0.5 * s.log_det_sigma;
    // inverse-gamma entropy
    elbo += -s.a_q * std::log(s.b_q) + std::lgamma(s.a_q) + (s.a_q + 1.0) * e_log_var;
    // every term linear in the expected precision, grouped to avoid cancellation
    elbo += s.tau * (s.b_q - cfg.b_sigma - 0.5 * q);
    elbo += vb::bernoulli_terms(s.w, cfg.p0);
    return elbo;
}

/// Starting point from initial inclusion probabilities: mu from the
/// coefficient update, tau from the resulting residual.
inline VbState initial_state(const SufficientStats& st, const Eigen::VectorXd& w_init, const SsvbConfig& cfg)
{
    cfg.validate();
    require(w_init.size() == st.k(), Errc::InvalidArgument, "w_init length does not match dictionary");
    VbState s;
    s.w = w_init;
    for (Eigen::Index i = 0; i < s.w.size(); ++i)
        require(s.w(i) > 0.0 && s.w(i) < 1.0, Errc::InvalidArgument, "initial inclusion probabilities must lie in (0, 1)");
    s.tau = 1.0;
    update_coefficients(st, s, cfg);
    const double n = static_cast<double>(st.n());
    const double rss = (st.y - st.D * s.w.cwiseProduct(s.mu)).squaredNorm();
    s.tau = n / std::max(rss, 1e-10 * n);
    s.Sigma *= 1.0 / s.tau;
    s.log_det_sigma -= static_cast<double>(st.k()) * std::log(s.tau);
    s.a_q = cfg.a_sigma + 0.5 * n + 0.5 * static_cast<double>(st.k());
    s.b_q = s.a_q / s.tau;
    return s;
}

/// One coordinate-ascent cycle: coefficients, noise, then inclusion.
inline void sweep(const SufficientStats& st, VbState& s, const SsvbConfig& cfg)
{
    update_coefficients(st, s, cfg);
    update_noise(st, s, cfg);
    update_inclusion(st, s, cfg);
}

struct DiscoveredModel {
    std::vector<BasisTerm> terms;
    Eigen::VectorXd pip;
    std::vector<std::size_t> support;
    Eigen::VectorXd mu_hat;    // original units, zero off support
    Eigen::MatrixXd Sigma_hat; // original units, zero outside the support block
    std::vector<double> elbo_trace;
    int sweeps = 0;
    bool converged = false;
    double noise_precision = 0.0; // tau in standardized units

    std::vector<std::string> support_labels() const
    {
        std::vector<std::string> out;
        for (auto i : support) out.push_back(terms[i].label());
        return out;
    }

    double posterior_std(std::size_t i) const { return std::sqrt(std::max(Sigma_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), 0.0)); }
};

struct VbFit {
    VbState state;
    DiscoveredModel model;
};

inline VbFit vb_fit(const SufficientStats& st, const Eigen::VectorXd& w_init, const SsvbConfig& cfg)
{
    VbFit out;
    VbState& s = out.state;
    s = initial_state(st, w_init, cfg);
    s.elbo_trace.push_back(compute_elbo(st, s, cfg));
    int sweeps = 0;
    bool converged = false;
    while (sweeps < cfg.max_sweeps) {
        sweep(st, s, cfg);
        ++sweeps;
        const double e = compute_elbo(st, s, cfg);
        if (!std::isfinite(e)) fail(Errc::NumericalBreakdown, "non-finite ELBO");
        const double gain = e - s.elbo_trace.back();
        s.elbo_trace.push_back(e);
        if (gain < cfg.rho) {
            converged = true;
            break;
        }
    }
    DiscoveredModel& m = out.model;
    m.pip = s.w;
    m.elbo_trace = s.elbo_trace;
    m.sweeps = sweeps;
    m.converged = converged;
    m.noise_precision = s.tau;
    for (Eigen::Index i = 0; i < s.w.size(); ++i)
        if (s.w(i) > 0.5) m.support.push_back(static_cast<std::size_t>(i));
    m.mu_hat = Eigen::VectorXd::Zero(st.k());
    m.Sigma_hat = Eigen::MatrixXd::Zero(st.k(), st.k());
    for (auto i : m.support) {
        const auto a = static_cast<Eigen::Index>(i);
        m.mu_hat(a) = s.mu(a);
        for (auto j : m.support) m.Sigma_hat(a, static_cast<Eigen::Index>(j)) = s.Sigma(a, static_cast<Eigen::Index>(j));
    }
    return out;
}

/// Initial inclusion probabilities on standardized data.
/// Ridge: |beta_i| / max |beta| clamped to [0.05, 0.95]. Stridge: `hi` on the
/// retained columns, `lo` elsewhere.
inline Eigen::VectorXd init_inclusion_probs(const Standardized& s, InitMethod method, const StridgeConfig& sc = {},
                                            double hi = 0.95, double lo = 1e-3)
{
    require(lo > 0.0 && lo < hi && hi < 1.0, Errc::InvalidArgument, "initial probabilities must satisfy 0 < lo < hi < 1");
    const Eigen::Index k = s.D.cols();
    Eigen::VectorXd w(k);
    if (method == InitMethod::Ridge) {
        require(sc.lambda > 0.0, Errc::SingularSystem, "ridge initialization needs lambda > 0");
        std::vector<Eigen::Index> all(static_cast<std::size_t>(k));
        for (Eigen::Index i = 0; i < k; ++i) all[static_cast<std::size_t>(i)] = i;
        const Eigen::VectorXd beta = ridge_solve(s.D, s.y, all, sc.lambda);
        const double top = beta.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < k; ++i)
            w(i) = top > 0.0 ? std::clamp(std::abs(beta(i)) / top, 0.05, 0.95) : 0.05;
        return w;
    }
    const auto r = stridge(s, sc);
    w.setConstant(lo);
    for (auto i : r.support) w(static_cast<Eigen::Index>(i)) = hi;
    return w;
}

inline Eigen::VectorXd init_inclusion_probs(const RegressionProblem& p, InitMethod method, const StridgeConfig& sc = {},
                                            double hi = 0.95, double lo = 1e-3)
{
    return init_inclusion_probs(standardize(p), method, sc, hi, lo);
}

/// Full pipeline on a regression problem: standardize, initialize, fit, and
/// report coefficients in the problem's original units.
inline VbFit vb_fit(const RegressionProblem& problem, const SsvbConfig& cfg, const StridgeConfig& sc = {})
{
    cfg.validate();
    const Standardized s = standardize(problem);
    const Eigen::VectorXd w0 = init_inclusion_probs(s, cfg.init, sc, cfg.init_retained, cfg.init_dropped);
    const SufficientStats st(s.D, s.y);
    VbFit fit = vb_fit(st, w0, cfg);
    fit.model.terms = problem.dictionary.terms;
    const Eigen::VectorXd scale = (s.y_scale / s.col_scale.array()).matrix();
    fit.model.mu_hat = fit.model.mu_hat.cwiseProduct(scale);
    fit.model.Sigma_hat = scale.asDiagonal() * fit.model.Sigma_hat * scale.asDiagonal();
    return fit;
}

} // namespace pdesift
