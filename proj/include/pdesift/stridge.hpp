#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "pdesift/dictionary.hpp"
#include "pdesift/error.hpp"

namespace pdesift {

/// Columns scaled to unit RMS (||col||^2 = N) and the target to unit RMS.
/// All-zero columns keep scale 1.
struct Standardized {
    Eigen::MatrixXd D;
    Eigen::VectorXd y;
    Eigen::VectorXd col_scale; // RMS of each original column
    double y_scale = 1.0;

    /// Coefficient in original units from one in standardized units.
    double unscale(Eigen::Index i, double phi) const { return phi * y_scale / col_scale(i); }
    Eigen::VectorXd unscale(const Eigen::VectorXd& phi) const
    {
        return (phi.array() * y_scale / col_scale.array()).matrix();
    }
};

inline Standardized standardize(const Eigen::MatrixXd& D, const Eigen::VectorXd& y)
{
    require(D.rows() == y.size() && D.rows() > 0, Errc::InvalidArgument, "empty or mismatched regression problem");
    const double n = static_cast<double>(D.rows());
    Standardized s;
    s.col_scale.resize(D.cols());
    for (Eigen::Index c = 0; c < D.cols(); ++c) {
        const double rms = D.col(c).norm() / std::sqrt(n);
        require(std::isfinite(rms), Errc::InvalidArgument, "non-finite dictionary column");
        s.col_scale(c) = rms > 0.0 ? rms : 1.0;
    }
    const double yrms = y.norm() / std::sqrt(n);
    require(std::isfinite(yrms), Errc::InvalidArgument, "non-finite target");
    s.y_scale = yrms > 0.0 ? yrms : 1.0;
    s.D = D * s.col_scale.cwiseInverse().asDiagonal();
    s.y = y / s.y_scale;
    return s;
}

inline Standardized standardize(const RegressionProblem& p)
{
    p.validate();
    return standardize(p.dictionary.matrix, p.y);
}

/// Solves (D_a^T D_a / N + lambda I) beta = D_a^T y / N on the active columns.
/// lambda = 0 is plain least squares and must be full rank.
inline Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                                   const std::vector<Eigen::Index>& active, double lambda)
{
    require(lambda >= 0.0, Errc::InvalidArgument, "ridge lambda must be nonnegative");
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(D.cols());
    if (k == 0) return beta;
    Eigen::MatrixXd Da(D.rows(), k);
    for (Eigen::Index j = 0; j < k; ++j) Da.col(j) = D.col(active[static_cast<std::size_t>(j)]);
    Eigen::VectorXd ba;
    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Da);
        if (qr.rank() < k) fail(Errc::SingularSystem, "least squares on rank-deficient columns (lambda = 0)");
        ba = qr.solve(y);
    } else {
        const double n = static_cast<double>(D.rows());
        Eigen::MatrixXd gram = Da.transpose() * Da / n;
        gram.diagonal().array() += lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success) fail(Errc::SingularSystem, "ridge system factorization failed");
        ba = ldlt.solve(Da.transpose() * y / n);
    }
    for (Eigen::Index j = 0; j < k; ++j) beta(active[static_cast<std::size_t>(j)]) = ba(j);
    return beta;
}

struct StridgeConfig {
    double lambda = 1e-5;
    double tol = 0.1;
    int max_iters = 25;
    bool tol_search = true;
    std::vector<double> tol_grid{1e-3, 1e-2, 1e-1, 1.0};
    double l0_penalty = 1e-3; // per retained term, added to validation relative MSE
    std::size_t validation_stride = 5; // every n-th row is held out during the search

    void validate() const
    {
        require(lambda >= 0.0, Errc::InvalidArgument, "stridge lambda must be >= 0");
        require(tol >= 0.0, Errc::InvalidArgument, "stridge tol must be >= 0");
        require(max_iters >= 1, Errc::InvalidArgument, "stridge max_iters must be >= 1");
        require(!tol_search || !tol_grid.empty(), Errc::InvalidArgument, "empty stridge tol grid");
        require(validation_stride >= 2, Errc::InvalidArgument, "validation stride must be >= 2");
        require(l0_penalty >= 0.0, Errc::InvalidArgument, "l0 penalty must be >= 0");
    }
};

struct StridgeResult {
    Eigen::VectorXd coefficients;  // original units, zero off support
    Eigen::VectorXd standardized;  // same, in standardized units
    std::vector<std::size_t> support;
    double tol = 0.0;
    double residual = 0.0; // ||y - D beta||^2 in standardized units
};

/// Ridge / threshold iteration in standardized units, starting from all columns.
inline Eigen::VectorXd stridge_fixed_tol(const Eigen::MatrixXd& D, const Eigen::VectorXd& y, double lambda,
                                         double tol, int max_iters)
{
    std::vector<Eigen::Index> active(static_cast<std::size_t>(D.cols()));
    for (Eigen::Index c = 0; c < D.cols(); ++c) active[static_cast<std::size_t>(c)] = c;
    Eigen::VectorXd beta = ridge_solve(D, y, active, lambda);
    for (int it = 0; it < max_iters; ++it) {
        std::vector<Eigen::Index> keep;
        for (Eigen::Index c : active)
            if (std::abs(beta(c)) >= tol) keep.push_back(c);
        if (keep == active) break;
        active = std::move(keep);
        beta = ridge_solve(D, y, active, lambda);
    }
    return beta;
}

namespace detail {

inline std::vector<std::size_t> nonzero_indices(const Eigen::VectorXd& v)
{
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) != 0.0) out.push_back(static_cast<std::size_t>(i));
    return out;
}

} // namespace detail

inline StridgeResult stridge(const Standardized& s, const StridgeConfig& cfg)
{
    cfg.validate();
    double tol = cfg.tol;
    if (cfg.tol_search) {
        const Eigen::Index n = s.D.rows();
        std::vector<Eigen::Index> train, val;
        for (Eigen::Index r = 0; r < n; ++r)
            (static_cast<std::size_t>(r) % cfg.validation_stride == cfg.validation_stride - 1 ? val : train).push_back(r);
        require(!train.empty() && !val.empty(), Errc::InvalidArgument, "too few rows for the stridge tolerance search");
        const Eigen::MatrixXd Dt = s.D(train, Eigen::all), Dv = s.D(val, Eigen::all);
        const Eigen::VectorXd yt = s.y(train), yv = s.y(val);
        const double yv2 = std::max(yv.squaredNorm(), 1e-300);
        double best = std::numeric_limits<double>::infinity();
        for (double t : cfg.tol_grid) {
            const Eigen::VectorXd b = stridge_fixed_tol(Dt, yt, cfg.lambda, t, cfg.max_iters);
            const double nnz = static_cast<double>(detail::nonzero_indices(b).size());
            const double score = (yv - Dv * b).squaredNorm() / yv2 + cfg.l0_penalty * nnz;
            if (score < best) {
                best = score;
                tol = t;
            }
        }
    }
    StridgeResult r;
    r.tol = tol;
    r.standardized = stridge_fixed_tol(s.D, s.y, cfg.lambda, tol, cfg.max_iters);
    r.coefficients = s.unscale(r.standardized);
    r.support = detail::nonzero_indices(r.standardized);
    r.residual = (s.y - s.D * r.standardized).squaredNorm();
    return r;
}

inline StridgeResult stridge(const RegressionProblem& problem, const StridgeConfig& cfg)
{
    return stridge(standardize(problem), cfg);
}

/// |support \ truth| / K.
inline double false_positive_rate(const std::vector<std::size_t>& support, const std::vector<std::size_t>& truth,
                                  std::size_t K)
{
    require(K > 0, Errc::InvalidArgument, "K must be positive");
    const std::set<std::size_t> t(truth.begin(), truth.end());
    std::size_t fp = 0;
    for (auto i : std::set<std::size_t>(support.begin(), support.end())) {
        require(i < K, Errc::InvalidArgument, "support index out of range");
        if (!t.count(i)) ++fp;
    }
    return static_cast<double>(fp) / static_cast<double>(K);
}

/// |truth \ support| / |truth|; 0 when the truth is empty.
inline double false_negative_rate(const std::vector<std::size_t>& support, const std::vector<std::size_t>& truth)
{
    const std::set<std::size_t> s(support.begin(), support.end()), t(truth.begin(), truth.end());
    if (t.empty()) return 0.0;
    std::size_t fn = 0;
    for (auto i : t)
        if (!s.count(i)) ++fn;
    return static_cast<double>(fn) / static_cast<double>(t.size());
}

} // namespace pdesift
