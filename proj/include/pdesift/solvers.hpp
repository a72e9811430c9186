#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "pdesift/grid.hpp"
#include "pdesift/pde_model.hpp"
#include "pdesift/stencil.hpp"

namespace pdesift {

enum class Boundary { DirichletZero, Periodic };

namespace detail {

inline bool blown_up(std::span<const double> u, double bound)
{
    for (double v : u)
        if (!std::isfinite(v) || std::abs(v) > bound) return true;
    return false;
}

inline double max_abs(std::span<const double> u)
{
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
}

/// Largest |symbol| of the central stencil for a d-th derivative, per unit h^-d.
inline double stencil_symbol_bound(int order)
{
    const auto op = AxisOperator::central_fd(static_cast<std::size_t>(order) + 4, 1.0, order);
    const auto w = op.row(op.half_width()).weights;
    const auto r = static_cast<double>(op.half_width());
    double best = 0.0;
    for (int s = 0; s <= 512; ++s) {
        const double th = std::numbers::pi * s / 512.0;
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k)
            acc += w[k] * std::polar(1.0, (static_cast<double>(k) - r) * th);
        best = std::max(best, std::abs(acc));
    }
    return best;
}

} // namespace detail

/// Evaluates the right-hand side of a PdeModel on one snapshot with 2nd-order
/// finite differences; boundary nodes are held at zero.
class FdRhs {
public:
    FdRhs(const GridSpec& grid, const PdeModel& model) : grid_(grid), model_(model)
    {
        for (const auto& t : model.terms) {
            if (t.term.deriv.x_order > 0) ensure(xops_, t.term.deriv.x_order, grid.nx, grid.dx);
            if (t.term.deriv.y_order > 0) {
                require(grid.is_2d(), Errc::InvalidArgument, "y derivative in a 1D model");
                ensure(yops_, t.term.deriv.y_order, grid.ny_or_one(), *grid.dy);
            }
        }
    }

    void operator()(std::span<const double> u, std::span<double> out)
    {
        const std::size_t nx = grid_.nx, ny = grid_.ny_or_one();
        std::fill(out.begin(), out.end(), 0.0);
        tmp_.resize(u.size());
        for (const auto& mt : model_.terms) {
            const auto& d = mt.term.deriv;
            std::span<const double> du = u;
            if (!d.none()) {
                deriv_.assign(u.begin(), u.end());
                if (d.x_order > 0) {
                    const auto& op = xops_[d.x_order];
                    for (std::size_t i = 0; i < nx; ++i)
                        for (std::size_t j = 0; j < ny; ++j) tmp_[i * ny + j] = op.apply(deriv_.data() + j, ny, i);
                    deriv_.swap(tmp_);
                }
                if (d.y_order > 0) {
                    const auto& op = yops_[d.y_order];
                    for (std::size_t i = 0; i < nx; ++i)
                        for (std::size_t j = 0; j < ny; ++j) tmp_[i * ny + j] = op.apply(deriv_.data() + i * ny, 1, j);
                    deriv_.swap(tmp_);
                }
                du = deriv_;
            }
            const int q = mt.term.poly_power;
            if (d.none()) {
                for (std::size_t k = 0; k < u.size(); ++k) out[k] += mt.coefficient * std::pow(u[k], q);
            } else if (q == 0) {
                for (std::size_t k = 0; k < u.size(); ++k) out[k] += mt.coefficient * du[k];
            } else {
                for (std::size_t k = 0; k < u.size(); ++k) out[k] += mt.coefficient * std::pow(u[k], q) * du[k];
            }
        }
        // Dirichlet nodes
        for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) {
                const bool edge = i == 0 || i == nx - 1 || (grid_.is_2d() && (j == 0 || j == ny - 1));
                if (edge) out[i * ny + j] = 0.0;
            }
    }

    /// Upper bound on the spectral radius of the linearised operator.
    double spectral_radius(double u_scale) const
    {
        double lam = 0.0;
        for (const auto& mt : model_.terms) {
            double f = std::abs(mt.coefficient) * std::pow(std::max(u_scale, 1.0), mt.term.poly_power);
            if (mt.term.deriv.x_order > 0)
                f *= detail::stencil_symbol_bound(mt.term.deriv.x_order) * std::pow(grid_.dx, -mt.term.deriv.x_order);
            if (mt.term.deriv.y_order > 0)
                f *= detail::stencil_symbol_bound(mt.term.deriv.y_order) * std::pow(*grid_.dy, -mt.term.deriv.y_order);
            lam += f;
        }
        return lam;
    }

private:
    static void ensure(std::vector<AxisOperator>& ops, int order, std::size_t n, double h)
    {
        while (ops.size() <= static_cast<std::size_t>(order)) {
            const int o = static_cast<int>(ops.size());
            ops.push_back(AxisOperator::central_fd(n, h, std::max(o, 1)));
        }
    }

    GridSpec grid_;
    PdeModel model_;
    std::vector<AxisOperator> xops_, yops_;
    std::vector<double> tmp_, deriv_;
};

struct Integration {
    int substeps = 0; // 0 = choose automatically
};

/// Classical RK4 method of lines for first-order-in-time models on a
/// Dirichlet-zero grid.
inline Field integrate_rk4_dirichlet(const GridSpec& grid, const PdeModel& model,
                                     std::span<const double> u0, Integration integ)
{
    require(model.time_order == 1, Errc::InvalidArgument, "RK4 integrator needs a first-order model");
    FdRhs rhs(grid, model);
    const double u_scale = detail::max_abs(u0);
    const double lam = rhs.spectral_radius(u_scale);
    constexpr double kRk4Limit = 2.7;
    int sub = integ.substeps;
    if (sub <= 0) sub = std::max(1, static_cast<int>(std::ceil(lam * grid.dt / (0.9 * kRk4Limit))));
    const double h = grid.dt / sub;
    if (lam * h > kRk4Limit)
        fail(Errc::StabilityViolation, "explicit RK4 step " + std::to_string(h) +
                                           " exceeds stability limit " + std::to_string(kRk4Limit / lam));

    Field out(grid);
    const std::size_t n = grid.points_per_snapshot();
    std::vector<double> u(u0.begin(), u0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::copy(u.begin(), u.end(), out.snapshot(0).begin());
    const double bound = 1e6 * std::max(u_scale, 1.0);
    for (std::size_t s = 1; s < grid.nt; ++s) {
        for (int step = 0; step < sub; ++step) {
            rhs(u, k1);
            for (std::size_t k = 0; k < n; ++k) tmp[k] = u[k] + 0.5 * h * k1[k];
            rhs(tmp, k2);
            for (std::size_t k = 0; k < n; ++k) tmp[k] = u[k] + 0.5 * h * k2[k];
            rhs(tmp, k3);
            for (std::size_t k = 0; k < n; ++k) tmp[k] = u[k] + h * k3[k];
            rhs(tmp, k4);
            for (std::size_t k = 0; k < n; ++k) u[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        if (detail::blown_up(u, bound)) fail(Errc::StabilityViolation, "solution blew up");
        std::copy(u.begin(), u.end(), out.snapshot(s).begin());
    }
    return out;
}

/// Explicit leapfrog for second-order-in-time models, zero initial velocity.
inline Field integrate_leapfrog_dirichlet(const GridSpec& grid, const PdeModel& model,
                                          std::span<const double> u0, Integration integ)
{
    require(model.time_order == 2, Errc::InvalidArgument, "leapfrog integrator needs a second-order model");
    FdRhs rhs(grid, model);
    const double u_scale = detail::max_abs(u0);
    const double lam = rhs.spectral_radius(u_scale);
    int sub = integ.substeps;
    if (sub <= 0) sub = std::max(1, static_cast<int>(std::ceil(grid.dt * std::sqrt(lam) / (0.9 * 2.0))));
    const double h = grid.dt / sub;
    if (h * h * lam > 4.0)
        fail(Errc::StabilityViolation, "leapfrog step " + std::to_string(h) + " violates the CFL limit " +
                                           std::to_string(2.0 / std::sqrt(lam)));

    Field out(grid);
    const std::size_t n = grid.points_per_snapshot();
    std::vector<double> prev(u0.begin(), u0.end()), cur(n), next(n), acc(n);
    std::copy(prev.begin(), prev.end(), out.snapshot(0).begin());
    rhs(prev, acc);
    for (std::size_t k = 0; k < n; ++k) cur[k] = prev[k] + 0.5 * h * h * acc[k];
    const double bound = 1e6 * std::max(u_scale, 1.0);
    int step = 1;
    for (std::size_t s = 1; s < grid.nt; ++s) {
        for (; step < static_cast<int>(s) * sub; ++step) {
            rhs(cur, acc);
            for (std::size_t k = 0; k < n; ++k) next[k] = 2.0 * cur[k] - prev[k] + h * h * acc[k];
            prev.swap(cur);
            cur.swap(next);
        }
        if (detail::blown_up(cur, bound)) fail(Errc::StabilityViolation, "solution blew up");
        std::copy(cur.begin(), cur.end(), out.snapshot(s).begin());
    }
    return out;
}

/// Fourier pseudo-spectral ETDRK4 (Cox-Matthews, contour-integral
/// coefficients after Kassam-Trefethen) for 1D periodic first-order models.
/// Terms that are linear with constant coefficients (u^0 * d^k u with k >= 1
/// and the bare u term) form the stiff diagonal part; everything else is
/// treated explicitly.
class Etdrk4 {
public:
    Etdrk4(const GridSpec& grid, const PdeModel& model, double h) : n_(grid.nx), h_(h)
    {
        require(!grid.is_2d(), Errc::UnsupportedCombination, "spectral solver is 1D only");
        require(model.time_order == 1, Errc::UnsupportedCombination, "spectral solver needs a first-order model");
        require(n_ % 2 == 0, Errc::InvalidArgument, "spectral solver needs an even point count");
        const double L = grid.dx * static_cast<double>(n_);
        k_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double m = j <= n_ / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n_);
            k_[j] = 2.0 * std::numbers::pi / L * m;
        }

        std::vector<std::complex<double>> lin(n_, 0.0);
        for (const auto& mt : model.terms) {
            const auto& t = mt.term;
            const bool linear = (t.poly_power == 0 && t.deriv.x_order >= 1) || (t.poly_power == 1 && t.deriv.none());
            if (linear) {
                for (std::size_t j = 0; j < n_; ++j) lin[j] += mt.coefficient * ik_pow(j, t.deriv.x_order);
            } else {
                nonlinear_.push_back(mt);
                max_order_ = std::max(max_order_, t.deriv.x_order);
            }
        }

        constexpr int M = 32;
        E_.resize(n_); E2_.resize(n_); Q_.resize(n_); f1_.resize(n_); f2_.resize(n_); f3_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const std::complex<double> hl = h * lin[j];
            E_[j] = std::exp(hl);
            E2_[j] = std::exp(hl / 2.0);
            std::complex<double> q = 0, a = 0, b = 0, c = 0;
            for (int m = 1; m <= M; ++m) {
                const std::complex<double> r = std::polar(1.0, std::numbers::pi * (m - 0.5) / M);
                const std::complex<double> z = hl + r;
                const std::complex<double> ez = std::exp(z);
                const std::complex<double> z3 = z * z * z;
                q += (std::exp(z / 2.0) - 1.0) / z;
                a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                b += (2.0 + z + ez * (-2.0 + z)) / z3;
                c += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            Q_[j] = h * q / double(M);
            f1_[j] = h * a / double(M);
            f2_[j] = h * b / double(M);
            f3_[j] = h * c / double(M);
            if (std::abs(lin[j].imag()) == 0.0) {
                Q_[j] = Q_[j].real(); f1_[j] = f1_[j].real(); f2_[j] = f2_[j].real(); f3_[j] = f3_[j].real();
            }
        }
        work_.resize(n_);
        phys_.resize(n_);
        derivs_.assign(static_cast<std::size_t>(max_order_) + 1, std::vector<double>(n_));
    }

    void step(std::vector<std::complex<double>>& v)
    {
        const std::size_t n = n_;
        std::vector<std::complex<double>> Nv(n), Na(n), Nb(n), Nc(n), a(n), b(n), c(n);
        nonlinear(v, Nv);
        for (std::size_t j = 0; j < n; ++j) a[j] = E2_[j] * v[j] + Q_[j] * Nv[j];
        nonlinear(a, Na);
        for (std::size_t j = 0; j < n; ++j) b[j] = E2_[j] * v[j] + Q_[j] * Na[j];
        nonlinear(b, Nb);
        for (std::size_t j = 0; j < n; ++j) c[j] = E2_[j] * a[j] + Q_[j] * (2.0 * Nb[j] - Nv[j]);
        nonlinear(c, Nc);
        for (std::size_t j = 0; j < n; ++j)
            v[j] = E_[j] * v[j] + f1_[j] * Nv[j] + 2.0 * f2_[j] * (Na[j] + Nb[j]) + f3_[j] * Nc[j];
    }

    void forward(std::span<const double> u, std::vector<std::complex<double>>& v)
    {
        std::vector<double> in(u.begin(), u.end());
        fft_.fwd(v, in);
    }

    void inverse(const std::vector<std::complex<double>>& v, std::vector<double>& u)
    {
        std::vector<std::complex<double>> tmp(v);
        std::vector<std::complex<double>> out;
        fft_.inv(out, tmp);
        u.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) u[j] = out[j].real();
    }

private:
    std::complex<double> ik_pow(std::size_t j, int order) const
    {
        if (order == 0) return 1.0;
        // The Nyquist mode has no well-defined odd derivative.
        if (j == n_ / 2 && order % 2 == 1) return 0.0;
        return std::pow(std::complex<double>(0.0, k_[j]), order);
    }

    void nonlinear(const std::vector<std::complex<double>>& v, std::vector<std::complex<double>>& out)
    {
        out.assign(n_, 0.0);
        if (nonlinear_.empty()) return;
        for (int d = 0; d <= max_order_; ++d) {
            for (std::size_t j = 0; j < n_; ++j) work_[j] = v[j] * ik_pow(j, d);
            inverse(work_, derivs_[static_cast<std::size_t>(d)]);
        }
        const auto& u = derivs_[0];
        std::fill(phys_.begin(), phys_.end(), 0.0);
        for (const auto& mt : nonlinear_) {
            const int q = mt.term.poly_power;
            if (mt.term.deriv.none()) {
                for (std::size_t j = 0; j < n_; ++j) phys_[j] += mt.coefficient * std::pow(u[j], q);
                continue;
            }
            const auto& du = derivs_[static_cast<std::size_t>(mt.term.deriv.x_order)];
            for (std::size_t j = 0; j < n_; ++j) phys_[j] += mt.coefficient * std::pow(u[j], q) * du[j];
        }
        fft_.fwd(out, phys_);
    }

    std::size_t n_;
    double h_;
    std::vector<double> k_;
    std::vector<ModelTerm> nonlinear_;
    int max_order_ = 0;
    std::vector<std::complex<double>> E_, E2_, Q_, f1_, f2_, f3_, work_;
    std::vector<double> phys_;
    std::vector<std::vector<double>> derivs_;
    Eigen::FFT<double> fft_;
};

inline Field integrate_spectral_periodic(const GridSpec& grid, const PdeModel& model,
                                         std::span<const double> u0, Integration integ)
{
    int sub = integ.substeps;
    if (sub <= 0) {
        // Explicit treatment of the nonlinear terms limits the internal step.
        const double kmax = std::numbers::pi / grid.dx;
        const double us = 2.0 * std::max(detail::max_abs(u0), 1e-12);
        double rate = 0.0;
        for (const auto& mt : model.terms) {
            const auto& t = mt.term;
            const bool linear = (t.poly_power == 0 && t.deriv.x_order >= 1) || (t.poly_power == 1 && t.deriv.none());
            if (!linear) rate += std::abs(mt.coefficient) * std::pow(us, t.poly_power) * std::pow(kmax, t.deriv.x_order);
        }
        sub = std::max(1, static_cast<int>(std::ceil(grid.dt * rate)));
    }
    const double h = grid.dt / sub;
    Etdrk4 solver(grid, model, h);
    Field out(grid);
    std::copy(u0.begin(), u0.end(), out.snapshot(0).begin());
    std::vector<std::complex<double>> v;
    solver.forward(u0, v);
    std::vector<double> u;
    const double bound = 1e6 * std::max(detail::max_abs(u0), 1.0);
    for (std::size_t s = 1; s < grid.nt; ++s) {
        for (int step = 0; step < sub; ++step) solver.step(v);
        solver.inverse(v, u);
        if (detail::blown_up(u, bound)) fail(Errc::StabilityViolation, "spectral solution blew up");
        std::copy(u.begin(), u.end(), out.snapshot(s).begin());
    }
    return out;
}

/// Integrates `model` from the initial snapshot `u0` over `grid`.
inline Field integrate(const GridSpec& grid, const PdeModel& model, Boundary boundary,
                       std::span<const double> u0, Integration integ = {})
{
    grid.validate();
    require(u0.size() == grid.points_per_snapshot(), Errc::InvalidArgument, "initial condition size mismatch");
    if (boundary == Boundary::Periodic) {
        require(model.time_order == 1, Errc::UnsupportedCombination,
                "periodic boundary is only supported for first-order-in-time models");
        return integrate_spectral_periodic(grid, model, u0, integ);
    }
    if (model.time_order == 2) return integrate_leapfrog_dirichlet(grid, model, u0, integ);
    return integrate_rk4_dirichlet(grid, model, u0, integ);
}

} // namespace pdesift
