#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pdesift/grid.hpp"
#include "pdesift/pde_model.hpp"
#include "pdesift/solvers.hpp"

namespace pdesift {

enum class SystemKind { Heat1D, Heat2D, Burgers, KdV, KS, Wave1D };

inline constexpr std::array<SystemKind, 6> all_system_kinds{
    SystemKind::Heat1D, SystemKind::Heat2D, SystemKind::Burgers,
    SystemKind::KdV,    SystemKind::KS,     SystemKind::Wave1D};

constexpr const char* system_name(SystemKind k) noexcept
{
    switch (k) {
        case SystemKind::Heat1D: return "heat1d";
        case SystemKind::Heat2D: return "heat2d";
        case SystemKind::Burgers: return "burgers";
        case SystemKind::KdV: return "kdv";
        case SystemKind::KS: return "ks";
        case SystemKind::Wave1D: return "wave1d";
    }
    return "?";
}

inline SystemKind parse_system_kind(const std::string& name)
{
    std::string s;
    for (char c : name) s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (auto k : all_system_kinds)
        if (s == system_name(k)) return k;
    if (s == "wave") return SystemKind::Wave1D;
    fail(Errc::Config, "unknown system '" + name + "'");
}

inline const char* boundary_name(Boundary b) noexcept
{
    return b == Boundary::Periodic ? "periodic" : "dirichlet";
}

inline Boundary parse_boundary(const std::string& s)
{
    if (s == "periodic") return Boundary::Periodic;
    if (s == "dirichlet" || s == "dirichlet-zero" || s == "dirichlet_zero") return Boundary::DirichletZero;
    fail(Errc::Config, "unknown boundary '" + s + "'");
}

/// Named initial condition. Recognised names and parameters:
///   sine_modes   amplitudes[k] * sin((k+1) pi (x - x0) / Lx)   (1D)
///   gaussian     exp(-a (x - center)^2)
///   gaussian_2d  exp(-a x^2 - a y^2)
///   solitons     sum (c/2) sech^2(sqrt(c) (x - position) / 2), c in `speeds`,
///                summed over periodic images on periodic grids
///   cos_sin      cos(x / scale) (1 + sin(x / scale))
struct InitialCondition {
    std::string name = "sine_modes";
    std::map<std::string, std::vector<double>> params;

    double scalar(const std::string& key, double fallback) const
    {
        auto it = params.find(key);
        return it == params.end() || it->second.empty() ? fallback : it->second.front();
    }
    std::vector<double> list(const std::string& key, std::vector<double> fallback) const
    {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

struct SystemSpec {
    SystemKind kind = SystemKind::Heat1D;
    std::map<std::string, double> coefficients;
    GridSpec grid;
    InitialCondition initial_condition;
    Boundary boundary = Boundary::DirichletZero;
    int substeps = 1; // internal steps per stored snapshot; 0 = automatic

    double coefficient(const std::string& key) const
    {
        auto it = coefficients.find(key);
        if (it == coefficients.end())
            fail(Errc::InvalidArgument, std::string(system_name(kind)) + " needs coefficient '" + key + "'");
        return it->second;
    }

    void validate() const
    {
        grid.validate();
        const bool two_d = kind == SystemKind::Heat2D;
        require(grid.is_2d() == two_d, Errc::InvalidArgument, "grid dimensionality does not match system");
        switch (kind) {
            case SystemKind::Heat1D:
            case SystemKind::Heat2D:
            case SystemKind::Wave1D:
                require(boundary == Boundary::DirichletZero, Errc::UnsupportedCombination,
                        std::string(system_name(kind)) + " requires the Dirichlet-zero boundary");
                break;
            default:
                require(boundary == Boundary::Periodic, Errc::UnsupportedCombination,
                        std::string(system_name(kind)) + " requires the periodic boundary");
        }
        (void)true_model();
    }

    /// The governing equation with this spec's coefficients.
    PdeModel true_model() const
    {
        const BasisTerm u_x{{1, 0}, 0}, u_xx{{2, 0}, 0}, u_xxx{{3, 0}, 0}, u_xxxx{{4, 0}, 0};
        const BasisTerm u_yy{{0, 2}, 0}, uu_x{{1, 0}, 1};
        (void)u_x;
        switch (kind) {
            case SystemKind::Heat1D: return {1, {{u_xx, coefficient("alpha")}}};
            case SystemKind::Heat2D: {
                const double a1 = coefficient("alpha1"), a2 = coefficient("alpha2");
                return {1, {{u_xx, a1 * a1}, {u_yy, a2 * a2}}};
            }
            case SystemKind::Burgers: return {1, {{uu_x, -1.0}, {u_xx, coefficient("nu")}}};
            case SystemKind::KdV:
                return {1, {{uu_x, -coefficient("advection")}, {u_xxx, -coefficient("dispersion")}}};
            case SystemKind::KS:
                return {1, {{uu_x, -coefficient("advection")}, {u_xx, -coefficient("antidiffusion")},
                            {u_xxxx, -coefficient("hyperdiffusion")}}};
            case SystemKind::Wave1D: {
                const double a = coefficient("alpha");
                return {2, {{u_xx, a * a}}};
            }
        }
        return {};
    }
};

/// Evaluates the initial condition on the grid's first snapshot.
inline std::vector<double> initial_values(const SystemSpec& spec)
{
    const GridSpec& g = spec.grid;
    const auto& ic = spec.initial_condition;
    std::vector<double> u(g.points_per_snapshot(), 0.0);
    const std::size_t ny = g.ny_or_one();
    const double lx = g.dx * static_cast<double>(g.nx - 1);
    for (std::size_t i = 0; i < g.nx; ++i)
        for (std::size_t j = 0; j < ny; ++j) {
            const double x = g.x(i), y = g.y(j);
            double v = 0.0;
            if (ic.name == "sine_modes") {
                const auto amps = ic.list("amplitudes", {1.0});
                for (std::size_t k = 0; k < amps.size(); ++k)
                    v += amps[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * (x - g.x0) / lx);
            } else if (ic.name == "gaussian") {
                const double a = ic.scalar("a", 1.0), c = ic.scalar("center", 0.0);
                v = std::exp(-a * (x - c) * (x - c));
            } else if (ic.name == "gaussian_2d") {
                const double a = ic.scalar("a", 5.0);
                v = std::exp(-a * x * x - a * y * y);
            } else if (ic.name == "solitons") {
                const auto speeds = ic.list("speeds", {1.0});
                const auto pos = ic.list("positions", std::vector<double>(speeds.size(), 0.0));
                require(pos.size() == speeds.size(), Errc::InvalidArgument, "soliton speeds/positions mismatch");
                // periodic images keep the profile smooth across the wrap
                const int images = spec.boundary == Boundary::Periodic ? 3 : 0;
                const double period = g.dx * static_cast<double>(g.nx);
                for (std::size_t k = 0; k < speeds.size(); ++k)
                    for (int m = -images; m <= images; ++m) {
                        const double c = speeds[k];
                        const double s = 1.0 / std::cosh(0.5 * std::sqrt(c) * (x - pos[k] + m * period));
                        v += 0.5 * c * s * s;
                    }
            } else if (ic.name == "cos_sin") {
                const double s = ic.scalar("scale", 16.0);
                v = std::cos(x / s) * (1.0 + std::sin(x / s));
            } else {
                fail(Errc::InvalidArgument, "unknown initial condition '" + ic.name + "'");
            }
            u[i * ny + j] = v;
        }
    if (spec.boundary == Boundary::DirichletZero) {
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < ny; ++j)
                if (i == 0 || i == g.nx - 1 || (g.is_2d() && (j == 0 || j == ny - 1))) u[i * ny + j] = 0.0;
    }
    return u;
}

inline Field simulate_model(const SystemSpec& spec, const PdeModel& model)
{
    spec.validate();
    const auto u0 = initial_values(spec);
    return integrate(spec.grid, model, spec.boundary, u0, Integration{spec.substeps});
}

inline Field simulate(const SystemSpec& spec)
{
    return simulate_model(spec, spec.true_model());
}

struct NoiseSpec {
    double level = 0.0; // fraction of the pooled field standard deviation
    std::uint64_t seed = 0;
};

/// Adds i.i.d. zero-mean Gaussian noise with standard deviation
/// level * std(all field values).
inline Field add_noise(const Field& field, const NoiseSpec& noise)
{
    require(noise.level >= 0.0, Errc::InvalidArgument, "noise level must be nonnegative");
    Field out = field;
    if (noise.level == 0.0) return out;
    const double sd = noise.level * sample_stddev(field.values());
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, sd);
    for (double& v : out.values()) v += normal(rng);
    return out;
}

namespace detail {

inline GridSpec grid_1d(std::size_t nx, double a, double b, bool periodic, double dt, double t_end)
{
    GridSpec g;
    g.nx = nx;
    g.x0 = a;
    g.dx = periodic ? (b - a) / static_cast<double>(nx) : (b - a) / static_cast<double>(nx - 1);
    g.dt = dt;
    g.nt = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    return g;
}

} // namespace detail

/// Benchmark configurations: domains, resolutions and snapshot intervals of
/// the six reference problems.
inline SystemSpec preset(SystemKind kind)
{
    SystemSpec s;
    s.kind = kind;
    switch (kind) {
        case SystemKind::Heat1D:
            s.coefficients = {{"alpha", 2.0}};
            s.grid = detail::grid_1d(44, 0.0, 1.0, false, 6.6e-6, 0.2);
            s.initial_condition = {"sine_modes", {{"amplitudes", {1.0, 0.5, 0.25, 0.125, 0.0625}}}};
            s.boundary = Boundary::DirichletZero;
            break;
        case SystemKind::Heat2D: {
            s.coefficients = {{"alpha1", 1.0}, {"alpha2", 1.0}};
            s.grid = detail::grid_1d(64, 0.0, 1.0, false, 0.001, 2.0);
            s.grid.ny = 64;
            s.grid.dy = 1.0 / 63.0;
            s.initial_condition = {"gaussian_2d", {{"a", {5.0}}}};
            s.boundary = Boundary::DirichletZero;
            s.substeps = 20;
            break;
        }
        case SystemKind::Burgers:
            s.coefficients = {{"nu", 0.1}};
            s.grid = detail::grid_1d(256, -8.0, 8.0, true, 0.09, 10.0);
            s.initial_condition = {"gaussian", {{"a", {1.0}}, {"center", {-2.0}}}};
            s.boundary = Boundary::Periodic;
            s.substeps = 18;
            break;
        case SystemKind::KdV:
            s.coefficients = {{"advection", 6.0}, {"dispersion", 1.0}};
            s.grid = detail::grid_1d(512, -30.0, 30.0, true, 0.09, 20.0);
            s.initial_condition = {"solitons", {{"speeds", {2.0, 1.0}}, {"positions", {-20.0, 0.0}}}};
            s.boundary = Boundary::Periodic;
            s.substeps = 45;
            break;
        case SystemKind::KS:
            s.coefficients = {{"advection", 1.0}, {"antidiffusion", 1.0}, {"hyperdiffusion", 1.0}};
            s.grid = detail::grid_1d(1024, 0.0, 100.0, true, 0.4, 100.0);
            // scale 100 / (2 pi) ~ 15.9 makes the profile periodic on [0, 100)
            s.initial_condition = {"cos_sin", {{"scale", {100.0 / (2.0 * std::numbers::pi)}}}};
            s.boundary = Boundary::Periodic;
            s.substeps = 40;
            break;
        case SystemKind::Wave1D:
            s.coefficients = {{"alpha", 1.0}};
            s.grid = detail::grid_1d(100, 0.0, 1.0, false, 0.003, 3.0);
            s.initial_condition = {"sine_modes", {{"amplitudes", {1.0, 0.5, 0.25, 0.125, 0.0625}}}};
            s.boundary = Boundary::DirichletZero;
            break;
    }
    return s;
}

} // namespace pdesift
