#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdesift/error.hpp"

namespace pdesift {

enum class Axis { t, x, y };

constexpr const char* axis_name(Axis a) noexcept
{
    switch (a) {
        case Axis::t: return "t";
        case Axis::x: return "x";
        case Axis::y: return "y";
    }
    return "?";
}

/// Uniform tensor grid. Snapshots are stored at t0 + k*dt, k = 0..nt-1,
/// and spatial nodes at x0 + i*dx (and y0 + j*dy in 2D).
struct GridSpec {
    std::size_t nx = 0;
    std::optional<std::size_t> ny;
    std::size_t nt = 0;
    double dx = 0.0;
    std::optional<double> dy;
    double dt = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    double t0 = 0.0;

    bool is_2d() const noexcept { return ny.has_value(); }
    std::size_t ny_or_one() const noexcept { return ny.value_or(1); }
    std::size_t points_per_snapshot() const noexcept { return nx * ny_or_one(); }
    std::size_t size() const noexcept { return nt * points_per_snapshot(); }

    double x(std::size_t i) const noexcept { return x0 + static_cast<double>(i) * dx; }
    double y(std::size_t j) const noexcept { return y0 + static_cast<double>(j) * dy.value_or(0.0); }
    double t(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * dt; }

    std::size_t length(Axis a) const noexcept
    {
        switch (a) {
            case Axis::t: return nt;
            case Axis::x: return nx;
            case Axis::y: return ny_or_one();
        }
        return 0;
    }

    double spacing(Axis a) const noexcept
    {
        switch (a) {
            case Axis::t: return dt;
            case Axis::x: return dx;
            case Axis::y: return dy.value_or(0.0);
        }
        return 0.0;
    }

    /// Distance in the flat value array between neighbours along `a`.
    std::size_t stride(Axis a) const noexcept
    {
        switch (a) {
            case Axis::t: return points_per_snapshot();
            case Axis::x: return ny_or_one();
            case Axis::y: return 1;
        }
        return 0;
    }

    void validate() const
    {
        require(nx >= 3, Errc::InvalidArgument, "grid needs nx >= 3");
        require(nt >= 3, Errc::InvalidArgument, "grid needs nt >= 3");
        require(dx > 0.0 && dt > 0.0, Errc::InvalidArgument, "grid spacings must be positive");
        require(ny.has_value() == dy.has_value(), Errc::InvalidArgument,
                "ny and dy must be given together");
        if (ny) {
            require(*ny >= 3, Errc::InvalidArgument, "grid needs ny >= 3");
            require(*dy > 0.0, Errc::InvalidArgument, "dy must be positive");
        }
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Gridded solution u(t, x[, y]) stored row-major in (t, x, y) order.
class Field {
public:
    Field() = default;

    explicit Field(GridSpec grid) : grid_(std::move(grid))
    {
        grid_.validate();
        values_.assign(grid_.size(), 0.0);
    }

    Field(GridSpec grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values))
    {
        grid_.validate();
        require(values_.size() == grid_.size(), Errc::InvalidArgument,
                "field value count does not match grid");
        for (double v : values_)
            require(std::isfinite(v), Errc::InvalidArgument, "field contains non-finite values");
    }

    const GridSpec& grid() const noexcept { return grid_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    std::size_t index(std::size_t t, std::size_t i, std::size_t j = 0) const noexcept
    {
        return (t * grid_.nx + i) * grid_.ny_or_one() + j;
    }

    double operator()(std::size_t t, std::size_t i, std::size_t j = 0) const noexcept
    {
        return values_[index(t, i, j)];
    }
    double& operator()(std::size_t t, std::size_t i, std::size_t j = 0) noexcept
    {
        return values_[index(t, i, j)];
    }

    std::span<const double> snapshot(std::size_t t) const noexcept
    {
        const auto n = grid_.points_per_snapshot();
        return std::span<const double>(values_).subspan(t * n, n);
    }
    std::span<double> snapshot(std::size_t t) noexcept
    {
        const auto n = grid_.points_per_snapshot();
        return std::span<double>(values_).subspan(t * n, n);
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
};

inline double sample_stddev(std::span<const double> v)
{
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace pdesift
