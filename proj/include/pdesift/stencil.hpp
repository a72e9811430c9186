#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdesift/error.hpp"

namespace pdesift {

/// Finite-difference weights for the `order`-th derivative at `z` from
/// values at `nodes` (Fornberg 1988). Nodes need not be uniform.
inline std::vector<double> fornberg_weights(double z, std::span<const double> nodes, int order)
{
    const int n = static_cast<int>(nodes.size()) - 1;
    require(n >= order && order >= 0, Errc::InvalidArgument, "too few nodes for derivative order");
    std::vector<std::vector<double>> c(nodes.size(), std::vector<double>(order + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, order);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) w[j] = c[j][order];
    return w;
}

/// A linear derivative operator along one grid axis of length n. Every
/// output point i is a weighted sum of a contiguous run of inputs starting
/// at `start(i)`. Interior points share one centred row; the few points near
/// each end get their own (shifted) rows.
class AxisOperator {
public:
    struct Row {
        std::size_t start;
        std::span<const double> weights;
    };

    /// 2nd-order accurate central stencils in the interior and 2nd-order
    /// one-sided (order+2 point) stencils at the ends.
    static AxisOperator central_fd(std::size_t n, double h, int order)
    {
        require(order >= 1, Errc::InvalidArgument, "derivative order must be >= 1");
        const std::size_t one_sided = static_cast<std::size_t>(order) + 2;
        require(n >= one_sided, Errc::GridTooSmall, "axis too short for finite-difference stencil");
        const std::size_t r = static_cast<std::size_t>((order + 1) / 2);

        AxisOperator op(n, order, r);
        op.center_ = scaled(fornberg_weights(0.0, offsets(-static_cast<double>(r), 2 * r + 1), order), h, order);
        op.center_width_ = 2 * r + 1;
        const auto nodes = offsets(0.0, one_sided);
        for (std::size_t i = 0; i < r; ++i) {
            op.left_.push_back(scaled(fornberg_weights(static_cast<double>(i), nodes, order), h, order));
            op.right_.push_back(scaled(
                fornberg_weights(static_cast<double>(one_sided - 1 - i), nodes, order), h, order));
        }
        op.edge_width_ = one_sided;
        return op;
    }

    /// Least-squares polynomial of `degree` through `window` consecutive
    /// points, differentiated `order` times at the output point. The window
    /// is centred where possible and shifted to stay inside the axis near
    /// the ends. Order 0 gives the smoothed value.
    static AxisOperator polynomial(std::size_t n, double h, int order, int degree, int window)
    {
        require(order >= 0 && degree >= order, Errc::InvalidArgument,
                "polynomial degree must be >= derivative order");
        require(window > degree, Errc::InvalidArgument, "window must exceed polynomial degree");
        require(window % 2 == 1, Errc::InvalidArgument, "window must be odd");
        require(static_cast<std::size_t>(window) <= n, Errc::WindowTooLarge,
                "polynomial window longer than axis");
        const auto m = static_cast<std::size_t>(window);
        const std::size_t half = m / 2;

        // Window nodes mapped onto [-1, 1].
        const double s = static_cast<double>(half);
        Eigen::MatrixXd V(window, degree + 1);
        for (int j = 0; j < window; ++j) {
            const double z = (j - s) / s;
            double p = 1.0;
            for (int k = 0; k <= degree; ++k) {
                V(j, k) = p;
                p *= z;
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
        if (qr.rank() < degree + 1) fail(Errc::DegenerateFit, "rank-deficient polynomial fit");
        const Eigen::MatrixXd pinv = qr.solve(Eigen::MatrixXd::Identity(window, window));

        const double scale = std::pow(1.0 / (s * h), order);
        auto row_at = [&](std::size_t pos) {
            const double z = (static_cast<double>(pos) - s) / s;
            Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(degree + 1);
            for (int k = order; k <= degree; ++k) {
                double f = 1.0;
                for (int q = 0; q < order; ++q) f *= (k - q);
                e(k) = f * std::pow(z, k - order);
            }
            const Eigen::RowVectorXd w = (e * pinv) * scale;
            return std::vector<double>(w.data(), w.data() + w.size());
        };

        AxisOperator op(n, order, half);
        op.center_ = row_at(half);
        op.center_width_ = m;
        for (std::size_t i = 0; i < half; ++i) {
            op.left_.push_back(row_at(i));
            op.right_.push_back(row_at(m - 1 - i));
        }
        op.edge_width_ = m;
        return op;
    }

    std::size_t length() const noexcept { return n_; }
    int order() const noexcept { return order_; }
    /// Number of points at each end whose row is not the centred one.
    std::size_t half_width() const noexcept { return half_; }
    bool is_boundary(std::size_t i) const noexcept { return i < half_ || i >= n_ - half_; }

    Row row(std::size_t i) const noexcept
    {
        if (i < half_) return {0, left_[i]};
        if (i >= n_ - half_) return {n_ - edge_width_, right_[n_ - 1 - i]};
        return {i - half_, center_};
    }

    double apply(const double* data, std::size_t stride, std::size_t i) const noexcept
    {
        const Row r = row(i);
        const double* p = data + r.start * stride;
        double acc = 0.0;
        for (std::size_t k = 0; k < r.weights.size(); ++k) acc += r.weights[k] * p[k * stride];
        return acc;
    }

private:
    AxisOperator(std::size_t n, int order, std::size_t half) : n_(n), order_(order), half_(half) {}

    static std::vector<double> offsets(double first, std::size_t count)
    {
        std::vector<double> v(count);
        for (std::size_t k = 0; k < count; ++k) v[k] = first + static_cast<double>(k);
        return v;
    }

    static std::vector<double> scaled(std::vector<double> w, double h, int order)
    {
        const double f = std::pow(h, -order);
        for (double& x : w) x *= f;
        return w;
    }

    std::size_t n_ = 0;
    int order_ = 0;
    std::size_t half_ = 0;
    std::vector<double> center_;
    std::size_t center_width_ = 0;
    std::size_t edge_width_ = 0;
    std::vector<std::vector<double>> left_;
    std::vector<std::vector<double>> right_;
};

} // namespace pdesift
