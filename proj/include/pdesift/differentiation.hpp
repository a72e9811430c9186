#pragma once

#include <cstdint>
#include <vector>

#include "pdesift/grid.hpp"
#include "pdesift/stencil.hpp"

namespace pdesift {

enum class DerivMethod { CentralFD2, PolyInterp };

struct DerivSpec {
    Axis axis = Axis::x;
    int order = 1;
    DerivMethod method = DerivMethod::CentralFD2;
    int poly_degree = 5; // PolyInterp only
    int window = 13;     // PolyInterp only, odd

    void validate() const
    {
        require(order >= 1, Errc::InvalidArgument, "derivative order must be >= 1");
        if (method == DerivMethod::PolyInterp) {
            require(poly_degree >= order, Errc::InvalidArgument, "poly_degree must be >= order");
            require(window > poly_degree, Errc::InvalidArgument, "window must exceed poly_degree");
            require(window % 2 == 1, Errc::InvalidArgument, "window must be odd");
        }
    }
};

inline AxisOperator make_axis_operator(const GridSpec& grid, const DerivSpec& spec)
{
    spec.validate();
    require(spec.axis != Axis::y || grid.is_2d(), Errc::InvalidArgument, "y derivative of a 1D field");
    const auto n = grid.length(spec.axis);
    const auto h = grid.spacing(spec.axis);
    if (spec.method == DerivMethod::CentralFD2) return AxisOperator::central_fd(n, h, spec.order);
    return AxisOperator::polynomial(n, h, spec.order, spec.poly_degree, spec.window);
}

/// Applies `op` along `axis` at every grid point.
inline Field apply_along_axis(const Field& field, Axis axis, const AxisOperator& op)
{
    const GridSpec& g = field.grid();
    Field out(g);
    const std::size_t stride = g.stride(axis);
    const auto in = field.values();
    auto dst = out.values();
    const std::size_t ny = g.ny_or_one();
    for (std::size_t t = 0; t < g.nt; ++t)
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) {
                const std::size_t pos = axis == Axis::t ? t : (axis == Axis::x ? i : j);
                // base of the line through (t, i, j) along the axis
                const std::size_t base = field.index(t, i, j) - pos * stride;
                dst[field.index(t, i, j)] = op.apply(in.data() + base, stride, pos);
            }
    return out;
}

inline Field fd_derivative(const Field& field, const DerivSpec& spec)
{
    require(spec.method == DerivMethod::CentralFD2, Errc::InvalidArgument,
            "fd_derivative needs a CentralFD2 spec");
    return apply_along_axis(field, spec.axis, make_axis_operator(field.grid(), spec));
}

struct PolyDerivative {
    Field values;
    /// 1 where the fitting window had to be shifted off-centre (same layout
    /// as the field values).
    std::vector<std::uint8_t> boundary_mask;
};

inline PolyDerivative poly_derivative(const Field& field, const DerivSpec& spec)
{
    require(spec.method == DerivMethod::PolyInterp, Errc::InvalidArgument,
            "poly_derivative needs a PolyInterp spec");
    const AxisOperator op = make_axis_operator(field.grid(), spec);
    PolyDerivative result{apply_along_axis(field, spec.axis, op), {}};
    const GridSpec& g = field.grid();
    result.boundary_mask.assign(g.size(), 0);
    for (std::size_t t = 0; t < g.nt; ++t)
        for (std::size_t i = 0; i < g.nx; ++i)
            for (std::size_t j = 0; j < g.ny_or_one(); ++j) {
                const std::size_t pos = spec.axis == Axis::t ? t : (spec.axis == Axis::x ? i : j);
                result.boundary_mask[field.index(t, i, j)] = op.is_boundary(pos) ? 1 : 0;
            }
    return result;
}

} // namespace pdesift
