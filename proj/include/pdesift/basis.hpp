#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdesift/error.hpp"

namespace pdesift {

/// Spatial derivative multi-index: d^(x_order + y_order) / dx^x_order dy^y_order.
struct DerivIndex {
    int x_order = 0;
    int y_order = 0;

    bool none() const noexcept { return x_order == 0 && y_order == 0; }
    int total() const noexcept { return x_order + y_order; }
    auto operator<=>(const DerivIndex&) const = default;
};

/// One candidate function u^poly_power * (derivative of u).
/// (none, 0) is the constant term 1.
struct BasisTerm {
    DerivIndex deriv;
    int poly_power = 0;

    auto operator<=>(const BasisTerm&) const = default;

    std::string label() const
    {
        std::string poly;
        if (poly_power == 1) poly = "u";
        else if (poly_power > 1) poly = "u^" + std::to_string(poly_power);

        if (deriv.none()) return poly.empty() ? "1" : poly;
        std::string d = "u_" + std::string(deriv.x_order, 'x') + std::string(deriv.y_order, 'y');
        return poly.empty() ? d : poly + "*" + d;
    }
};

namespace detail {

inline std::optional<int> parse_power(std::string_view s)
{
    if (s == "u") return 1;
    if (s.size() < 3 || s.substr(0, 2) != "u^") return std::nullopt;
    int p = 0;
    for (char c : s.substr(2)) {
        if (c < '0' || c > '9') return std::nullopt;
        p = p * 10 + (c - '0');
    }
    return p >= 2 ? std::optional<int>(p) : std::nullopt;
}

inline std::optional<DerivIndex> parse_deriv(std::string_view s)
{
    if (s.size() < 3 || s.substr(0, 2) != "u_") return std::nullopt;
    DerivIndex d;
    bool seen_y = false;
    for (char c : s.substr(2)) {
        if (c == 'x' && !seen_y) ++d.x_order;
        else if (c == 'y') { seen_y = true; ++d.y_order; }
        else return std::nullopt;
    }
    return d;
}

} // namespace detail

/// Inverse of BasisTerm::label().
inline BasisTerm parse_term(std::string_view label)
{
    if (label == "1") return {};
    BasisTerm t;
    const auto star = label.find('*');
    if (star == std::string_view::npos) {
        if (auto p = detail::parse_power(label)) {
            t.poly_power = *p;
            return t;
        }
        if (auto d = detail::parse_deriv(label)) {
            t.deriv = *d;
            return t;
        }
        fail(Errc::UnresolvableLabel, "cannot parse term label '" + std::string(label) + "'");
    }
    auto p = detail::parse_power(label.substr(0, star));
    auto d = detail::parse_deriv(label.substr(star + 1));
    if (!p || !d) fail(Errc::UnresolvableLabel, "cannot parse term label '" + std::string(label) + "'");
    t.poly_power = *p;
    t.deriv = *d;
    return t;
}

/// Derivative factors in canonical order. 1D: u_x .. u_(x^max_order).
/// 2D: interleaved by order, u_x, u_y, u_xx, u_yy, ... (no mixed terms).
inline std::vector<DerivIndex> derivative_set(bool two_d, int max_order)
{
    std::vector<DerivIndex> out;
    for (int o = 1; o <= max_order; ++o) {
        out.push_back({o, 0});
        if (two_d) out.push_back({0, o});
    }
    return out;
}

/// Canonical term list: polynomial powers outer, derivative factors inner,
/// K = (max_poly + 1) * (|derivative_set| + 1).
inline std::vector<BasisTerm> canonical_terms(bool two_d, int max_deriv, int max_poly)
{
    require(max_deriv >= 0 && max_poly >= 0, Errc::InvalidArgument, "negative dictionary order");
    const auto derivs = derivative_set(two_d, max_deriv);
    std::vector<BasisTerm> terms;
    for (int q = 0; q <= max_poly; ++q) {
        terms.push_back({DerivIndex{}, q});
        for (const auto& d : derivs) terms.push_back({d, q});
    }
    return terms;
}

inline std::vector<std::string> labels_of(const std::vector<BasisTerm>& terms)
{
    std::vector<std::string> out;
    out.reserve(terms.size());
    for (const auto& t : terms) out.push_back(t.label());
    return out;
}

} // namespace pdesift
