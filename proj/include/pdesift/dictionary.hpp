#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "pdesift/basis.hpp"
#include "pdesift/differentiation.hpp"

namespace pdesift {

enum class DerivChoice { Auto, CentralFD2, PolyInterp };

/// How derivatives are estimated when assembling a regression problem.
/// Auto picks CentralFD2 for clean data and PolyInterp otherwise.
struct DerivativeConfig {
    DerivChoice method = DerivChoice::Auto;
    int poly_degree = 5;
    int window = 13;
    int time_degree = 0; // 0: same as poly_degree
    int time_window = 0; // 0: same as window
    bool smooth_u = true;  // PolyInterp: fit along space wherever no spatial derivative is taken
    bool smooth_t = false; // PolyInterp: same along time, for u and spatial derivatives

    DerivMethod resolve(double noise_level) const
    {
        switch (method) {
            case DerivChoice::CentralFD2: return DerivMethod::CentralFD2;
            case DerivChoice::PolyInterp: return DerivMethod::PolyInterp;
            case DerivChoice::Auto: break;
        }
        return noise_level > 0.0 ? DerivMethod::PolyInterp : DerivMethod::CentralFD2;
    }
};

struct GridPoint {
    std::size_t t = 0, x = 0, y = 0;
    auto operator<=>(const GridPoint&) const = default;
};

struct Dictionary {
    Eigen::MatrixXd matrix; // N x K
    std::vector<BasisTerm> terms;
    std::vector<GridPoint> row_index;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(matrix.cols()); }

    std::optional<std::size_t> find(const BasisTerm& t) const
    {
        for (std::size_t k = 0; k < terms.size(); ++k)
            if (terms[k] == t) return k;
        return std::nullopt;
    }
};

struct RegressionProblem {
    Eigen::VectorXd y;
    Dictionary dictionary;
    int time_order = 1;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(y.size()); }
    std::size_t cols() const noexcept { return dictionary.cols(); }

    void validate() const
    {
        require(static_cast<std::size_t>(y.size()) == dictionary.rows(), Errc::InvalidArgument,
                "target length does not match dictionary rows");
        require(dictionary.row_index.size() == dictionary.rows(), Errc::InvalidArgument,
                "row index length does not match dictionary rows");
        require(dictionary.terms.size() == dictionary.cols(), Errc::InvalidArgument,
                "term count does not match dictionary columns");
    }
};

/// Which grid points become regression rows.
struct RowSelection {
    std::optional<std::size_t> trim;      // spatial margin override
    std::optional<std::size_t> time_trim; // temporal margin override (at least the stencil half-width)
    std::size_t max_rows = 0;        // 0: keep every trimmed point
    std::uint64_t seed = 0;
    // Drop points where the (smoothed) |u| is below this fraction of its largest
    // value over the candidates. Selection is on a regressor, so it does not
    // bias the fit; it removes rows whose derivatives are mostly noise.
    double min_amplitude = 0.0;
    std::size_t oversample = 20; // candidates per kept row when filtering by amplitude

    void validate() const
    {
        require(min_amplitude >= 0.0 && min_amplitude < 1.0, Errc::InvalidArgument,
                "min_amplitude must be in [0, 1)");
        require(oversample >= 1, Errc::InvalidArgument, "oversample must be >= 1");
    }
};

/// Sorted uniform sample of `k` distinct values from [0, n) (Floyd's algorithm).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, std::uint64_t seed)
{
    require(k <= n, Errc::InvalidArgument, "cannot sample more rows than available");
    std::vector<std::size_t> out;
    if (k == n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    std::mt19937_64 rng(seed);
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(k * 2);
    for (std::size_t j = n - k; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        const std::size_t t = pick(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    out.assign(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

/// Pointwise derivative evaluation on a field with cached axis operators.
class DerivativeEngine {
public:
    DerivativeEngine(const Field& field, DerivMethod method, DerivativeConfig config)
        : field_(field), method_(method), config_(config)
    {}

    DerivMethod method() const noexcept { return method_; }
    const Field& field() const noexcept { return field_; }

    const AxisOperator& op(Axis axis, int order)
    {
        const auto key = std::make_pair(static_cast<int>(axis), order);
        auto it = ops_.find(key);
        if (it != ops_.end()) return it->second;
        const GridSpec& g = field_.grid();
        const auto n = g.length(axis);
        const double h = g.spacing(axis);
        AxisOperator result = [&] {
            // an explicit time window overrides the time stencil for either method
            const bool time_override = axis == Axis::t && config_.time_window > 0;
            if (method_ == DerivMethod::CentralFD2 && order > 0 && !time_override)
                return AxisOperator::central_fd(n, h, order);
            int degree = axis == Axis::t && config_.time_degree > 0 ? config_.time_degree : config_.poly_degree;
            int window = axis == Axis::t && config_.time_window > 0 ? config_.time_window : config_.window;
            if (order > degree) {
                // widen the window along with the degree for high orders
                window += 2 * (order - degree);
                degree = order;
            }
            if (window % 2 == 0) ++window;
            return AxisOperator::polynomial(n, h, order, degree, window);
        }();
        return ops_.emplace(key, std::move(result)).first->second;
    }

    /// u itself, or its local polynomial fit when smoothing is on.
    double value(const GridPoint& p) { return mixed(p, 0, 0, 0); }

    double derivative(const GridPoint& p, const DerivIndex& d) { return mixed(p, 0, d.x_order, d.y_order); }

    double time_derivative(const GridPoint& p, int order) { return mixed(p, order, 0, 0); }

    /// d^ot/dt d^ox/dx d^oy/dy u as a tensor product of 1D stencils. An axis
    /// with order 0 is either left alone or, under PolyInterp smoothing, fitted.
    double mixed(const GridPoint& p, int ot, int ox, int oy)
    {
        const GridSpec& g = field_.grid();
        const AxisOperator* opt = axis_op(Axis::t, ot);
        const AxisOperator* opx = axis_op(Axis::x, ox);
        const AxisOperator* opy = g.is_2d() ? axis_op(Axis::y, oy) : nullptr;
        static constexpr double unit[1] = {1.0};
        const auto span = [](const AxisOperator* o, std::size_t i) {
            return o ? o->row(i) : AxisOperator::Row{i, std::span<const double>(unit)};
        };
        const auto rt = span(opt, p.t);
        const auto ry = span(opy, p.y);
        double acc = 0.0;
        for (std::size_t a = 0; a < rt.weights.size(); ++a) {
            for (std::size_t b = 0; b < ry.weights.size(); ++b) {
                const GridPoint q{rt.start + a, p.x, ry.start + b};
                const double v = opx ? opx->apply(line_base(q, Axis::x), g.stride(Axis::x), q.x)
                                     : field_(q.t, q.x, q.y);
                acc += rt.weights[a] * ry.weights[b] * v;
            }
        }
        return acc;
    }

    /// Points to drop at each end of `axis` so that every kept point uses
    /// a centred stencil for the listed derivative orders.
    std::size_t margin(Axis axis, const std::vector<int>& orders)
    {
        std::size_t m = 0;
        for (int o : orders) m = std::max(m, op(axis, o).half_width());
        if (smoothing(axis)) m = std::max(m, op(axis, 0).half_width());
        return m;
    }

private:
    bool smoothing(Axis axis) const noexcept
    {
        if (method_ != DerivMethod::PolyInterp) return false;
        return axis == Axis::t ? config_.smooth_t : config_.smooth_u;
    }

    const AxisOperator* axis_op(Axis axis, int order)
    {
        if (order > 0 || smoothing(axis)) return &op(axis, order);
        return nullptr;
    }

    const double* line_base(const GridPoint& p, Axis axis) const
    {
        const GridSpec& g = field_.grid();
        const std::size_t pos = axis == Axis::t ? p.t : (axis == Axis::x ? p.x : p.y);
        return field_.values().data() + field_.index(p.t, p.x, p.y) - pos * g.stride(axis);
    }

    const Field& field_;
    DerivMethod method_;
    DerivativeConfig config_;
    std::map<std::pair<int, int>, AxisOperator> ops_;
};

struct DictionarySettings {
    int max_deriv = 6;
    int max_poly = 6;
    RowSelection rows;
};

namespace detail {

inline std::vector<GridPoint> select_rows(const GridSpec& g, std::size_t mt, std::size_t mx, std::size_t my,
                                          const RowSelection& sel)
{
    const std::size_t ny = g.ny_or_one();
    if (!g.is_2d()) my = 0;
    if (g.nt <= 2 * mt || g.nx <= 2 * mx || ny <= 2 * my)
        fail(Errc::EmptyAfterTrim, "no grid points remain after trimming");
    const std::size_t nt = g.nt - 2 * mt, nx = g.nx - 2 * mx, nyk = ny - 2 * my;
    const std::size_t total = nt * nx * nyk;
    const std::size_t k = sel.max_rows == 0 ? total : std::min(sel.max_rows, total);
    const auto picks = sample_without_replacement(total, k, sel.seed);
    std::vector<GridPoint> rows;
    rows.reserve(picks.size());
    for (std::size_t flat : picks) {
        const std::size_t j = flat % nyk;
        const std::size_t i = (flat / nyk) % nx;
        const std::size_t t = flat / (nyk * nx);
        rows.push_back({t + mt, i + mx, j + my});
    }
    return rows;
}

inline std::vector<int> spatial_orders(const std::vector<BasisTerm>& terms, bool y_axis)
{
    std::vector<int> out;
    for (const auto& t : terms) {
        const int o = y_axis ? t.deriv.y_order : t.deriv.x_order;
        if (o > 0) out.push_back(o);
    }
    return out;
}

} // namespace detail

/// Rows that survive trimming for this term set and derivative method, with
/// at least two snapshots dropped at each temporal end.
inline std::vector<GridPoint> regression_rows(const Field& field, const std::vector<BasisTerm>& terms,
                                              int time_order, DerivativeEngine& engine, const RowSelection& sel)
{
    const GridSpec& g = field.grid();
    std::size_t mx = engine.margin(Axis::x, detail::spatial_orders(terms, false));
    std::size_t my = g.is_2d() ? engine.margin(Axis::y, detail::spatial_orders(terms, true)) : 0;
    if (sel.trim) mx = my = *sel.trim;
    std::size_t mt = std::max<std::size_t>(2, engine.margin(Axis::t, {time_order}));
    if (sel.time_trim) mt = std::max(mt, *sel.time_trim);
    sel.validate();
    if (sel.min_amplitude == 0.0) return detail::select_rows(g, mt, mx, my, sel);

    RowSelection wide = sel;
    wide.max_rows = sel.max_rows * sel.oversample;
    const auto candidates = detail::select_rows(g, mt, mx, my, wide);
    std::vector<double> amp(candidates.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        amp[i] = std::abs(engine.value(candidates[i]));
        peak = std::max(peak, amp[i]);
    }
    std::vector<GridPoint> kept;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (amp[i] >= sel.min_amplitude * peak) kept.push_back(candidates[i]);
    if (kept.empty()) fail(Errc::EmptyAfterTrim, "no grid points pass the amplitude filter");
    if (sel.max_rows == 0 || kept.size() <= sel.max_rows) return kept;
    std::vector<GridPoint> out;
    out.reserve(sel.max_rows);
    for (std::size_t i : sample_without_replacement(kept.size(), sel.max_rows, sel.seed + 1)) out.push_back(kept[i]);
    return out;
}

inline Dictionary build_dictionary(const Field& field, const std::vector<BasisTerm>& terms,
                                   DerivativeEngine& engine, std::vector<GridPoint> rows)
{
    require(!terms.empty(), Errc::InvalidArgument, "empty term list");
    {
        std::vector<BasisTerm> sorted = terms;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), Errc::InvalidArgument,
                "duplicate dictionary terms");
    }
    for (const auto& t : terms) {
        require(t.poly_power >= 0 && t.deriv.x_order >= 0 && t.deriv.y_order >= 0, Errc::InvalidArgument,
                "negative term order");
        require(t.deriv.y_order == 0 || field.grid().is_2d(), Errc::InvalidArgument, "y derivative on a 1D field");
    }
    std::vector<DerivIndex> derivs;
    for (const auto& t : terms)
        if (!t.deriv.none() && std::find(derivs.begin(), derivs.end(), t.deriv) == derivs.end())
            derivs.push_back(t.deriv);

    Dictionary dict;
    dict.terms = terms;
    dict.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()));
    std::vector<double> dvals(derivs.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const GridPoint& p = rows[r];
        const double u = engine.value(p);
        for (std::size_t k = 0; k < derivs.size(); ++k) dvals[k] = engine.derivative(p, derivs[k]);
        for (std::size_t c = 0; c < terms.size(); ++c) {
            const auto& t = terms[c];
            double v = t.poly_power == 0 ? 1.0 : std::pow(u, t.poly_power);
            if (!t.deriv.none()) {
                const auto k = static_cast<std::size_t>(std::find(derivs.begin(), derivs.end(), t.deriv) - derivs.begin());
                v *= dvals[k];
            }
            dict.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    dict.row_index = std::move(rows);
    return dict;
}

/// Dictionary with the canonical term list for this field's dimensionality.
inline Dictionary build_dictionary(const Field& field, int max_deriv, int max_poly, DerivMethod method,
                                   const DerivativeConfig& config = {}, const RowSelection& sel = {},
                                   int time_order = 1)
{
    const auto terms = canonical_terms(field.grid().is_2d(), max_deriv, max_poly);
    DerivativeEngine engine(field, method, config);
    auto rows = regression_rows(field, terms, time_order, engine, sel);
    return build_dictionary(field, terms, engine, std::move(rows));
}

/// Y_i = d^time_order u / dt^time_order at each dictionary row.
inline Eigen::VectorXd build_target(const Field& field, int time_order, DerivativeEngine& engine,
                                    const std::vector<GridPoint>& rows)
{
    require(time_order == 1 || time_order == 2, Errc::InvalidArgument, "time order must be 1 or 2");
    require(&engine.field() == &field, Errc::InvalidArgument, "engine was built on a different field");
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        y(static_cast<Eigen::Index>(r)) = engine.time_derivative(rows[r], time_order);
    return y;
}

inline Eigen::VectorXd build_target(const Field& field, int time_order, DerivMethod method,
                                    const std::vector<GridPoint>& rows, const DerivativeConfig& config = {})
{
    DerivativeEngine engine(field, method, config);
    return build_target(field, time_order, engine, rows);
}

/// Target and dictionary assembled on one shared row set.
inline RegressionProblem build_problem(const Field& field, const std::vector<BasisTerm>& terms, int time_order,
                                       DerivMethod method, const DerivativeConfig& config = {},
                                       const RowSelection& sel = {})
{
    DerivativeEngine engine(field, method, config);
    auto rows = regression_rows(field, terms, time_order, engine, sel);
    RegressionProblem p;
    p.time_order = time_order;
    p.y = build_target(field, time_order, engine, rows);
    p.dictionary = build_dictionary(field, terms, engine, std::move(rows));
    return p;
}

/// Uniform row subset without replacement, kept in original row order.
inline RegressionProblem subsample(const RegressionProblem& problem, std::size_t n_rows, std::uint64_t seed)
{
    problem.validate();
    require(n_rows <= problem.rows(), Errc::InvalidArgument, "subsample size exceeds row count");
    const auto picks = sample_without_replacement(problem.rows(), n_rows, seed);
    RegressionProblem out;
    out.time_order = problem.time_order;
    out.dictionary.terms = problem.dictionary.terms;
    out.y.resize(static_cast<Eigen::Index>(n_rows));
    out.dictionary.matrix.resize(static_cast<Eigen::Index>(n_rows), problem.dictionary.matrix.cols());
    out.dictionary.row_index.reserve(n_rows);
    for (std::size_t r = 0; r < picks.size(); ++r) {
        const auto src = static_cast<Eigen::Index>(picks[r]);
        out.y(static_cast<Eigen::Index>(r)) = problem.y(src);
        out.dictionary.matrix.row(static_cast<Eigen::Index>(r)) = problem.dictionary.matrix.row(src);
        out.dictionary.row_index.push_back(problem.dictionary.row_index[picks[r]]);
    }
    return out;
}

/// Debug export: header of term labels, one line per row.
inline void write_dictionary_csv(std::ostream& os, const Dictionary& dict)
{
    for (std::size_t c = 0; c < dict.terms.size(); ++c) os << (c ? "," : "") << dict.terms[c].label();
    os << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < dict.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < dict.matrix.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", dict.matrix(r, c));
            os << (c ? "," : "") << buf;
        }
        os << '\n';
    }
}

} // namespace pdesift
