#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdesift/error.hpp"
#include "pdesift/grid.hpp"
#include "pdesift/ssvb.hpp"
#include "pdesift/systems.hpp"

namespace pdesift {

using json = nlohmann::ordered_json;

namespace detail {
inline std::uint64_t swap_bytes(std::uint64_t v)
{
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
    return r;
}
} // namespace detail

inline json grid_to_json(const GridSpec& g)
{
    json j{{"nx", g.nx}, {"nt", g.nt}, {"dx", g.dx}, {"dt", g.dt}, {"x0", g.x0}, {"t0", g.t0}};
    if (g.is_2d()) {
        j["ny"] = *g.ny;
        j["dy"] = *g.dy;
        j["y0"] = g.y0;
    }
    return j;
}

inline GridSpec grid_from_json(const json& j)
{
    GridSpec g;
    try {
        g.nx = j.at("nx").get<std::size_t>();
        g.nt = j.at("nt").get<std::size_t>();
        g.dx = j.at("dx").get<double>();
        g.dt = j.at("dt").get<double>();
        g.x0 = j.value("x0", 0.0);
        g.t0 = j.value("t0", 0.0);
        if (j.contains("ny")) {
            g.ny = j.at("ny").get<std::size_t>();
            g.dy = j.at("dy").get<double>();
            g.y0 = j.value("y0", 0.0);
        }
    } catch (const json::exception& e) {
        fail(Errc::Io, std::string("bad grid header: ") + e.what());
    }
    g.validate();
    return g;
}

/// What travels with a snapshot file besides the values.
struct FieldHeader {
    GridSpec grid;
    std::string kind;
    std::map<std::string, double> coefficients;
    NoiseSpec noise;
};

inline FieldHeader header_for(const SystemSpec& spec, const NoiseSpec& noise)
{
    return {spec.grid, system_name(spec.kind), spec.coefficients, noise};
}

/// One JSON line, then nt*nx[*ny] little-endian float64 values in (t, x, y) order.
inline void write_field(const std::filesystem::path& path, const Field& field, const FieldHeader& h)
{
    json head{{"format", "pdesift-field"},
              {"version", 1},
              {"endianness", "little"},
              {"kind", h.kind},
              {"grid", grid_to_json(field.grid())},
              {"coefficients", h.coefficients},
              {"noise", {{"level", h.noise.level}, {"seed", h.noise.seed}}}};
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open " + path.string() + " for writing");
    out << head.dump() << '\n';
    const auto vals = field.values();
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(vals.data()), static_cast<std::streamsize>(vals.size_bytes()));
    } else {
        for (double v : vals) {
            auto bits = detail::swap_bytes(std::bit_cast<std::uint64_t>(v));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
    if (!out) fail(Errc::Io, "write failed for " + path.string());
}

struct LoadedField {
    Field field;
    FieldHeader header;
};

inline LoadedField read_field(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(Errc::Io, "missing header in " + path.string());
    json head;
    try {
        head = json::parse(line);
    } catch (const json::exception& e) {
        fail(Errc::Io, std::string("bad header: ") + e.what());
    }
    if (head.value("format", "") != "pdesift-field") fail(Errc::Io, path.string() + " is not a field file");
    if (head.value("endianness", "") != "little") fail(Errc::Io, "unsupported endianness marker");
    FieldHeader h;
    h.grid = grid_from_json(head.at("grid"));
    h.kind = head.value("kind", "");
    if (head.contains("coefficients")) h.coefficients = head["coefficients"].get<std::map<std::string, double>>();
    if (head.contains("noise")) {
        h.noise.level = head["noise"].value("level", 0.0);
        h.noise.seed = head["noise"].value("seed", std::uint64_t{0});
    }
    std::vector<double> vals(h.grid.size());
    in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(vals.size() * sizeof(double)))
        fail(Errc::Io, "truncated field data in " + path.string());
    if constexpr (std::endian::native != std::endian::little)
        for (double& v : vals) v = std::bit_cast<double>(detail::swap_bytes(std::bit_cast<std::uint64_t>(v)));
    return {Field(h.grid, std::move(vals)), h};
}

inline json model_to_json(const DiscoveredModel& m, int time_order)
{
    json terms = json::array();
    for (std::size_t i = 0; i < m.terms.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        terms.push_back({{"label", m.terms[i].label()}, {"pip", m.pip(k)}, {"mean", m.mu_hat(k)},
                         {"std", m.posterior_std(i)}});
    }
    json support = json::array();
    for (auto i : m.support) support.push_back(m.terms[i].label());
    json cov = json::array();
    for (auto i : m.support) {
        json row = json::array();
        for (auto j : m.support) row.push_back(m.Sigma_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        cov.push_back(row);
    }
    return {{"time_order", time_order}, {"support", support}, {"covariance", cov}, {"terms", terms},
            {"sweeps", m.sweeps},        {"converged", m.converged}, {"noise_precision", m.noise_precision},
            {"elbo_trace", m.elbo_trace}};
}

/// Inverse of model_to_json. Terms keep their file order.
inline std::pair<DiscoveredModel, int> model_from_json(const json& j)
{
    DiscoveredModel m;
    int time_order = 1;
    try {
        time_order = j.value("time_order", 1);
        const auto& terms = j.at("terms");
        const auto k = static_cast<Eigen::Index>(terms.size());
        m.pip = Eigen::VectorXd::Zero(k);
        m.mu_hat = Eigen::VectorXd::Zero(k);
        m.Sigma_hat = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto& t = terms[static_cast<std::size_t>(i)];
            m.terms.push_back(parse_term(t.at("label").get<std::string>()));
            m.pip(i) = t.value("pip", 0.0);
            m.mu_hat(i) = t.value("mean", 0.0);
        }
        for (const auto& lab : j.at("support")) {
            const auto bt = parse_term(lab.get<std::string>());
            const auto it = std::find(m.terms.begin(), m.terms.end(), bt);
            if (it == m.terms.end()) fail(Errc::UnresolvableLabel, "support label not among terms: " + lab.get<std::string>());
            m.support.push_back(static_cast<std::size_t>(it - m.terms.begin()));
        }
        const auto& cov = j.at("covariance");
        require(cov.size() == m.support.size(), Errc::Io, "covariance does not match support");
        for (std::size_t a = 0; a < m.support.size(); ++a)
            for (std::size_t b = 0; b < m.support.size(); ++b)
                m.Sigma_hat(static_cast<Eigen::Index>(m.support[a]), static_cast<Eigen::Index>(m.support[b])) =
                    cov[a].at(b).get<double>();
        m.sweeps = j.value("sweeps", 0);
        m.converged = j.value("converged", false);
        m.noise_precision = j.value("noise_precision", 0.0);
        if (j.contains("elbo_trace")) m.elbo_trace = j["elbo_trace"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        fail(Errc::Io, std::string("bad model file: ") + e.what());
    }
    return {std::move(m), time_order};
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(Errc::Io, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Whitespace-separated columns for gnuplot.
inline void write_field_dat(const std::filesystem::path& path, const Field& f)
{
    const GridSpec& g = f.grid();
    std::ostringstream out;
    out.precision(10);
    out << (g.is_2d() ? "# t x y u\n" : "# t x u\n");
    for (std::size_t t = 0; t < g.nt; ++t) {
        for (std::size_t i = 0; i < g.nx; ++i) {
            if (g.is_2d()) {
                for (std::size_t j = 0; j < *g.ny; ++j) out << g.t(t) << ' ' << g.x(i) << ' ' << g.y(j) << ' ' << f(t, i, j) << '\n';
            } else {
                out << g.t(t) << ' ' << g.x(i) << ' ' << f(t, i) << '\n';
            }
        }
        out << '\n';
    }
    write_text(path, out.str());
}

} // namespace pdesift
