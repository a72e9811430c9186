#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pdesift/dictionary.hpp"
#include "pdesift/io.hpp"
#include "pdesift/ssvb.hpp"
#include "pdesift/stridge.hpp"
#include "pdesift/systems.hpp"

namespace pdesift {

/// Derivative estimation plus row selection for one data regime.
struct PathSettings {
    DerivativeConfig deriv;
    RowSelection rows;
};

/// Everything needed to run one system through discovery.
struct SystemSettings {
    SystemSpec spec;
    int max_deriv = 6;
    int max_poly = 6;
    PathSettings clean; // noise == 0
    PathSettings noisy; // noise > 0
};

namespace detail {

inline PathSettings poly_path(int degree, int window, int time_degree, int time_window, double min_amplitude = 0.0)
{
    PathSettings p;
    p.deriv.method = DerivChoice::PolyInterp;
    p.deriv.poly_degree = degree;
    p.deriv.window = window;
    p.deriv.time_degree = time_degree;
    p.deriv.time_window = time_window;
    p.deriv.smooth_u = true;
    p.deriv.smooth_t = true;
    p.rows.min_amplitude = min_amplitude;
    return p;
}

} // namespace detail

/// Tuned per-system defaults. The clean path is plain central differences;
/// the noisy windows were picked per system because the best smoothing
/// depends on grid resolution and the highest derivative in the truth.
inline SystemSettings default_settings(SystemKind kind)
{
    SystemSettings s;
    s.spec = preset(kind);
    s.clean.deriv.method = DerivChoice::CentralFD2;
    constexpr std::size_t rows = 3000;
    switch (kind) {
        case SystemKind::Heat1D:
            s.noisy = detail::poly_path(5, 19, 3, 1601);
            break;
        case SystemKind::Heat2D:
            s.max_deriv = 2;
            // coarse time sampling against fast initial decay: smooth the time stencil
            s.clean.deriv.time_degree = 4;
            s.clean.deriv.time_window = 5;
            s.clean.rows.time_trim = 10;
            s.noisy = detail::poly_path(5, 17, 3, 61, 0.15);
            s.noisy.rows.time_trim = 40;
            break;
        case SystemKind::Burgers:
            s.noisy = detail::poly_path(8, 35, 3, 11);
            break;
        case SystemKind::KdV:
            s.noisy = detail::poly_path(7, 31, 4, 9, 0.3);
            break;
        case SystemKind::KS:
            s.max_deriv = 4;
            s.max_poly = 5;
            s.noisy = detail::poly_path(9, 13, 4, 5);
            break;
        case SystemKind::Wave1D:
            s.noisy = detail::poly_path(5, 31, 7, 121);
            break;
    }
    s.clean.rows.max_rows = rows;
    s.noisy.rows.max_rows = rows;
    return s;
}

struct ReportOptions {
    bool record_timing = false; // wall_ms is "NA" otherwise, so reports stay byte-stable
    bool write_models = true;
    bool write_fields = false;
};

struct ExperimentConfig {
    std::vector<SystemSettings> systems;
    std::vector<double> noise_levels{0.0, 0.01, 0.02, 0.05};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    SsvbConfig vb;
    StridgeConfig stridge;
    std::string output_dir = "pdesift_out";
    unsigned workers = 1;
    bool run_vb = true;
    bool run_stridge = true;
    ReportOptions report;

    void validate() const
    {
        require(!systems.empty(), Errc::Config, "no systems configured");
        require(!seeds.empty(), Errc::Config, "at least one seed is required");
        require(!noise_levels.empty(), Errc::Config, "at least one noise level is required");
        for (double n : noise_levels) require(n >= 0.0 && std::isfinite(n), Errc::Config, "noise levels must be nonnegative");
        require(run_vb || run_stridge, Errc::Config, "no method selected");
        try {
            vb.validate();
            stridge.validate();
            for (const auto& s : systems) {
                s.spec.validate();
                s.clean.rows.validate();
                s.noisy.rows.validate();
                require(s.max_deriv >= 1 && s.max_poly >= 0, Errc::Config, "bad dictionary size");
            }
        } catch (const Error& e) {
            if (e.code() == Errc::Config) throw;
            fail(Errc::Config, e.what());
        }
    }
};

// ---------------------------------------------------------------- config

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& dst)
{
    if (j.contains(key)) dst = j.at(key).get<T>();
}

inline DerivChoice parse_deriv_choice(const std::string& s)
{
    if (s == "auto") return DerivChoice::Auto;
    if (s == "fd" || s == "central_fd2" || s == "CentralFD2") return DerivChoice::CentralFD2;
    if (s == "poly" || s == "poly_interp" || s == "PolyInterp") return DerivChoice::PolyInterp;
    fail(Errc::Config, "unknown derivative method '" + s + "'");
}

inline void apply_path(const json& j, PathSettings& p)
{
    if (j.contains("method")) p.deriv.method = parse_deriv_choice(j.at("method").get<std::string>());
    read_opt(j, "poly_degree", p.deriv.poly_degree);
    read_opt(j, "window", p.deriv.window);
    read_opt(j, "time_degree", p.deriv.time_degree);
    read_opt(j, "time_window", p.deriv.time_window);
    read_opt(j, "smooth_u", p.deriv.smooth_u);
    read_opt(j, "smooth_t", p.deriv.smooth_t);
    read_opt(j, "min_amplitude", p.rows.min_amplitude);
    read_opt(j, "oversample", p.rows.oversample);
    if (j.contains("time_trim")) p.rows.time_trim = j.at("time_trim").get<std::size_t>();
}

inline void apply_dict(const json& j, SystemSettings& s)
{
    read_opt(j, "max_deriv", s.max_deriv);
    read_opt(j, "max_poly", s.max_poly);
    if (j.contains("trim")) s.clean.rows.trim = s.noisy.rows.trim = j.at("trim").get<std::size_t>();
    for (const char* key : {"subsample", "max_rows"})
        if (j.contains(key)) s.clean.rows.max_rows = s.noisy.rows.max_rows = j.at(key).get<std::size_t>();
}

/// Shared overrides first, then the entry's own.
inline SystemSettings system_from_json(const json& entry, const json& root)
{
    const std::string name = entry.is_string() ? entry.get<std::string>() : entry.at("name").get<std::string>();
    SystemSettings s = default_settings(parse_system_kind(name));
    const auto apply = [&](const json& j) {
        if (j.contains("dict")) apply_dict(j.at("dict"), s);
        if (j.contains("deriv")) apply_path(j.at("deriv"), s.noisy);
        if (j.contains("deriv_clean")) apply_path(j.at("deriv_clean"), s.clean);
    };
    apply(root);
    if (entry.is_object()) {
        apply(entry);
        if (entry.contains("coefficients"))
            for (const auto& [k, v] : entry.at("coefficients").items()) s.spec.coefficient(k), s.spec.coefficients[k] = v.get<double>();
        read_opt(entry, "substeps", s.spec.substeps);
        if (entry.contains("grid")) s.spec.grid = grid_from_json(entry.at("grid"));
        if (entry.contains("initial_condition")) {
            const auto& ic = entry.at("initial_condition");
            read_opt(ic, "name", s.spec.initial_condition.name);
            if (ic.contains("params"))
                for (const auto& [k, v] : ic.at("params").items())
                    s.spec.initial_condition.params[k] = v.is_array() ? v.get<std::vector<double>>()
                                                                      : std::vector<double>{v.get<double>()};
        }
    }
    return s;
}

} // namespace detail

/// Parses the JSON experiment description. Every problem maps to Errc::Config.
inline ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    try {
        if (!j.is_object()) fail(Errc::Config, "config must be a JSON object");
        if (j.contains("systems")) {
            for (const auto& e : j.at("systems")) c.systems.push_back(detail::system_from_json(e, j));
        } else if (j.contains("system")) {
            c.systems.push_back(detail::system_from_json(j.at("system"), j));
        } else {
            for (auto k : all_system_kinds) c.systems.push_back(detail::system_from_json(json(system_name(k)), j));
        }
        detail::read_opt(j, "noise_levels", c.noise_levels);
        detail::read_opt(j, "seeds", c.seeds);
        detail::read_opt(j, "output_dir", c.output_dir);
        detail::read_opt(j, "workers", c.workers);
        if (j.contains("methods")) {
            const auto m = j.at("methods").get<std::vector<std::string>>();
            c.run_vb = std::find(m.begin(), m.end(), "vb") != m.end();
            c.run_stridge = std::find(m.begin(), m.end(), "stridge") != m.end();
        }
        if (j.contains("vb")) {
            const auto& v = j.at("vb");
            detail::read_opt(v, "v_s", c.vb.v_s);
            detail::read_opt(v, "a_sigma", c.vb.a_sigma);
            detail::read_opt(v, "b_sigma", c.vb.b_sigma);
            detail::read_opt(v, "p0", c.vb.p0);
            detail::read_opt(v, "rho", c.vb.rho);
            detail::read_opt(v, "max_sweeps", c.vb.max_sweeps);
            detail::read_opt(v, "init_retained", c.vb.init_retained);
            detail::read_opt(v, "init_dropped", c.vb.init_dropped);
            if (v.contains("init")) c.vb.init = parse_init_method(v.at("init").get<std::string>());
        }
        if (j.contains("stridge")) {
            const auto& v = j.at("stridge");
            detail::read_opt(v, "lambda", c.stridge.lambda);
            detail::read_opt(v, "tol", c.stridge.tol);
            detail::read_opt(v, "max_iters", c.stridge.max_iters);
            detail::read_opt(v, "tol_search", c.stridge.tol_search);
            detail::read_opt(v, "tol_grid", c.stridge.tol_grid);
            detail::read_opt(v, "l0_penalty", c.stridge.l0_penalty);
            detail::read_opt(v, "validation_stride", c.stridge.validation_stride);
        }
        if (j.contains("report")) {
            const auto& r = j.at("report");
            detail::read_opt(r, "record_timing", c.report.record_timing);
            detail::read_opt(r, "write_models", c.report.write_models);
            detail::read_opt(r, "write_fields", c.report.write_fields);
        }
    } catch (const json::exception& e) {
        fail(Errc::Config, e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::Config) throw;
        fail(Errc::Config, e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        fail(Errc::Config, path.string() + ": " + e.what());
    } catch (const Error& e) {
        fail(Errc::Config, e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- metrics

/// Relative L2 error over the union of identified and true supports.
inline double coefficient_error(const DiscoveredModel& identified, const std::map<std::string, double>& truth)
{
    std::map<BasisTerm, double> est, tru;
    for (auto i : identified.support) est[identified.terms[i]] += identified.mu_hat(static_cast<Eigen::Index>(i));
    for (const auto& [label, v] : truth) {
        const BasisTerm t = parse_term(label);
        if (!identified.terms.empty() && std::find(identified.terms.begin(), identified.terms.end(), t) == identified.terms.end())
            fail(Errc::UnresolvableLabel, "true term '" + label + "' is not in the dictionary");
        tru[t] += v;
    }
    double num = 0.0, den = 0.0;
    std::set<BasisTerm> keys;
    for (const auto& [t, v] : est) keys.insert(t);
    for (const auto& [t, v] : tru) keys.insert(t), den += v * v;
    for (const auto& t : keys) {
        const double a = est.count(t) ? est[t] : 0.0;
        const double b = tru.count(t) ? tru[t] : 0.0;
        num += (a - b) * (a - b);
    }
    require(den > 0.0, Errc::InvalidArgument, "true coefficients are all zero");
    return std::sqrt(num / den);
}

/// Dictionary indices of the true model's terms.
inline std::vector<std::size_t> truth_indices(const std::vector<BasisTerm>& terms, const PdeModel& truth)
{
    std::vector<std::size_t> out;
    for (const auto& mt : truth.terms) {
        const auto it = std::find(terms.begin(), terms.end(), mt.term);
        if (it == terms.end()) fail(Errc::UnresolvableLabel, "true term '" + mt.term.label() + "' is not in the dictionary");
        out.push_back(static_cast<std::size_t>(it - terms.begin()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------- cells

struct ReportRow {
    std::string system;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string method; // "vb" or "stridge"
    std::vector<std::string> support;
    std::vector<std::pair<std::string, std::pair<double, double>>> coeffs; // label -> (mean, std)
    double fpr = std::nan("");
    double fnr = std::nan("");
    double coeff_rel_err = std::nan("");
    int sweeps = 0;
    double wall_ms = 0.0;
    std::string status = "ok";

    bool ok() const noexcept { return status == "ok"; }
};

struct CellResult {
    std::vector<ReportRow> rows;
    std::optional<DiscoveredModel> vb_model;
    int time_order = 1;
    std::optional<Field> noisy_field;
};

inline std::vector<BasisTerm> dictionary_terms(const SystemSettings& s)
{
    return canonical_terms(s.spec.grid.is_2d(), s.max_deriv, s.max_poly);
}

inline RegressionProblem cell_problem(const SystemSettings& s, const Field& noisy, double noise, std::uint64_t seed)
{
    const PathSettings& path = noise > 0.0 ? s.noisy : s.clean;
    RowSelection sel = path.rows;
    sel.seed = seed;
    return build_problem(noisy, dictionary_terms(s), s.spec.true_model().time_order, path.deriv.resolve(noise),
                         path.deriv, sel);
}

/// One (system, noise, seed) job on an already simulated clean field.
/// Errors become rows with an error status.
inline CellResult run_cell(const SystemSettings& s, const Field& clean, double noise, std::uint64_t seed,
                           const ExperimentConfig& cfg, bool keep_field = false)
{
    CellResult out;
    const std::string name = system_name(s.spec.kind);
    const PdeModel truth = s.spec.true_model();
    out.time_order = truth.time_order;
    const auto base_row = [&](const char* method) {
        ReportRow r;
        r.system = name;
        r.noise = noise;
        r.seed = seed;
        r.method = method;
        return r;
    };
    const auto fail_rows = [&](const std::string& what, std::initializer_list<const char*> methods) {
        for (const char* m : methods) {
            ReportRow r = base_row(m);
            r.status = "error: " + what;
            out.rows.push_back(std::move(r));
        }
    };
    std::vector<const char*> methods;
    if (cfg.run_vb) methods.push_back("vb");
    if (cfg.run_stridge) methods.push_back("stridge");

    std::optional<RegressionProblem> prob;
    std::vector<std::size_t> truth_idx;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Field noisy = add_noise(clean, {noise, seed});
        prob = cell_problem(s, noisy, noise, seed);
        truth_idx = truth_indices(prob->dictionary.terms, truth);
        if (keep_field) out.noisy_field = std::move(noisy);
    } catch (const std::exception& e) {
        for (const char* m : methods) fail_rows(e.what(), {m});
        return out;
    }
    const double prep_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const std::size_t K = prob->cols();
    const auto truth_map = truth.coefficient_map();

    if (cfg.run_vb) {
        ReportRow r = base_row("vb");
        const auto t1 = std::chrono::steady_clock::now();
        try {
            VbFit fit = vb_fit(*prob, cfg.vb, cfg.stridge);
            const DiscoveredModel& m = fit.model;
            r.support = m.support_labels();
            for (auto i : m.support)
                r.coeffs.push_back({m.terms[i].label(), {m.mu_hat(static_cast<Eigen::Index>(i)), m.posterior_std(i)}});
            r.fpr = false_positive_rate(m.support, truth_idx, K);
            r.fnr = false_negative_rate(m.support, truth_idx);
            r.coeff_rel_err = coefficient_error(m, truth_map);
            r.sweeps = m.sweeps;
            out.vb_model = std::move(fit.model);
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
        r.wall_ms = prep_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();
        out.rows.push_back(std::move(r));
    }
    if (cfg.run_stridge) {
        ReportRow r = base_row("stridge");
        const auto t1 = std::chrono::steady_clock::now();
        try {
            const StridgeResult sr = stridge(*prob, cfg.stridge);
            DiscoveredModel m;
            m.terms = prob->dictionary.terms;
            m.support = sr.support;
            m.mu_hat = sr.coefficients;
            for (auto i : sr.support) {
                r.support.push_back(m.terms[i].label());
                r.coeffs.push_back({m.terms[i].label(), {sr.coefficients(static_cast<Eigen::Index>(i)), 0.0}});
            }
            r.fpr = false_positive_rate(sr.support, truth_idx, K);
            r.fnr = false_negative_rate(sr.support, truth_idx);
            r.coeff_rel_err = coefficient_error(m, truth_map);
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
        }
        r.wall_ms = prep_ms + std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();
        out.rows.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- report

namespace detail {

inline std::string num(double v)
{
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

} // namespace detail

inline constexpr const char* report_header =
    "system,noise,seed,method,support,coeffs,fpr,fnr,coeff_rel_err,sweeps,wall_ms,status";

/// coeffs holds "label=mean+/-std" entries separated by ';'.
inline std::string report_csv(const std::vector<ReportRow>& rows, bool record_timing)
{
    std::ostringstream os;
    os << report_header << '\n';
    for (const auto& r : rows) {
        std::string support, coeffs;
        for (const auto& l : r.support) support += (support.empty() ? "" : ";") + l;
        for (const auto& [l, ms] : r.coeffs)
            coeffs += (coeffs.empty() ? "" : ";") + l + "=" + detail::num(ms.first) + "+/-" + detail::num(ms.second);
        os << r.system << ',' << detail::num(r.noise) << ',' << r.seed << ',' << r.method << ','
           << detail::csv_escape(support) << ',' << detail::csv_escape(coeffs) << ',' << detail::num(r.fpr) << ','
           << detail::num(r.fnr) << ',' << detail::num(r.coeff_rel_err) << ',' << r.sweeps << ','
           << (record_timing ? detail::num(r.wall_ms) : std::string("NA")) << ',' << detail::csv_escape(r.status)
           << '\n';
    }
    return os.str();
}

/// Mean coefficient error per (system, method, noise), one gnuplot block per
/// system/method pair.
inline std::string error_vs_noise_dat(const std::vector<ReportRow>& rows)
{
    std::map<std::pair<std::string, std::string>, std::map<double, std::pair<double, int>>> acc;
    std::vector<std::pair<std::string, std::string>> order;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.system, r.method);
        if (!acc.count(key)) order.push_back(key);
        auto& cell = acc[key][r.noise];
        if (r.ok() && !std::isnan(r.coeff_rel_err)) cell.first += r.coeff_rel_err, ++cell.second;
    }
    std::ostringstream os;
    for (const auto& key : order) {
        os << "# " << key.first << ' ' << key.second << "\n# noise mean_coeff_rel_err runs\n";
        for (const auto& [noise, c] : acc[key])
            os << detail::num(noise) << ' ' << (c.second ? detail::num(c.first / c.second) : std::string("NA")) << ' '
               << c.second << '\n';
        os << "\n\n";
    }
    return os.str();
}

struct Report {
    std::vector<ReportRow> rows;

    bool all_ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.ok(); });
    }
};

namespace detail {

/// Runs fn(0..n-1) on up to `workers` threads; each index runs exactly once.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn)
{
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline std::string noise_tag(double noise)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", noise * 100.0);
    return buf;
}

} // namespace detail

/// Simulates each system once, runs every (system, noise, seed) cell, and
/// merges rows in config order. With write_outputs the CSV, model files and
/// plot data land under cfg.output_dir.
inline Report run_experiment(const ExperimentConfig& cfg, bool write_outputs = true)
{
    cfg.validate();
    const std::size_t ns = cfg.systems.size();
    std::vector<std::optional<Field>> clean(ns);
    std::vector<std::string> sim_error(ns);
    detail::parallel_for(ns, cfg.workers, [&](std::size_t i) {
        try {
            clean[i] = simulate(cfg.systems[i].spec);
        } catch (const std::exception& e) {
            sim_error[i] = e.what();
        }
    });

    struct Job {
        std::size_t sys;
        double noise;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < ns; ++i)
        for (double n : cfg.noise_levels)
            for (auto s : cfg.seeds) jobs.push_back({i, n, s});

    std::vector<CellResult> results(jobs.size());
    detail::parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
        const Job& job = jobs[j];
        const SystemSettings& s = cfg.systems[job.sys];
        if (!clean[job.sys]) {
            for (const char* m : {"vb", "stridge"}) {
                if ((m[0] == 'v' && !cfg.run_vb) || (m[0] == 's' && !cfg.run_stridge)) continue;
                ReportRow r;
                r.system = system_name(s.spec.kind);
                r.noise = job.noise;
                r.seed = job.seed;
                r.method = m;
                r.status = "error: " + sim_error[job.sys];
                results[j].rows.push_back(std::move(r));
            }
            return;
        }
        results[j] = run_cell(s, *clean[job.sys], job.noise, job.seed, cfg, write_outputs && cfg.report.write_fields);
    });

    // single writer, canonical order
    Report rep;
    for (const auto& r : results)
        for (const auto& row : r.rows) rep.rows.push_back(row);

    if (write_outputs) {
        namespace fs = std::filesystem;
        const fs::path out = cfg.output_dir;
        fs::create_directories(out);
        write_text(out / "report.csv", report_csv(rep.rows, cfg.report.record_timing));
        write_text(out / "error_vs_noise.dat", error_vs_noise_dat(rep.rows));
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            const auto& job = jobs[j];
            const SystemSettings& s = cfg.systems[job.sys];
            const std::string stem = std::string(system_name(s.spec.kind)) + "_noise" + detail::noise_tag(job.noise) +
                                     "_seed" + std::to_string(job.seed);
            if (cfg.report.write_models && results[j].vb_model) {
                json model = model_to_json(*results[j].vb_model, results[j].time_order);
                model["system"] = system_name(s.spec.kind);
                write_text(out / "models" / (stem + ".json"), model.dump(2) + "\n");
            }
            if (results[j].noisy_field) {
                fs::create_directories(out / "fields");
                write_field(out / "fields" / (stem + ".field"), *results[j].noisy_field,
                            header_for(s.spec, {job.noise, job.seed}));
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- prediction

/// The identified equation as a simulable model.
inline PdeModel to_pde_model(const DiscoveredModel& m, int time_order, const Eigen::VectorXd& coefficients)
{
    PdeModel pm;
    pm.time_order = time_order;
    for (auto i : m.support) pm.terms.push_back({m.terms[i], coefficients(static_cast<Eigen::Index>(i))});
    return pm;
}

inline PdeModel to_pde_model(const DiscoveredModel& m, int time_order)
{
    return to_pde_model(m, time_order, m.mu_hat);
}

struct Prediction {
    Field mean;
    Field std;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

/// Monte Carlo resimulation over q(coefficients) restricted to the support.
/// Samples whose simulation blows up are rejected and logged to `log`.
inline Prediction predict_with_uncertainty(const DiscoveredModel& model, const SystemSpec& spec, std::size_t n_samples,
                                           std::uint64_t seed, int time_order = 0, std::ostream* log = &std::cerr)
{
    require(n_samples >= 1, Errc::InvalidArgument, "n_samples must be >= 1");
    require(!model.support.empty(), Errc::InvalidArgument, "model has an empty support");
    if (time_order == 0) time_order = spec.true_model().time_order;
    const auto s = static_cast<Eigen::Index>(model.support.size());
    Eigen::VectorXd mu(s);
    Eigen::MatrixXd cov(s, s);
    for (Eigen::Index a = 0; a < s; ++a) {
        const auto ia = static_cast<Eigen::Index>(model.support[static_cast<std::size_t>(a)]);
        mu(a) = model.mu_hat(ia);
        for (Eigen::Index b = 0; b < s; ++b)
            cov(a, b) = model.Sigma_hat(ia, static_cast<Eigen::Index>(model.support[static_cast<std::size_t>(b)]));
    }
    // symmetric square root with negative eigenvalues clipped (PSD)
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
    const Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const GridSpec& g = spec.grid;
    Prediction out{Field(g), Field(g), 0, 0};
    std::vector<double> m2(g.size(), 0.0);
    auto mean = out.mean.values();
    Eigen::VectorXd full = model.mu_hat;
    for (std::size_t n = 0; n < n_samples; ++n) {
        Eigen::VectorXd z(s);
        for (Eigen::Index a = 0; a < s; ++a) z(a) = normal(rng);
        const Eigen::VectorXd c = mu + root * z;
        for (Eigen::Index a = 0; a < s; ++a) full(static_cast<Eigen::Index>(model.support[static_cast<std::size_t>(a)])) = c(a);
        std::optional<Field> sim;
        try {
            sim = simulate_model(spec, to_pde_model(model, time_order, full));
        } catch (const Error& e) {
            if (e.code() != Errc::StabilityViolation && e.code() != Errc::NumericalBreakdown) throw;
            ++out.rejected;
            if (log) *log << "predict: sample " << n << " rejected (" << e.what() << ")\n";
            continue;
        }
        // Welford update
        const double k = static_cast<double>(++out.accepted);
        const auto v = sim->values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - mean[i];
            mean[i] += d / k;
            m2[i] += d * (v[i] - mean[i]);
        }
    }
    if (2 * out.rejected > n_samples)
        fail(Errc::UnstableSample, std::to_string(out.rejected) + " of " + std::to_string(n_samples) +
                                       " posterior samples blew up");
    auto sd = out.std.values();
    for (std::size_t i = 0; i < sd.size(); ++i)
        sd[i] = out.accepted > 1 ? std::sqrt(m2[i] / static_cast<double>(out.accepted - 1)) : 0.0;
    return out;
}

} // namespace pdesift
