// pdesift command line: simulate, discover, baseline, benchmark, predict.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pdesift/pdesift.hpp"

namespace {

using namespace pdesift;
namespace fs = std::filesystem;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_failed = 2;

// "0,1,2" or "0-4" or a mix
std::vector<std::uint64_t> parse_seeds(const std::string& s)
{
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string part;
    try {
        while (std::getline(ss, part, ',')) {
            if (part.empty()) continue;
            const auto dash = part.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(part));
                continue;
            }
            const auto a = std::stoull(part.substr(0, dash)), b = std::stoull(part.substr(dash + 1));
            if (b < a) fail(Errc::Config, "bad seed range '" + part + "'");
            for (auto v = a; v <= b; ++v) out.push_back(v);
        }
    } catch (const std::logic_error&) {
        fail(Errc::Config, "bad --seeds value '" + s + "'");
    }
    if (out.empty()) fail(Errc::Config, "--seeds is empty");
    return out;
}

std::vector<double> parse_levels(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string part;
    try {
        while (std::getline(ss, part, ','))
            if (!part.empty()) out.push_back(std::stod(part));
    } catch (const std::logic_error&) {
        fail(Errc::Config, "bad --noise value '" + s + "'");
    }
    if (out.empty()) fail(Errc::Config, "--noise is empty");
    return out;
}

struct Common {
    std::string config;
    std::string out;
    std::string seeds;
    std::string noise;
    std::string system;
    unsigned workers = 0;
};

ExperimentConfig make_config(const Common& o)
{
    ExperimentConfig cfg;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
    } else {
        for (auto k : all_system_kinds) cfg.systems.push_back(default_settings(k));
    }
    if (!o.system.empty()) {
        const auto kind = parse_system_kind(o.system);
        std::vector<SystemSettings> keep;
        for (auto& s : cfg.systems)
            if (s.spec.kind == kind) keep.push_back(s);
        if (keep.empty()) keep.push_back(default_settings(kind));
        cfg.systems = std::move(keep);
    }
    if (!o.seeds.empty()) cfg.seeds = parse_seeds(o.seeds);
    if (!o.noise.empty()) cfg.noise_levels = parse_levels(o.noise);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.workers > 0) cfg.workers = o.workers;
    cfg.validate();
    return cfg;
}

int run_sweep(const Common& o, bool vb, bool st)
{
    ExperimentConfig cfg = make_config(o);
    cfg.run_vb = vb;
    cfg.run_stridge = st;
    const Report rep = run_experiment(cfg);
    std::size_t failed = 0;
    for (const auto& r : rep.rows) {
        if (!r.ok()) ++failed;
        std::printf("%-8s noise=%-5g seed=%-3llu %-8s fpr=%-8s fnr=%-6s err=%-10s %s\n", r.system.c_str(), r.noise,
                    static_cast<unsigned long long>(r.seed), r.method.c_str(), detail::num(r.fpr).c_str(),
                    detail::num(r.fnr).c_str(), detail::num(r.coeff_rel_err).c_str(), r.status.c_str());
    }
    std::printf("report: %s\n", (fs::path(cfg.output_dir) / "report.csv").string().c_str());
    if (failed) {
        std::fprintf(stderr, "%zu row(s) failed\n", failed);
        return exit_failed;
    }
    return exit_ok;
}

/// Discovery on a stored snapshot rather than a fresh simulation.
int discover_field(const Common& o, const std::string& field_path)
{
    const auto loaded = read_field(field_path);
    ExperimentConfig cfg = make_config([&] {
        Common c = o;
        if (c.system.empty()) c.system = loaded.header.kind;
        return c;
    }());
    const SystemSettings& s = cfg.systems.front();
    const double noise = loaded.header.noise.level;
    const auto prob = cell_problem(s, loaded.field, noise, cfg.seeds.front());
    const VbFit fit = vb_fit(prob, cfg.vb, cfg.stridge);
    const int order = s.spec.true_model().time_order;
    std::cout << to_pde_model(fit.model, order).to_string() << '\n';
    for (auto i : fit.model.support)
        std::printf("  %-12s mean=%-12.6g std=%-12.6g pip=%.4f\n", fit.model.terms[i].label().c_str(),
                    fit.model.mu_hat(static_cast<Eigen::Index>(i)), fit.model.posterior_std(i),
                    fit.model.pip(static_cast<Eigen::Index>(i)));
    if (!o.out.empty()) {
        json j = model_to_json(fit.model, order);
        j["system"] = system_name(s.spec.kind); // lets predict find its solver
        write_text(fs::path(o.out), j.dump(2) + "\n");
    }
    return exit_ok;
}

int run_simulate(const Common& o, std::uint64_t seed, bool dat)
{
    if (o.system.empty()) fail(Errc::Config, "simulate needs --system");
    if (o.out.empty()) fail(Errc::Config, "simulate needs --out");
    const ExperimentConfig cfg = make_config(o);
    const SystemSpec& spec = cfg.systems.front().spec;
    const double level = o.noise.empty() ? 0.0 : parse_levels(o.noise).front();
    const NoiseSpec noise{level, seed};
    const Field f = add_noise(simulate(spec), noise);
    const fs::path out = o.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_field(out, f, header_for(spec, noise));
    if (dat) write_field_dat(fs::path(out).replace_extension(".dat"), f);
    return exit_ok;
}

int run_predict(const Common& o, const std::string& model_path, std::size_t samples, std::uint64_t seed)
{
    if (model_path.empty()) fail(Errc::Config, "predict needs --model");
    json j;
    try {
        j = json::parse(read_text(model_path));
    } catch (const json::exception& e) {
        fail(Errc::Config, model_path + ": " + e.what());
    }
    Common c = o;
    if (c.system.empty() && c.config.empty()) c.system = j.value("system", std::string{});
    if (c.system.empty() && c.config.empty()) fail(Errc::Config, "predict needs --system or --config");
    const ExperimentConfig cfg = make_config(c);
    const SystemSpec& spec = cfg.systems.front().spec;
    const auto [model, order] = model_from_json(j);
    const Prediction p = predict_with_uncertainty(model, spec, samples, seed, order);
    const fs::path out = o.out.empty() ? fs::path("prediction") : fs::path(o.out);
    fs::create_directories(out);
    const auto header = header_for(spec, {});
    write_field(out / "mean.field", p.mean, header);
    write_field(out / "std.field", p.std, header);
    write_field_dat(out / "mean.dat", p.mean);
    write_field_dat(out / "std.dat", p.std);
    std::printf("%zu samples accepted, %zu rejected; output in %s\n", p.accepted, p.rejected, out.string().c_str());
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse Bayesian discovery of PDEs from snapshot data"};
    app.require_subcommand(1);
    Common o;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment JSON file");
        sub->add_option("--out", o.out, "output directory (file for simulate)");
        sub->add_option("--seeds", o.seeds, "seed list, e.g. 0,1,2 or 0-4");
        sub->add_option("--noise", o.noise, "noise level(s) as fractions, comma separated");
        sub->add_option("--workers", o.workers, "concurrent cells");
        sub->add_option("--system", o.system, "restrict to one system");
    };
    auto* sim = app.add_subcommand("simulate", "simulate one system and store the snapshot field");
    auto* disc = app.add_subcommand("discover", "variational spike-and-slab discovery");
    auto* base = app.add_subcommand("baseline", "STRidge baseline");
    auto* bench = app.add_subcommand("benchmark", "both methods over all systems, noise levels and seeds");
    auto* pred = app.add_subcommand("predict", "resimulate a discovered model with predictive uncertainty");
    for (auto* s : {sim, disc, base, bench, pred}) add_common(s);

    std::uint64_t seed = 0;
    bool dat = false;
    sim->add_option("--seed", seed, "noise seed");
    sim->add_flag("--dat", dat, "also write a gnuplot .dat next to the field");
    std::string field_path;
    disc->add_option("--field", field_path, "discover from a stored snapshot file");
    std::string model_path;
    std::size_t samples = 50;
    std::uint64_t pred_seed = 0;
    pred->add_option("--model", model_path, "model JSON written by discover/benchmark");
    pred->add_option("--samples", samples, "posterior samples");
    pred->add_option("--seed", pred_seed, "sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        if (*sim) return run_simulate(o, seed, dat);
        if (*disc) return field_path.empty() ? run_sweep(o, true, false) : discover_field(o, field_path);
        if (*base) return run_sweep(o, false, true);
        if (*bench) return run_sweep(o, true, true);
        if (*pred) return run_predict(o, model_path, samples, pred_seed);
    } catch (const Error& e) {
        std::cerr << "pdesift: " << e.what() << '\n';
        return e.code() == Errc::Config ? exit_config : exit_failed;
    } catch (const std::exception& e) {
        std::cerr << "pdesift: " << e.what() << '\n';
        return exit_failed;
    }
    return exit_ok;
}
