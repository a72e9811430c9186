#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "pdesift/pdesift.hpp"

using namespace pdesift;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pdesift_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(p.parent_path());
    return p;
}

// single heat mode on a coarse grid so that many resimulations stay cheap
SystemSpec small_heat()
{
    SystemSpec s = preset(SystemKind::Heat1D);
    s.grid = detail::grid_1d(21, 0.0, 1.0, false, 5e-4, 0.2);
    s.initial_condition = {"sine_modes", {{"amplitudes", {1.0}}}};
    return s;
}

DiscoveredModel scalar_model(const std::string& label, double mean, double sd)
{
    DiscoveredModel m;
    m.terms = {parse_term("u_x"), parse_term(label)};
    m.pip = Eigen::Vector2d(0.0, 1.0);
    m.support = {1};
    m.mu_hat = Eigen::Vector2d(0.0, mean);
    m.Sigma_hat = Eigen::Matrix2d::Zero();
    m.Sigma_hat(1, 1) = sd * sd;
    m.converged = true;
    return m;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(PDESIFT_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.systems = {default_settings(SystemKind::Heat1D), default_settings(SystemKind::Wave1D)};
    c.noise_levels = {0.0, 0.02};
    c.seeds = {0, 1};
    return c;
}

} // namespace

// ---------------------------------------------------------------- io

TEST(Io, FieldRoundTrip1D)
{
    const SystemSpec spec = small_heat();
    const Field f = add_noise(simulate(spec), {0.01, 2});
    const auto path = scratch("heat.field");
    write_field(path, f, header_for(spec, {0.01, 2}));
    const auto back = read_field(path);
    EXPECT_EQ(back.header.kind, "heat1d");
    EXPECT_EQ(back.header.noise.seed, 2u);
    EXPECT_DOUBLE_EQ(back.header.noise.level, 0.01);
    EXPECT_DOUBLE_EQ(back.header.coefficients.at("alpha"), 2.0);
    EXPECT_EQ(back.field.grid().nx, f.grid().nx);
    EXPECT_FALSE(back.field.grid().is_2d());
    EXPECT_TRUE(std::equal(f.values().begin(), f.values().end(), back.field.values().begin()));
    // header line, then exactly the raw values
    EXPECT_EQ(fs::file_size(path), read_text(path).find('\n') + 1 + f.values().size() * sizeof(double));
}

TEST(Io, FieldRoundTrip2D)
{
    GridSpec g;
    g.nx = 4;
    g.ny = 3;
    g.nt = 3;
    g.dx = 0.5;
    g.dy = 0.25;
    g.dt = 0.1;
    g.y0 = -1.0;
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * static_cast<double>(i) - 3.0;
    const Field f(g, v);
    const auto path = scratch("two.field");
    write_field(path, f, {g, "heat2d", {}, {}});
    const auto back = read_field(path);
    ASSERT_TRUE(back.field.grid().is_2d());
    EXPECT_EQ(*back.field.grid().ny, 3u);
    EXPECT_DOUBLE_EQ(back.field.grid().y0, -1.0);
    EXPECT_DOUBLE_EQ(back.field(1, 2, 1), f(1, 2, 1));
}

TEST(Io, RejectsDamagedFiles)
{
    const SystemSpec spec = small_heat();
    const Field f = simulate(spec);
    const auto path = scratch("cut.field");
    write_field(path, f, header_for(spec, {}));
    fs::resize_file(path, fs::file_size(path) - 8);
    try {
        read_field(path);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Io);
    }
    write_text(path, "{\"format\":\"other\"}\n");
    EXPECT_THROW(read_field(path), Error);
    write_text(path, "not json\n");
    EXPECT_THROW(read_field(path), Error);
    EXPECT_THROW(read_field(scratch("missing.field")), Error);
}

TEST(Io, ModelJsonRoundTrip)
{
    const Field f = simulate(preset(SystemKind::Burgers));
    RowSelection sel;
    sel.max_rows = 2000;
    const auto prob = build_problem(f, canonical_terms(false, 3, 2), 1, DerivMethod::CentralFD2, {}, sel);
    const DiscoveredModel m = vb_fit(prob, {}).model;
    const json j = model_to_json(m, 1);
    EXPECT_EQ(j["support"], json({"u_xx", "u*u_x"}));
    const auto [back, order] = model_from_json(json::parse(j.dump()));
    EXPECT_EQ(order, 1);
    EXPECT_EQ(back.support, m.support);
    EXPECT_EQ(back.terms, m.terms);
    for (auto i : m.support)
        for (auto k : m.support)
            EXPECT_DOUBLE_EQ(back.Sigma_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)),
                             m.Sigma_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    EXPECT_EQ(back.mu_hat, m.mu_hat);
    EXPECT_EQ(back.pip, m.pip);
    EXPECT_EQ(back.elbo_trace, m.elbo_trace);
    json bad = j;
    bad["support"] = json({"u_xxxxxxx"});
    try {
        model_from_json(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnresolvableLabel);
    }
}

TEST(Io, DatFileHasOneBlockPerSnapshot)
{
    const SystemSpec spec = small_heat();
    const Field f = simulate(spec);
    const auto path = scratch("heat.dat");
    write_field_dat(path, f);
    std::ifstream in(path);
    std::string line;
    std::size_t data = 0, blank = 0;
    std::getline(in, line);
    EXPECT_EQ(line, "# t x u");
    while (std::getline(in, line)) (line.empty() ? blank : data)++;
    EXPECT_EQ(data, f.grid().size());
    EXPECT_EQ(blank, f.grid().nt);
}

// ---------------------------------------------------------------- metrics

TEST(CoefficientError, ReferenceValues)
{
    EXPECT_DOUBLE_EQ(coefficient_error(scalar_model("u_xx", 2.0, 0.0), {{"u_xx", 2.0}}), 0.0);
    EXPECT_NEAR(coefficient_error(scalar_model("u_xx", 2.001, 0.0), {{"u_xx", 2.0}}), 5e-4, 1e-12);

    DiscoveredModel kdv;
    kdv.terms = {parse_term("u_x"), parse_term("u*u_x"), parse_term("u_xxx")};
    kdv.support = {1, 2};
    kdv.mu_hat = Eigen::Vector3d(0.0, -5.908, -1.05);
    kdv.Sigma_hat = Eigen::Matrix3d::Zero();
    EXPECT_NEAR(coefficient_error(kdv, {{"u*u_x", -6.0}, {"u_xxx", -1.0}}), 0.0172, 5e-5);

    // a missed term counts fully, a spurious one by its magnitude
    kdv.support = {0, 1};
    kdv.mu_hat = Eigen::Vector3d(0.6, -6.0, 0.0);
    EXPECT_NEAR(coefficient_error(kdv, {{"u*u_x", -6.0}, {"u_xxx", -1.0}}),
                std::sqrt(0.36 + 1.0) / std::sqrt(37.0), 1e-12);
}

TEST(CoefficientError, UnresolvableLabels)
{
    const auto m = scalar_model("u_xx", 2.0, 0.0);
    for (const char* bad : {"u_xxxx", "alpha", "u*"}) {
        try {
            coefficient_error(m, {{bad, 1.0}});
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::UnresolvableLabel) << bad;
        }
    }
}

TEST(CoefficientError, TracksFieldRescaling)
{
    // u -> c u leaves the linear heat coefficient unchanged
    const SystemSpec spec = preset(SystemKind::Heat1D);
    Field f = simulate(spec);
    for (double& v : f.values()) v *= 7.5;
    RowSelection sel;
    sel.max_rows = 3000;
    const auto prob = build_problem(f, canonical_terms(false, 6, 6), 1, DerivMethod::CentralFD2, {}, sel);
    const auto m = vb_fit(prob, {}).model;
    EXPECT_EQ(m.support_labels(), std::vector<std::string>{"u_xx"});
    EXPECT_LT(coefficient_error(m, {{"u_xx", 2.0}}), 5e-3);
}

// ---------------------------------------------------------------- prediction

TEST(Predict, DegeneratePosteriorGivesZeroSpread)
{
    const SystemSpec spec = small_heat();
    const auto m = scalar_model("u_xx", 2.0, 0.0);
    const Prediction p = predict_with_uncertainty(m, spec, 5, 1);
    const Field det = simulate_model(spec, to_pde_model(m, 1));
    EXPECT_EQ(p.accepted, 5u);
    for (double v : p.std.values()) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(std::equal(det.values().begin(), det.values().end(), p.mean.values().begin()));
}

TEST(Predict, Heat1DMeanMatchesAnalyticSolution)
{
    const SystemSpec spec = preset(SystemKind::Heat1D);
    const Field data = simulate(spec);
    const auto cfg = default_settings(SystemKind::Heat1D);
    const auto prob = cell_problem(cfg, data, 0.0, 0);
    const DiscoveredModel m = vb_fit(prob, {}).model;
    ASSERT_EQ(m.support_labels(), std::vector<std::string>{"u_xx"});
    const Prediction p = predict_with_uncertainty(m, spec, 8, 3);
    const auto& g = spec.grid;
    const std::vector<double> amps{1.0, 0.5, 0.25, 0.125, 0.0625};
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < g.nt; ++t)
        for (std::size_t i = 0; i < g.nx; ++i) {
            const double ref = oracle::heat_modes(amps, 2.0, 1.0, g.x(i), g.t(t));
            num += (p.mean(t, i) - ref) * (p.mean(t, i) - ref);
            den += ref * ref;
        }
    EXPECT_LT(std::sqrt(num / den), 0.02);
    double spread = 0.0;
    for (double v : p.std.values()) spread = std::max(spread, v);
    EXPECT_GT(spread, 0.0);
}

// std of exp(-a c) sin(pi x) for a ~ N(mu, s^2), c = pi^2 t
TEST(Predict, SpreadConvergesAtMonteCarloRate)
{
    const SystemSpec spec = small_heat();
    const double mu = 2.0, sd = 0.05;
    const auto m = scalar_model("u_xx", mu, sd);
    const auto& g = spec.grid;
    const auto exact_std = [&](std::size_t t, std::size_t i) {
        const double c = std::numbers::pi * std::numbers::pi * g.t(t);
        const double mean_exp = std::exp(-mu * c + 0.5 * c * c * sd * sd);
        return mean_exp * std::sqrt(std::exp(c * c * sd * sd) - 1.0) * std::abs(std::sin(std::numbers::pi * g.x(i)));
    };
    std::vector<double> err;
    for (std::size_t n : {50, 200, 800}) {
        double acc = 0.0;
        std::size_t cnt = 0;
        // average over a few independent streams to tame the estimate itself
        for (std::uint64_t rep = 0; rep < 4; ++rep) {
            const Prediction p = predict_with_uncertainty(m, spec, n, 1000 * rep + n);
            for (std::size_t t = g.nt / 4; t < g.nt; t += g.nt / 8)
                for (std::size_t i = 2; i + 2 < g.nx; i += 3) {
                    const double e = exact_std(t, i);
                    acc += (p.std(t, i) - e) * (p.std(t, i) - e) / (e * e);
                    ++cnt;
                }
        }
        err.push_back(std::sqrt(acc / static_cast<double>(cnt)));
    }
    // quadrupling n should halve the error; accept within a factor of 3
    for (std::size_t k = 0; k + 1 < err.size(); ++k) {
        const double ratio = err[k] / err[k + 1];
        EXPECT_GT(ratio, 2.0 / 3.0) << k;
        EXPECT_LT(ratio, 6.0) << k;
    }
}

TEST(Predict, RejectsBlowUpsAndFailsWhenMostDo)
{
    const SystemSpec spec = small_heat();
    std::ostringstream log;
    // about a third of the draws are backward heat equations
    const Prediction p = predict_with_uncertainty(scalar_model("u_xx", 0.5, 1.2), spec, 30, 5, 1, &log);
    EXPECT_GT(p.rejected, 0u);
    EXPECT_EQ(p.accepted + p.rejected, 30u);
    EXPECT_NE(log.str().find("rejected"), std::string::npos);
    try {
        predict_with_uncertainty(scalar_model("u_xx", -1.0, 0.5), spec, 20, 5, 1, &log);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::UnstableSample);
    }
}

// ---------------------------------------------------------------- experiment

TEST(Experiment, WorkerCountDoesNotChangeTheReport)
{
    auto c = small_config();
    c.workers = 1;
    const std::string a = report_csv(run_experiment(c, false).rows, false);
    c.workers = 3;
    const std::string b = report_csv(run_experiment(c, false).rows, false);
    EXPECT_EQ(a, b);
    // canonical order: system, noise, seed, method
    std::istringstream is(a);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, report_header);
    std::getline(is, line);
    EXPECT_EQ(line.rfind("heat1d,0,0,vb,u_xx,u_xx=", 0), 0u) << line;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("heat1d,0,0,stridge,u_xx,", 0), 0u) << line;
}

TEST(Experiment, FailuresBecomeRows)
{
    auto c = small_config();
    c.noise_levels = {0.0, 0.01};
    c.seeds = {0};
    c.systems[0].noisy.deriv.window = 999; // longer than the axis
    const Report r = run_experiment(c, false);
    ASSERT_EQ(r.rows.size(), 8u);
    EXPECT_FALSE(r.all_ok());
    int errors = 0;
    for (const auto& row : r.rows) {
        if (row.ok()) continue;
        ++errors;
        EXPECT_EQ(row.system, "heat1d");
        EXPECT_EQ(row.noise, 0.01);
        EXPECT_NE(row.status.find("WindowTooLarge"), std::string::npos);
    }
    EXPECT_EQ(errors, 2);
}

TEST(Experiment, WritesArtifacts)
{
    auto c = small_config();
    c.systems.resize(1);
    c.noise_levels = {0.0};
    c.seeds = {3};
    c.report.write_fields = true;
    c.output_dir = scratch("artifacts").string();
    run_experiment(c);
    const fs::path out = c.output_dir;
    EXPECT_TRUE(fs::exists(out / "report.csv"));
    EXPECT_TRUE(fs::exists(out / "error_vs_noise.dat"));
    ASSERT_TRUE(fs::exists(out / "models" / "heat1d_noise0_seed3.json"));
    EXPECT_TRUE(fs::exists(out / "fields" / "heat1d_noise0_seed3.field"));
    const auto [m, order] = model_from_json(json::parse(read_text(out / "models" / "heat1d_noise0_seed3.json")));
    EXPECT_EQ(order, 1);
    EXPECT_EQ(m.support_labels(), std::vector<std::string>{"u_xx"});
}

TEST(Experiment, ReportCsvFormatting)
{
    ReportRow r;
    r.system = "kdv";
    r.noise = 0.02;
    r.seed = 4;
    r.method = "vb";
    r.support = {"u*u_x", "u_xxx"};
    r.coeffs = {{"u*u_x", {-6.0, 0.01}}, {"u_xxx", {-1.0, 0.002}}};
    r.fpr = 0.0;
    r.fnr = 0.0;
    r.coeff_rel_err = 0.0123456789;
    r.sweeps = 7;
    r.wall_ms = 12.5;
    const std::string csv = report_csv({r}, false);
    EXPECT_EQ(csv.substr(csv.find('\n') + 1),
              "kdv,0.02,4,vb,u*u_x;u_xxx,u*u_x=-6+/-0.01;u_xxx=-1+/-0.002,0,0,0.0123457,7,NA,ok\n");
    EXPECT_NE(report_csv({r}, true).find(",12.5,ok"), std::string::npos);
    r.status = "error: a, b";
    EXPECT_NE(report_csv({r}, false).find("\"error: a, b\""), std::string::npos);
}

TEST(Config, ParsesOverridesAndDefaults)
{
    const json j = json::parse(R"({
        "systems": ["heat1d", {"name": "kdv", "deriv": {"window": 21, "min_amplitude": 0.2},
                               "dict": {"max_deriv": 4}}],
        "noise_levels": [0, 0.05],
        "seeds": [3, 4],
        "vb": {"p0": 0.2, "init": "ridge"},
        "stridge": {"l0_penalty": 0.01},
        "dict": {"subsample": 1000},
        "workers": 2,
        "report": {"record_timing": true}
    })");
    const ExperimentConfig c = config_from_json(j);
    ASSERT_EQ(c.systems.size(), 2u);
    EXPECT_EQ(c.systems[0].spec.kind, SystemKind::Heat1D);
    EXPECT_EQ(c.systems[1].noisy.deriv.window, 21);
    EXPECT_EQ(c.systems[1].noisy.rows.min_amplitude, 0.2);
    EXPECT_EQ(c.systems[1].max_deriv, 4);
    EXPECT_EQ(c.systems[0].max_deriv, 6);
    EXPECT_EQ(c.systems[0].clean.rows.max_rows, 1000u);
    EXPECT_EQ(c.noise_levels, (std::vector<double>{0.0, 0.05}));
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4}));
    EXPECT_EQ(c.vb.p0, 0.2);
    EXPECT_EQ(c.vb.init, InitMethod::Ridge);
    EXPECT_EQ(c.stridge.l0_penalty, 0.01);
    EXPECT_EQ(c.workers, 2u);
    EXPECT_TRUE(c.report.record_timing);

    const ExperimentConfig all = config_from_json(json::object());
    EXPECT_EQ(all.systems.size(), 6u);
    EXPECT_EQ(all.noise_levels, (std::vector<double>{0.0, 0.01, 0.02, 0.05}));
}

TEST(Config, ErrorsMapToConfigCode)
{
    for (const char* text : {R"({"system": "navier"})", R"({"seeds": []})", R"({"noise_levels": [-0.1]})",
                             R"({"vb": {"p0": 2}})", R"({"seeds": "x"})", R"([1, 2])",
                             R"({"deriv": {"method": "spline"}})", R"({"vb": {"init": "lasso"}})",
                             R"({"deriv": {"min_amplitude": 1.5}})"}) {
        try {
            config_from_json(json::parse(text));
            FAIL() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::Config) << text;
        }
    }
    try {
        load_config(scratch("nope.json"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::Config);
    }
}

// ---------------------------------------------------------------- cli

TEST(Cli, ExitCodes)
{
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    write_text(dir / "bad.json", "{\"system\": \"navier\"}");
    EXPECT_EQ(run_cli("benchmark --config " + (dir / "bad.json").string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("simulate --system heat1d"), 1); // no --out

    write_text(dir / "broken.json",
               R"({"system": {"name": "heat1d", "deriv": {"window": 999}}, "noise_levels": [0.01], "seeds": [0]})");
    EXPECT_EQ(run_cli("discover --config " + (dir / "broken.json").string() + " --out " + (dir / "b").string()), 2);

    const auto field = dir / "w.field";
    EXPECT_EQ(run_cli("simulate --system wave1d --noise 0.01 --seed 2 --dat --out " + field.string()), 0);
    const auto loaded = read_field(field);
    EXPECT_EQ(loaded.header.kind, "wave1d");
    EXPECT_TRUE(fs::exists(dir / "w.dat"));
    EXPECT_EQ(run_cli("discover --field " + field.string() + " --out " + (dir / "w.json").string()), 0);
    const auto [m, order] = model_from_json(json::parse(read_text(dir / "w.json")));
    EXPECT_EQ(order, 2);
    EXPECT_EQ(m.support_labels(), std::vector<std::string>{"u_xx"});
    EXPECT_EQ(json::parse(read_text(dir / "w.json")).at("system"), "wave1d");

    write_text(dir / "small.json", R"({"system": "heat1d", "noise_levels": [0], "seeds": [0]})");
    EXPECT_EQ(run_cli("baseline --config " + (dir / "small.json").string() + " --out " + (dir / "s").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "s" / "report.csv"));
    EXPECT_EQ(run_cli("discover --config " + (dir / "small.json").string() + " --out " + (dir / "d").string()), 0);
    // the model file names its system, so --system may be left out
    EXPECT_EQ(run_cli("predict --samples 4 --model " + (dir / "d" / "models" / "heat1d_noise0_seed0.json").string() +
                      " --out " + (dir / "p").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "p" / "std.dat"));
    EXPECT_EQ(read_field(dir / "p" / "mean.field").field.grid().nx, 44u);
}
