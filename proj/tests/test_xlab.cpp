#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "shearmix/experiment.hpp"

using namespace shearmix;
using Catch::Approx;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("fit_power_law: exact data and error reporting") {
    std::vector<double> xs = {1.0, 2.0, 4.0, 8.0, 16.0};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 * std::pow(x, 2.5));
    RateFit f = fit_power_law(xs, ys);
    CHECK(f.exponent == Approx(2.5).epsilon(1e-12));
    CHECK(f.prefactor == Approx(3.0).epsilon(1e-10));
    CHECK(f.residual_rms < 1e-12);
    CHECK(f.exponent_stderr < 1e-12);
    CHECK(f.n_points == 5);
    CHECK(f.x_lo == Approx(1.0));
    CHECK(f.x_hi == Approx(16.0));
    CHECK(f.evaluate(4.0) == Approx(3.0 * 32.0).epsilon(1e-10));
    auto [lo, hi] = f.exponent_ci();
    CHECK(lo <= 2.5);
    CHECK(hi >= 2.5);
}

TEST_CASE("fit_power_law: noisy data recovers the slope within the CI") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<double> xs, ys;
    for (int i = 0; i < 40; ++i) {
        double x = std::pow(10.0, double(i) / 13.0);
        xs.push_back(x);
        ys.push_back(0.7 * std::pow(x, -1.3) * std::exp(noise(rng)));
    }
    RateFit f = fit_power_law(xs, ys);
    CHECK(f.exponent == Approx(-1.3).margin(0.05));
    auto [lo, hi] = f.exponent_ci();
    CHECK(lo <= -1.3);
    CHECK(hi >= -1.3);
    CHECK(f.residual_rms < 0.1);
}

TEST_CASE("fit_power_law: rejections and the window overload") {
    std::vector<double> xs = {1.0, 2.0, 4.0, 8.0};
    std::vector<double> ys = {1.0, 1.0, 1.0, 1.0};
    CHECK(fit_power_law(xs, ys).exponent == Approx(0.0).margin(1e-14));

    CHECK_THROWS_AS(fit_power_law({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law(xs, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({1.0, 2.0, -3.0, 4.0}, ys), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law(xs, {1.0, 0.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_power_law({2.0, 2.0, 2.0, 2.0}, ys), std::invalid_argument);

    std::vector<double> wx = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
    std::vector<double> wy = {100.0, 4.0, 16.0, 64.0, 256.0, 1024.0};  // outlier at x=1
    RateFit w = fit_power_law(wx, wy, 2.0, 32.0);
    CHECK(w.n_points == 5);
    CHECK(w.exponent == Approx(2.0).epsilon(1e-10));
    CHECK_THROWS_AS(fit_power_law(wx, wy, 30.0, 32.0), std::invalid_argument);  // < 4 kept
}

TEST_CASE("flow CSV round-trip is bit-exact") {
    FlowParams fp(3, 5);
    PiecewiseLinearFlow u3 = build(fp, 3);
    std::stringstream ss;
    export_flow_csv(u3, ss);
    std::string first_line;
    {
        std::stringstream probe(ss.str());
        std::getline(probe, first_line);
    }
    CHECK(first_line.rfind("# {", 0) == 0);  // JSON header comment

    PiecewiseLinearFlow back = import_flow_csv(ss);
    REQUIRE(back.size() == u3.size());
    CHECK(back.level() == 3);
    CHECK(back.params().p == 3);
    CHECK(back.params().q == 5);
    for (std::int64_t j = 0; j < u3.size(); ++j)
        CHECK(back.scaled_value(j) == u3.scaled_value(j));

    // exporting the re-imported flow reproduces the same bytes
    std::stringstream ss2;
    export_flow_csv(back, ss2);
    std::stringstream ss3;
    export_flow_csv(u3, ss3);
    CHECK(ss2.str() == ss3.str());

    std::stringstream bad("not a header\nj,y,u\n");
    CHECK_THROWS_AS(import_flow_csv(bad), std::runtime_error);
    std::stringstream truncated(
        "# {\"p\":3,\"q\":3,\"m\":1,\"alpha\":0.5,\"ell_m\":0.1,\"s_m\":1.0}\nj,y,u\n0,-3.14,0\n");
    CHECK_THROWS_AS(import_flow_csv(truncated), std::runtime_error);
}

TEST_CASE("ExperimentConfig::from_json validation") {
    nlohmann::json ok = {{"kind", "mixing"}, {"p", 3}, {"q", 3}};
    CHECK_NOTHROW(ExperimentConfig::from_json(ok));

    nlohmann::json even_p = {{"kind", "mixing"}, {"p", 4}};
    try {
        ExperimentConfig::from_json(even_p);
        FAIL("expected a schema error");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("odd") != std::string::npos);  // names the violated constraint
        CHECK(msg.find("4") != std::string::npos);
    }
    CHECK_THROWS_AS(ExperimentConfig::from_json({{"kind", "no-such-kind"}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::from_json({{"p", 3}}), std::invalid_argument);
    CHECK_THROWS_AS(ExperimentConfig::from_json({{"kind", "mixing"}, {"k", 0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json({{"kind", "mixing"}, {"t_min", 9.0}, {"t_max", 3.0}}),
        std::invalid_argument);

    // per-kind defaults: the oscillatory bound sweeps a much longer t range
    ExperimentConfig osc = ExperimentConfig::from_json({{"kind", "oscillatory-bound"}});
    CHECK(osc.t_min == Approx(1.0));
    CHECK(osc.t_max == Approx(1e4));
    CHECK(osc.n_t == 200);
    ExperimentConfig mix = ExperimentConfig::from_json({{"kind", "mixing"}});
    CHECK(mix.t_min == Approx(5.0));
    CHECK(mix.t_max == Approx(100.0));
}

TEST_CASE("worker_count respects the environment override") {
    setenv("SHEARMIX_WORKERS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("SHEARMIX_WORKERS", "not-a-number", 1);
    CHECK(worker_count() >= 1);
    unsetenv("SHEARMIX_WORKERS");
    CHECK(worker_count() >= 1);
}

TEST_CASE("parallel_for: deterministic slots and exception propagation") {
    std::vector<std::int64_t> out(1000, -1);
    parallel_for(1000, [&](std::int64_t i) { out[std::size_t(i)] = i * i; });
    for (std::int64_t i = 0; i < 1000; ++i) CHECK(out[std::size_t(i)] == i * i);
    CHECK_THROWS_AS(parallel_for(8,
                                 [&](std::int64_t i) {
                                     if (i == 5) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("run(mixing): reproducible outputs with the documented layout") {
    namespace fs = std::filesystem;
    fs::path dir1 = fs::temp_directory_path() / "shearmix_xlab_a";
    fs::path dir2 = fs::temp_directory_path() / "shearmix_xlab_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    ExperimentConfig cfg;
    cfg.kind = "mixing";
    cfg.m = 2;
    cfg.t_min = 5.0;
    cfg.t_max = 50.0;
    cfg.n_t = 8;
    cfg.out_dir = dir1.string();
    ExperimentResult r1 = run(cfg);
    cfg.out_dir = dir2.string();
    ExperimentResult r2 = run(cfg);

    // identical configs => byte-identical CSV
    std::string csv1 = slurp(r1.csv_path);
    CHECK(csv1 == slurp(r2.csv_path));
    CHECK(csv1 == r1.csv);
    CHECK(csv1.rfind("t,norm,k,norm_k\n", 0) == 0);

    nlohmann::json summary = nlohmann::json::parse(slurp(r1.json_path));
    CHECK(summary.at("experiment") == "mixing");
    CHECK(summary.at("predicted").get<double>() == Approx(-1.0));
    CHECK(summary.contains("slope"));
    CHECK(summary.contains("passed"));

    std::string manifest = slurp(r1.manifest_path);
    CHECK(manifest.find("config_hash=") != std::string::npos);
    CHECK(manifest.find("version=" SHEARMIX_VERSION) != std::string::npos);
    CHECK(manifest.find("wall_time_s=") != std::string::npos);
    // the hash covers the config, so the two runs differ only in out_dir
    std::string m2 = slurp(r2.manifest_path);
    CHECK(manifest.substr(0, manifest.find('\n')) != m2.substr(0, m2.find('\n')));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("run: error wrapping names the experiment") {
    ExperimentConfig cfg;
    cfg.kind = "omega1";
    cfg.m = 1;
    cfg.delta_grid = {0.001, 0.01, 0.1, 0.5};  // under-resolved at m = 1
    cfg.out_dir = (std::filesystem::temp_directory_path() / "shearmix_xlab_err").string();
    try {
        run(cfg);
        FAIL("expected failure");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("omega1") != std::string::npos);
        CHECK(msg.find("minimal admissible m") != std::string::npos);
    }
}

TEST_CASE("predictions in summaries are derived from (p, q) at runtime") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "shearmix_xlab_pred";
    fs::remove_all(dir);
    ExperimentConfig cfg;
    cfg.kind = "fast-times";
    cfg.p = 3;
    cfg.q = 5;  // alpha = ln 3 / ln 15 != 1/2: prediction must move with it
    cfg.m = 4;
    cfg.out_dir = dir.string();
    ExperimentResult r = run(cfg);
    double alpha = std::log(3.0) / std::log(15.0);
    nlohmann::json summary = nlohmann::json::parse(slurp(r.json_path));
    CHECK(summary.at("predicted").get<double>() == Approx(-1.0 / alpha).epsilon(1e-12));
    fs::remove_all(dir);
}
