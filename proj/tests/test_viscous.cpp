#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "shearmix/viscous.hpp"

using namespace shearmix;
using Catch::Approx;

namespace {

// Naive unitary DFT, good enough for small test grids.
std::vector<Complex> naive_spectrum(const std::vector<Complex>& f) {
    std::int64_t n = std::int64_t(f.size());
    std::vector<Complex> c(f.size());
    for (std::int64_t j = 0; j < n; ++j) {
        KahanComplexSum acc;
        for (std::int64_t i = 0; i < n; ++i)
            acc.add(f[std::size_t(i)] *
                    std::polar(1.0, -two_pi * double(i) * double(j) / double(n)));
        c[std::size_t(j)] = acc.value() / double(n);
    }
    return c;
}

double dy_norm2(const std::vector<Complex>& f) {
    std::vector<Complex> c = naive_spectrum(f);
    std::int64_t n = std::int64_t(f.size());
    KahanSum s;
    for (std::int64_t j = 0; j < n; ++j) {
        std::int64_t freq = j <= n / 2 ? j : j - n;
        s.add(double(freq) * double(freq) * std::norm(c[std::size_t(j)]));
    }
    return s.value() * two_pi;  // ||d_y f||^2 with the 2pi/N grid measure, Parseval
}

} // namespace

TEST_CASE("dissipation_rate formula") {
    FlowParams fp(3, 3);  // alpha = 1/2, alpha/(alpha+2) = 0.2
    CHECK(dissipation_rate(fp, 1e-5, 1) == Approx(std::pow(1e-5, 0.2)).epsilon(1e-14));
    CHECK(dissipation_rate(fp, 1e-5, 2) ==
          Approx(std::pow(1e-5, 0.2) * std::pow(2.0, 0.8)).epsilon(1e-14));
}

TEST_CASE("ViscousRunConfig::validate rejects each bad field") {
    ViscousRunConfig good = make_config(FlowParams(3, 3), 1e-3, 1);
    CHECK_NOTHROW(good.validate());

    auto broken = [&](auto&& mutate) {
        ViscousRunConfig c = good;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    broken([](ViscousRunConfig& c) { c.k = 0; });
    broken([](ViscousRunConfig& c) { c.nu = -1e-3; });
    broken([](ViscousRunConfig& c) { c.nu = 0.6; });  // nu/|k| > 1/2
    broken([](ViscousRunConfig& c) { c.dt = 0.2; });  // dt |k| > 0.1
    broken([](ViscousRunConfig& c) { c.dt = 0.0; });
    broken([](ViscousRunConfig& c) { c.n_grid = 6000; });      // not a power of two
    broken([](ViscousRunConfig& c) { c.n_grid = 1024; });      // < 4 N_m
    broken([](ViscousRunConfig& c) { c.m_res = 0; });          // dissipative scale unresolved
    broken([](ViscousRunConfig& c) { c.threshold = 1.5; });
    broken([](ViscousRunConfig& c) { c.t_max = -1.0; });
}

TEST_CASE("make_config picks the smallest resolving level") {
    FlowParams fp(3, 3);
    ViscousRunConfig c = make_config(fp, 1e-3, 1);
    CHECK(c.m_res == 3);
    CHECK(c.n_grid == 8192);
    CHECK(c.dt == Approx(0.08));
    // the next-coarser level must fail the scale rule
    double lam = dissipation_rate(fp, 1e-3, 1);
    CHECK(fp.cell(c.m_res) <= std::sqrt(1e-3 / lam) / 4.0);
    CHECK(fp.cell(c.m_res - 1) > std::sqrt(1e-3 / lam) / 4.0);
    CHECK_THROWS_AS(make_config(fp, 0.0, 1), std::invalid_argument);
}

TEST_CASE("nu = 0 step is the exact inviscid multiplier") {
    FlowParams fp(3, 3);
    ViscousRunConfig cfg;
    cfg.params = fp;
    cfg.m_res = 1;
    cfg.nu = 0.0;
    cfg.k = 2;
    cfg.dt = 0.05;
    cfg.n_grid = 256;
    cfg.t_max = 10.0;
    cfg.validate();
    std::vector<double> u = sample_flow(build(fp, 1), cfg.n_grid);
    ViscousStepper st(cfg, u);
    std::vector<Complex> f = grid_mode(cfg.n_grid, 1);
    double init = grid_l2_norm(f);
    std::vector<Complex> expect = f;
    for (int s = 0; s < 100; ++s) {
        st.step(f);
        for (std::int64_t j = 0; j < cfg.n_grid; ++j)
            expect[std::size_t(j)] *= std::polar(1.0, -double(cfg.k) * u[std::size_t(j)] * cfg.dt);
    }
    double worst = 0.0;
    for (std::int64_t j = 0; j < cfg.n_grid; ++j)
        worst = std::max(worst, std::abs(f[std::size_t(j)] - expect[std::size_t(j)]));
    CHECK(worst < 1e-12);
    CHECK(grid_l2_norm(f) == Approx(init).epsilon(1e-12));  // exact norm preservation
}

TEST_CASE("u = 0 run reproduces the heat semigroup per mode") {
    ViscousRunConfig cfg;
    cfg.m_res = 0;
    cfg.nu = 0.01;
    cfg.k = 1;
    cfg.dt = 0.1;
    cfg.n_grid = 128;
    cfg.t_max = 5.0;
    cfg.smooth_control = true;
    std::vector<double> u(128, 0.0);
    std::vector<Complex> f = grid_mode(cfg.n_grid, 3);
    ViscousStepper st(cfg, u);
    for (int s = 0; s < 50; ++s) st.step(f);
    double t = 50 * cfg.dt;
    // e^{-nu n^2 t} with n = 3 is exact for the splitting when u = 0
    CHECK(grid_l2_norm(f) ==
          Approx(std::sqrt(two_pi) * std::exp(-cfg.nu * 9.0 * t)).epsilon(1e-12));
}

TEST_CASE("Strang step is second-order accurate in dt") {
    ViscousRunConfig base;
    base.nu = 0.02;
    base.k = 1;
    base.n_grid = 256;
    base.t_max = 1.0;
    base.smooth_control = true;
    std::vector<double> u = sample_function([](double y) { return std::sin(y); }, base.n_grid);
    std::vector<Complex> f0 = grid_mode(base.n_grid, 1);

    auto advance = [&](double dt) {
        ViscousRunConfig c = base;
        c.dt = dt;
        ViscousStepper st(c, u);
        std::vector<Complex> f = f0;
        int steps = int(std::llround(1.0 / dt));
        for (int s = 0; s < steps; ++s) st.step(f);
        return f;
    };
    std::vector<Complex> ref = advance(1.0 / 1024.0);
    auto err = [&](const std::vector<Complex>& f) {
        KahanSum s;
        for (std::size_t j = 0; j < f.size(); ++j) s.add(std::norm(f[j] - ref[j]));
        return std::sqrt(s.value());
    };
    double e1 = err(advance(1.0 / 16.0));
    double e2 = err(advance(1.0 / 32.0));
    double e3 = err(advance(1.0 / 64.0));
    CHECK(e1 / e2 == Approx(4.0).margin(1.0));
    CHECK(e2 / e3 == Approx(4.0).margin(1.0));
}

TEST_CASE("discrete energy law at the splitting midpoint") {
    ViscousRunConfig cfg;
    cfg.nu = 0.05;
    cfg.k = 1;
    cfg.n_grid = 128;
    cfg.t_max = 1.0;
    cfg.smooth_control = true;
    std::vector<double> u = sample_function([](double y) { return std::sin(y); }, cfg.n_grid);

    auto discrepancy = [&](double dt) {
        ViscousRunConfig c = cfg;
        c.dt = dt;
        ViscousStepper st(c, u);
        std::vector<Complex> f = grid_mode(c.n_grid, 1);
        // midpoint state: half multiplier, then half of the diffusion
        std::vector<Complex> mid = f;
        for (std::int64_t j = 0; j < c.n_grid; ++j)
            mid[std::size_t(j)] *= std::polar(1.0, -double(c.k) * u[std::size_t(j)] * dt / 2.0);
        std::vector<Complex> cs = naive_spectrum(mid);
        for (std::int64_t j = 0; j < c.n_grid; ++j) {
            std::int64_t freq = j <= c.n_grid / 2 ? j : j - c.n_grid;
            cs[std::size_t(j)] *= std::exp(-c.nu * double(freq * freq) * dt / 2.0);
        }
        std::vector<Complex> midf(std::size_t(c.n_grid));
        for (std::int64_t i = 0; i < c.n_grid; ++i) {
            KahanComplexSum acc;
            for (std::int64_t j = 0; j < c.n_grid; ++j)
                acc.add(cs[std::size_t(j)] *
                        std::polar(1.0, two_pi * double(i) * double(j) / double(c.n_grid)));
            midf[std::size_t(i)] = acc.value();
        }
        double e_before = grid_l2_norm(f);
        std::vector<Complex> g = f;
        st.step(g);
        double e_after = grid_l2_norm(g);
        double de = e_before * e_before - e_after * e_after;
        double rate = 2.0 * c.nu * dt * dy_norm2(midf);
        return std::abs(de - rate) / de;
    };
    double d1 = discrepancy(0.08);
    double d2 = discrepancy(0.04);
    CHECK(d1 < 0.02);
    CHECK(d2 < d1);
    CHECK(d1 / d2 == Approx(4.0).margin(2.0));  // O(dt^2) midpoint accuracy
}

TEST_CASE("solve: monotone decay and no-crossing reporting") {
    ViscousRunConfig cfg;
    cfg.nu = 1e-4;
    cfg.k = 1;
    cfg.dt = 0.1;
    cfg.n_grid = 256;
    cfg.t_max = 2.0;  // far too short to decay by e^{-3}
    cfg.smooth_control = true;
    std::vector<double> u = sample_function([](double y) { return std::sin(y); }, cfg.n_grid);
    DecayRecord rec = solve(cfg, grid_mode(cfg.n_grid, 1), u);
    CHECK_FALSE(rec.crossed);
    CHECK(std::isnan(rec.tau));
    CHECK(rec.norms.size() == rec.times.size());
    for (std::size_t i = 1; i < rec.norms.size(); ++i)
        CHECK(rec.norms[i] <= rec.norms[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("large nu: dissipation time tracks the pure heat run") {
    FlowParams fp(3, 3);
    ViscousRunConfig cfg = make_config(fp, 0.1, 1);
    DecayRecord frac = solve(cfg, grid_mode(cfg.n_grid, 1));

    ViscousRunConfig heat = cfg;
    heat.smooth_control = true;
    std::vector<double> zero(std::size_t(cfg.n_grid), 0.0);
    DecayRecord pure = solve(heat, grid_mode(cfg.n_grid, 1), zero);
    REQUIRE(pure.crossed);
    CHECK(pure.tau == Approx(3.0 / 0.1).epsilon(0.01));  // e^{-nu t} crosses e^{-3}
    REQUIRE(frac.crossed);
    CHECK(frac.tau > 0.5 * pure.tau);
    CHECK(frac.tau < 2.0 * pure.tau);
}

TEST_CASE("nu = 1e-4: enhanced dissipation at m_res = 4") {
    FlowParams fp(3, 3);
    ViscousRunConfig cfg = make_config(fp, 1e-4, 1);
    cfg.m_res = 4;  // finer than the minimal admissible level; still valid
    std::int64_t need = 4 * fp.grid_size(4);
    std::int64_t ng = 2;
    while (ng < need) ng <<= 1;
    cfg.n_grid = ng;
    cfg.validate();
    cfg.sample_dt = 0.4;
    DecayRecord rec = solve(cfg, grid_mode(cfg.n_grid, 1));
    REQUIRE(rec.crossed);
    CHECK(rec.tau > 0.0);
    CHECK(rec.tau * cfg.nu < 0.1);  // enhancement: far faster than the heat time 3/nu
}

TEST_CASE("resolution convergence: doubling n_grid moves tau by < 1%") {
    FlowParams fp(3, 3);
    ViscousRunConfig cfg = make_config(fp, 1e-3, 1);
    cfg.sample_dt = 0.4;
    DecayRecord a = solve(cfg, grid_mode(cfg.n_grid, 1));
    ViscousRunConfig fine = cfg;
    fine.n_grid = 2 * cfg.n_grid;
    DecayRecord b = solve(fine, grid_mode(fine.n_grid, 1));
    REQUIRE(a.crossed);
    REQUIRE(b.crossed);
    CHECK(std::abs(a.tau - b.tau) / b.tau < 0.01);
}

TEST_CASE("nu_sweep precondition checks") {
    FlowParams fp(3, 3);
    CHECK_THROWS_AS(nu_sweep(fp, {1e-3}, 1), std::invalid_argument);
    CHECK_THROWS_AS(nu_sweep(fp, {1e-3, 1e-4}, 1), std::invalid_argument);   // < 3 decades
    CHECK_THROWS_AS(nu_sweep(fp, {-1e-6, 1e-3}, 1), std::invalid_argument);  // nonpositive
}

TEST_CASE("smooth control: sin y crosses with the Kolmogorov horizon") {
    FlowParams fp(3, 3);
    ViscousRunConfig cfg = make_smooth_config(fp, 1e-3, 1);
    cfg.sample_dt = 0.4;
    std::vector<double> u = sample_function([](double y) { return std::sin(y); }, cfg.n_grid);
    DecayRecord rec = solve(cfg, grid_mode(cfg.n_grid, 1), u);
    REQUIRE(rec.crossed);
    // reported, not asserted: the smooth rate scale is nu^{1/2}, much slower
    // than the fractal enhancement at the same nu
    CHECK(rec.tau > 0.0);
    CHECK(rec.tau <= cfg.t_max);
}
