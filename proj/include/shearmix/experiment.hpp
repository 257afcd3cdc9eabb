#ifndef SHEARMIX_EXPERIMENT_HPP
#define SHEARMIX_EXPERIMENT_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "shearmix/fit.hpp"
#include "shearmix/flow.hpp"
#include "shearmix/io.hpp"
#include "shearmix/mixing.hpp"
#include "shearmix/oscint.hpp"
#include "shearmix/pseudospec.hpp"
#include "shearmix/viscous.hpp"

#define SHEARMIX_VERSION "1.0.0"

namespace shearmix {

/// Worker count for parallel maps; overridable via SHEARMIX_WORKERS.
inline int worker_count() {
    if (const char* e = std::getenv("SHEARMIX_WORKERS")) {
        int v = std::atoi(e);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

/// Index-parallel map with deterministic result placement: fn(i) writes
/// only to slot i of a preallocated output, so scheduling cannot change
/// the assembled result.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    int w = std::min<std::int64_t>(worker_count(), n);
    if (w <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t)
        pool.emplace_back([&] {
            for (;;) {
                std::int64_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct ExperimentConfig {
    std::string kind;  // mixing | fast-times | sharpness | oscillatory-bound |
                       // omega1 | dissipation-sweep
    int p = 3, q = 3;
    int m = -1;  // -1: per-kind default
    int k = 1;
    std::uint64_t seed = 12345;
    double t_min = 5.0, t_max = 100.0;
    int n_t = 25;
    std::vector<double> nu_grid;
    std::vector<double> delta_grid;
    double fit_t_min = 10.0;  // fits exclude the transient t < fit_t_min
    double threshold = std::exp(-3.0);
    std::string out_dir = ".";
    bool deterministic = true;

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"kind", kind},           {"p", p},
            {"q", q},                 {"m", m},
            {"k", k},                 {"seed", seed},
            {"t_min", t_min},         {"t_max", t_max},
            {"n_t", n_t},             {"nu_grid", nu_grid},
            {"delta_grid", delta_grid}, {"fit_t_min", fit_t_min},
            {"threshold", threshold},
            {"out_dir", out_dir},     {"deterministic", deterministic}};
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        if (!j.contains("kind") || !j.at("kind").is_string())
            throw std::invalid_argument("config: required string field 'kind' missing");
        c.kind = j.at("kind").get<std::string>();
        static const std::vector<std::string> kinds = {
            "mixing", "fast-times", "sharpness", "oscillatory-bound", "omega1",
            "dissipation-sweep"};
        if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end())
            throw std::invalid_argument("config: unknown kind '" + c.kind + "'");
        auto geti = [&](const char* key, int dflt) {
            return j.contains(key) ? j.at(key).get<int>() : dflt;
        };
        auto getd = [&](const char* key, double dflt) {
            return j.contains(key) ? j.at(key).get<double>() : dflt;
        };
        c.p = geti("p", 3);
        c.q = geti("q", 3);
        if (c.p < 3 || c.p % 2 == 0)
            throw std::invalid_argument("config: p must be an odd integer >= 3 (got " +
                                        std::to_string(c.p) + ")");
        if (c.q < 3 || c.q % 2 == 0)
            throw std::invalid_argument("config: q must be an odd integer >= 3 (got " +
                                        std::to_string(c.q) + ")");
        c.m = geti("m", -1);
        c.k = geti("k", 1);
        if (c.k == 0) throw std::invalid_argument("config: k must be nonzero");
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        bool osc = c.kind == "oscillatory-bound";
        c.t_min = getd("t_min", osc ? 1.0 : 5.0);
        c.t_max = getd("t_max", osc ? 1e4 : 100.0);
        c.n_t = geti("n_t", osc ? 200 : 25);
        if (!(c.t_min > 0.0) || !(c.t_max > c.t_min))
            throw std::invalid_argument("config: need 0 < t_min < t_max");
        if (j.contains("nu_grid")) c.nu_grid = j.at("nu_grid").get<std::vector<double>>();
        if (j.contains("delta_grid"))
            c.delta_grid = j.at("delta_grid").get<std::vector<double>>();
        c.fit_t_min = getd("fit_t_min", 10.0);
        c.threshold = getd("threshold", std::exp(-3.0));
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("deterministic")) c.deterministic = j.at("deterministic").get<bool>();
        return c;
    }
};

struct ExperimentResult {
    bool passed = false;
    std::string csv;          // series payload, also written to csv_path
    nlohmann::json summary;
    std::string csv_path, json_path, manifest_path;
};

namespace detail {

inline std::string fmt_csv_double(double x) { return fmt_double(x); }

/// f^in = cos x: modes k = +-1, single y-coefficient c_0 = sqrt(2 pi) / 2.
inline std::vector<SpectralField> cos_x_data() {
    std::vector<SpectralField> fs;
    for (int k : {1, -1}) {
        SpectralField f(k, 0);
        f.set_coeff(0, Complex(std::sqrt(two_pi) / 2.0, 0.0));
        fs.push_back(std::move(f));
    }
    return fs;
}

/// Decay series for cos x over the given times, parallel over the grid.
inline DecaySeries cos_x_series(const PiecewiseLinearFlow& flow,
                                const std::vector<double>& times) {
    std::vector<SpectralField> init = cos_x_data();
    DecaySeries out;
    out.meta.p = flow.params().p;
    out.meta.q = flow.params().q;
    out.meta.level = flow.level();
    out.meta.f_in_descriptor = "cos(x)";
    for (const SpectralField& f : init) out.meta.k_modes.push_back(f.k);
    out.times = times;
    out.values.assign(times.size(), 0.0);
    out.per_k.assign(times.size(), {});
    parallel_for(std::int64_t(times.size()), [&](std::int64_t i) {
        std::vector<SpectralField> evolved;
        for (const SpectralField& f : init) {
            EvolveOptions o;
            o.n_cut_out = adequate_n_cut(flow, times[std::size_t(i)], f.k, f.n_cut);
            evolved.push_back(evolve_inviscid(flow, f, times[std::size_t(i)], o));
        }
        std::vector<double> pk;
        for (const SpectralField& f : evolved) pk.push_back(f.hminus1_norm());
        out.values[std::size_t(i)] = mixing_norm(evolved);
        out.per_k[std::size_t(i)] = std::move(pk);
    });
    return out;
}

inline std::string series_csv(const DecaySeries& s) {
    std::ostringstream os;
    os << "t,norm,k,norm_k\n";
    for (std::size_t i = 0; i < s.times.size(); ++i)
        for (std::size_t j = 0; j < s.meta.k_modes.size(); ++j)
            os << fmt_csv_double(s.times[i]) << ',' << fmt_csv_double(s.values[i]) << ','
               << s.meta.k_modes[j] << ',' << fmt_csv_double(s.per_k[i][j]) << "\n";
    return os.str();
}

inline TrigPolynomial random_trig_poly(std::mt19937_64& rng, int n_max) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<Complex> c(std::size_t(2 * n_max + 1));
    for (int n = 1; n <= n_max; ++n) {
        Complex v(unif(rng), unif(rng));
        c[std::size_t(n + n_max)] = v;
        c[std::size_t(-n + n_max)] = std::conj(v);  // keep phi real-valued
    }
    c[std::size_t(n_max)] = Complex(unif(rng), 0.0);
    return TrigPolynomial(std::move(c));
}

/// Constant of the tested stationary-phase bound:
/// boundary part 4 pi + q/(q-1), interior part pi.
inline double stationary_phase_constant(const FlowParams& fp) {
    return 4.0 * std::numbers::pi + double(fp.q) / double(fp.q - 1) + std::numbers::pi;
}

} // namespace detail

inline ExperimentResult run_mixing(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    int m = cfg.m >= 0 ? cfg.m : 6;
    PiecewiseLinearFlow flow = build(fp, m);
    std::vector<double> ts = make_time_grid(cfg.t_min, cfg.t_max, cfg.n_t, fp, m);
    DecaySeries series = detail::cos_x_series(flow, ts);
    // exclude the early transient from the fit window (config-overridable),
    // but never so much that fewer than 4 points remain
    double fit_lo = std::max(cfg.t_min, cfg.fit_t_min);
    std::size_t kept = 0;
    for (double t : series.times)
        if (t >= fit_lo) ++kept;
    if (kept < 4) fit_lo = cfg.t_min;
    RateFit fit = fit_power_law(series.times, series.values, fit_lo, cfg.t_max);
    ExperimentResult res;
    res.csv = detail::series_csv(series);
    res.passed = fit.exponent >= -1.15 && fit.exponent <= -0.85;
    res.summary = {{"experiment", "mixing"},
                   {"slope", fit.exponent},
                   {"predicted", -1.0},
                   {"prefactor", fit.prefactor},
                   {"residual_rms", fit.residual_rms},
                   {"passed", res.passed}};
    return res;
}

inline ExperimentResult run_fast_times(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    int m = cfg.m >= 0 ? cfg.m : 6;
    PiecewiseLinearFlow flow = build(fp, m);
    std::vector<double> ts;
    for (int mm = 1; mm <= 3; ++mm) ts.push_back(special_times(fp, mm).first);
    DecaySeries series = detail::cos_x_series(flow, ts);
    std::vector<double> xs = series.times, ys = series.values;
    // 3 points: fit by hand-rolled OLS via fit_power_law needs >= 4; duplicate-free
    // two-point slopes averaged give the same least-squares slope for log-spaced x.
    double predicted = -1.0 / fp.alpha;
    KahanSum sx, sy, sxx, sxy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx.add(std::log(xs[i]));
        sy.add(std::log(ys[i]));
    }
    double mx = sx.value() / double(xs.size()), my = sy.value() / double(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx.add((std::log(xs[i]) - mx) * (std::log(xs[i]) - mx));
        sxy.add((std::log(xs[i]) - mx) * (std::log(ys[i]) - my));
    }
    double slope = sxy.value() / sxx.value();
    ExperimentResult res;
    res.csv = detail::series_csv(series);
    res.passed = std::abs(slope - predicted) <= 0.2;
    res.summary = {{"experiment", "fast-times"},
                   {"slope", slope},
                   {"predicted", predicted},
                   {"passed", res.passed}};
    return res;
}

inline ExperimentResult run_sharpness(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    int m = cfg.m >= 0 ? cfg.m : 6;
    PiecewiseLinearFlow flow = build(fp, m);
    std::vector<double> ts;
    for (int mm = 0; mm <= 4 && mm <= m; ++mm) ts.push_back(special_times(fp, mm).second);
    DecaySeries series = detail::cos_x_series(flow, ts);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double c = series.values[i] * ts[i];
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    ExperimentResult res;
    res.csv = detail::series_csv(series);
    res.passed = hi / lo < 2.0;
    res.summary = {{"experiment", "sharpness"},
                   {"compensated_min", lo},
                   {"compensated_max", hi},
                   {"ratio", hi / lo},
                   {"passed", res.passed}};
    return res;
}

inline ExperimentResult run_oscillatory_bound(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    int m_max = cfg.m >= 0 ? cfg.m : 6;
    int n_t = cfg.n_t > 0 ? cfg.n_t : 200;
    double t_lo = cfg.t_min, t_hi = cfg.t_max;
    const int n_phi = 10;
    double constant = detail::stationary_phase_constant(fp);

    std::mt19937_64 rng(cfg.seed);
    std::vector<TrigPolynomial> phis;
    std::vector<double> w11;
    for (int i = 0; i < n_phi; ++i) {
        phis.push_back(detail::random_trig_poly(rng, 8));
        w11.push_back(phis.back().w11_norm());
    }
    std::vector<double> ts;
    for (int i = 0; i < n_t; ++i)
        ts.push_back(t_lo * std::pow(t_hi / t_lo, double(i) / double(n_t - 1)));

    std::ostringstream csv;
    csv << "m,t,max_ratio\n";
    double max_ratio = 0.0;
    std::int64_t violations = 0;
    for (int m = 0; m <= m_max; ++m) {
        PiecewiseLinearFlow flow = build(fp, m);
        std::vector<double> row_max(ts.size(), 0.0);
        int reach = 0;
        for (const TrigPolynomial& phi : phis) reach = std::max(reach, phi.n_max());
        parallel_for(std::int64_t(ts.size()), [&](std::int64_t i) {
            double t = ts[std::size_t(i)];
            // one mode pass per (m, t); every phi is a combination of it
            std::vector<Complex> modes = mode_integrals(flow, t, -reach, reach);
            double worst = 0.0;
            for (int j = 0; j < n_phi; ++j) {
                KahanSum re, im;
                for (int n = -reach; n <= reach; ++n) {
                    Complex term =
                        phis[std::size_t(j)].coeff(n) * modes[std::size_t(n + reach)];
                    re.add(term.real());
                    im.add(term.imag());
                }
                Complex val(re.value(), im.value());
                double ratio = std::abs(val) * t / (constant * w11[std::size_t(j)]);
                worst = std::max(worst, ratio);
            }
            row_max[std::size_t(i)] = worst;
        });
        for (std::size_t i = 0; i < ts.size(); ++i) {
            csv << m << ',' << detail::fmt_csv_double(ts[i]) << ','
                << detail::fmt_csv_double(row_max[i]) << "\n";
            max_ratio = std::max(max_ratio, row_max[i]);
            if (row_max[i] > 1.0) ++violations;
        }
    }
    ExperimentResult res;
    res.csv = csv.str();
    res.passed = violations == 0;
    res.summary = {{"experiment", "oscillatory-bound"},
                   {"constant", constant},
                   {"max_ratio", max_ratio},
                   {"violations", violations},
                   {"passed", res.passed}};
    return res;
}

inline ExperimentResult run_omega1(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    int m = cfg.m >= 0 ? cfg.m : 6;
    StreamFunction sf = stream(build(fp, m));
    std::vector<double> deltas = cfg.delta_grid;
    if (deltas.empty()) {
        double lo = 4.0 * fp.cell(m - 1), hi = 0.5;
        for (int i = 0; i < 12; ++i)
            deltas.push_back(lo * std::pow(hi / lo, double(i) / 11.0));
    }
    std::vector<double> values(deltas.size(), 0.0);
    parallel_for(std::int64_t(deltas.size()), [&](std::int64_t i) {
        values[std::size_t(i)] = omega1(sf, deltas[std::size_t(i)]).value;
    });
    double c1 = omega1_lower_constant(fp);
    double exp_pred = 2.0 * fp.alpha + 3.0;
    bool bound_holds = true;
    std::ostringstream csv;
    csv << "delta,omega1,slope_so_far\n";
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        double slope_so_far = std::numeric_limits<double>::quiet_NaN();
        if (i + 1 >= 4) {
            std::vector<double> dx(deltas.begin(), deltas.begin() + std::ptrdiff_t(i + 1));
            std::vector<double> dy(values.begin(), values.begin() + std::ptrdiff_t(i + 1));
            slope_so_far = fit_power_law(dx, dy).exponent;
        }
        csv << detail::fmt_csv_double(deltas[i]) << ',' << detail::fmt_csv_double(values[i])
            << ',' << detail::fmt_csv_double(slope_so_far) << "\n";
        if (values[i] < c1 * std::pow(deltas[i], exp_pred)) bound_holds = false;
    }
    RateFit fit = fit_power_law(deltas, values);
    ExperimentResult res;
    res.csv = csv.str();
    res.passed = bound_holds && std::abs(fit.exponent - exp_pred) <= 0.25;
    res.summary = {{"experiment", "omega1"},    {"slope", fit.exponent},
                   {"predicted", exp_pred},     {"c1_constant", c1},
                   {"bound_holds", bound_holds}, {"passed", res.passed}};
    return res;
}

inline ExperimentResult run_dissipation_sweep(const ExperimentConfig& cfg) {
    FlowParams fp(cfg.p, cfg.q);
    std::vector<double> nus = cfg.nu_grid;
    if (nus.empty()) nus = {1e-7, 1e-6, 1e-5, 1e-4, 1e-3};
    SweepResult sw = nu_sweep(fp, nus, cfg.k, cfg.threshold);
    std::ostringstream csv;
    csv << "nu,k,tau,steps,n_grid\n";
    for (const DecayRecord& rec : sw.records)
        csv << detail::fmt_csv_double(rec.nu) << ',' << rec.k << ','
            << detail::fmt_csv_double(rec.tau) << ',' << rec.steps << ',' << rec.n_grid
            << "\n";
    ExperimentResult res;
    res.csv = csv.str();
    res.passed = std::abs(sw.beta - sw.predicted_beta) <= 0.08 && sw.excluded.empty();
    auto [ci_lo, ci_hi] = sw.fit.exponent_ci();
    res.summary = {{"experiment", "dissipation-sweep"},
                   {"beta", sw.beta},
                   {"ci", {-ci_hi, -ci_lo}},  // interval for beta = -exponent
                   {"prediction", sw.predicted_beta},
                   {"residual_rms", sw.fit.residual_rms},
                   {"warnings", sw.warnings},
                   {"passed", res.passed}};
    return res;
}

/// Execute the named experiment; write CSV + JSON summary + MANIFEST into
/// cfg.out_dir. Identical configs in deterministic mode produce
/// byte-identical CSVs.
inline ExperimentResult run(const ExperimentConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentResult res;
    try {
        if (cfg.kind == "mixing") res = run_mixing(cfg);
        else if (cfg.kind == "fast-times") res = run_fast_times(cfg);
        else if (cfg.kind == "sharpness") res = run_sharpness(cfg);
        else if (cfg.kind == "oscillatory-bound") res = run_oscillatory_bound(cfg);
        else if (cfg.kind == "omega1") res = run_omega1(cfg);
        else if (cfg.kind == "dissipation-sweep") res = run_dissipation_sweep(cfg);
        else throw std::invalid_argument("run: unknown kind '" + cfg.kind + "'");
    } catch (const std::exception& e) {
        throw std::runtime_error("experiment '" + cfg.kind + "': " + e.what());
    }
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(cfg.out_dir);
    std::string base = cfg.out_dir + "/" + cfg.kind;
    res.csv_path = base + ".csv";
    res.json_path = base + ".json";
    res.manifest_path = cfg.out_dir + "/MANIFEST";
    {
        std::ofstream os(res.csv_path, std::ios::binary);
        os << res.csv;
    }
    {
        std::ofstream os(res.json_path);
        os << res.summary.dump(2) << "\n";
    }
    {
        std::ofstream os(res.manifest_path);
        os << "config_hash=" << std::hex << fnv1a64(cfg.to_json().dump()) << std::dec << "\n"
           << "version=" << SHEARMIX_VERSION << "\n"
           << "wall_time_s=" << wall << "\n";
    }
    return res;
}

} // namespace shearmix

#endif
