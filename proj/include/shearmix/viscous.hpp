#ifndef SHEARMIX_VISCOUS_HPP
#define SHEARMIX_VISCOUS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "shearmix/fft.hpp"
#include "shearmix/fit.hpp"
#include "shearmix/flow.hpp"
#include "shearmix/kahan.hpp"
#include "shearmix/oscint.hpp"

namespace shearmix {

/// lambda_{nu,k} = nu^{alpha/(alpha+2)} |k|^{2/(alpha+2)}, the enhanced
/// dissipation rate scale.
inline double dissipation_rate(const FlowParams& fp, double nu, int k) {
    double a = fp.alpha;
    return std::pow(nu, a / (a + 2.0)) * std::pow(std::abs(double(k)), 2.0 / (a + 2.0));
}

/// One x-mode run of d_t f = -i k u(y) f + nu d_yy f on a uniform y-grid.
struct ViscousRunConfig {
    FlowParams params{3, 3};
    int m_res = 0;          // level at which u is frozen for the run
    double nu = 0.0;
    int k = 1;
    double dt = 0.0;
    std::int64_t n_grid = 0;
    double threshold = std::exp(-3.0);  // decay fraction defining tau
    double t_max = 0.0;
    double sample_dt = 0.0;             // 0: record every step
    bool include_x_diffusion = false;   // re-apply the e^{-nu k^2 t} factor
    bool smooth_control = false;        // u is not the fractal flow; skip m-rules

    void validate() const {
        if (k == 0) throw std::invalid_argument("ViscousRunConfig: k must be nonzero");
        if (nu < 0.0) throw std::invalid_argument("ViscousRunConfig: nu must be >= 0");
        if (nu / std::abs(double(k)) > 0.5)
            throw std::invalid_argument("ViscousRunConfig: admissibility nu/|k| <= 1/2 violated");
        if (!(dt > 0.0) || !(t_max > 0.0))
            throw std::invalid_argument("ViscousRunConfig: dt and t_max must be positive");
        if (dt * std::abs(double(k)) > 0.1 + 1e-15)
            throw std::invalid_argument("ViscousRunConfig: dt |k| ||u||_inf <= 0.1 violated");
        if (n_grid < 2 || (n_grid & (n_grid - 1)) != 0)
            throw std::invalid_argument("ViscousRunConfig: n_grid must be a power of two");
        if (!smooth_control) {
            if (n_grid < 4 * params.grid_size(m_res))
                throw std::invalid_argument("ViscousRunConfig: n_grid < 4 N_m");
            if (nu > 0.0) {
                double lam = dissipation_rate(params, nu, k);
                if (params.cell(m_res) > std::sqrt(nu / lam) / 4.0)
                    throw std::invalid_argument(
                        "ViscousRunConfig: level " + std::to_string(m_res) +
                        " does not resolve the dissipative scale");
            }
        }
        if (!(threshold > 0.0) || !(threshold < 1.0))
            throw std::invalid_argument("ViscousRunConfig: threshold must be in (0,1)");
    }
};

/// Default configuration for the fractal flow: smallest level resolving
/// the dissipative scale sqrt(nu/lambda), grid with >= 4 points per
/// segment, horizon a large multiple of the predicted decay time.
inline ViscousRunConfig make_config(const FlowParams& fp, double nu, int k,
                                    double threshold = std::exp(-3.0)) {
    if (!(nu > 0.0)) throw std::invalid_argument("make_config: need nu > 0");
    ViscousRunConfig cfg;
    cfg.params = fp;
    cfg.nu = nu;
    cfg.k = k;
    cfg.threshold = threshold;
    double lam = dissipation_rate(fp, nu, k);
    double scale = std::sqrt(nu / lam) / 4.0;
    int m = 0;
    while (fp.cell(m) > scale) ++m;
    cfg.m_res = m;
    std::int64_t need = 4 * fp.grid_size(m);
    std::int64_t ng = 2;
    while (ng < need) ng <<= 1;
    cfg.n_grid = ng;
    cfg.dt = 0.08 / std::abs(double(k));
    cfg.t_max = 60.0 / lam;
    return cfg;
}

/// Configuration for a smooth control shear such as u(y) = sin y, whose
/// critical points give the slower Kolmogorov scale nu^{1/2}.
inline ViscousRunConfig make_smooth_config(const FlowParams& fp, double nu, int k,
                                           double threshold = std::exp(-3.0)) {
    if (!(nu > 0.0)) throw std::invalid_argument("make_smooth_config: need nu > 0");
    ViscousRunConfig cfg;
    cfg.params = fp;
    cfg.smooth_control = true;
    cfg.nu = nu;
    cfg.k = k;
    cfg.threshold = threshold;
    cfg.n_grid = 1024;
    cfg.dt = 0.08 / std::abs(double(k));
    cfg.t_max = 60.0 / std::sqrt(nu * std::abs(double(k)));
    return cfg;
}

inline std::vector<double> sample_flow(const PiecewiseLinearFlow& flow, std::int64_t n_grid) {
    std::vector<double> u(static_cast<std::size_t>(n_grid));
    double h = two_pi / double(n_grid);
    for (std::int64_t j = 0; j < n_grid; ++j)
        u[std::size_t(j)] = flow.evaluate(-std::numbers::pi + double(j) * h);
    return u;
}

template <typename F>
std::vector<double> sample_function(F&& f, std::int64_t n_grid) {
    std::vector<double> u(static_cast<std::size_t>(n_grid));
    double h = two_pi / double(n_grid);
    for (std::int64_t j = 0; j < n_grid; ++j)
        u[std::size_t(j)] = f(-std::numbers::pi + double(j) * h);
    return u;
}

/// e^{iny} sampled on the run grid.
inline std::vector<Complex> grid_mode(std::int64_t n_grid, int n) {
    std::vector<Complex> f(static_cast<std::size_t>(n_grid));
    double h = two_pi / double(n_grid);
    for (std::int64_t j = 0; j < n_grid; ++j)
        f[std::size_t(j)] = std::polar(1.0, double(n) * (-std::numbers::pi + double(j) * h));
    return f;
}

inline double grid_l2_norm(const std::vector<Complex>& f) {
    KahanSum s;
    for (const Complex& z : f) s.add(std::norm(z));
    return std::sqrt(s.value() * two_pi / double(f.size()));
}

/// Strang step: half multiplier e^{-iku dt/2}, exact diffusion e^{-nu n^2 dt}
/// in Fourier, half multiplier. Norm-contractive; exact when nu = 0.
class ViscousStepper {
public:
    ViscousStepper(const ViscousRunConfig& cfg, const std::vector<double>& u_grid)
        : n_(cfg.n_grid),
          fwd_(std::size_t(cfg.n_grid), FFTW_FORWARD),
          bwd_(std::size_t(cfg.n_grid), FFTW_BACKWARD) {
        if (std::int64_t(u_grid.size()) != n_)
            throw std::invalid_argument("ViscousStepper: u_grid size mismatch");
        half_.resize(std::size_t(n_));
        damp_.resize(std::size_t(n_));
        for (std::int64_t j = 0; j < n_; ++j)
            half_[std::size_t(j)] =
                std::polar(1.0, -double(cfg.k) * u_grid[std::size_t(j)] * cfg.dt / 2.0);
        for (std::int64_t j = 0; j < n_; ++j) {
            std::int64_t freq = j <= n_ / 2 ? j : j - n_;
            double d = cfg.nu * double(freq) * double(freq) * cfg.dt;
            if (cfg.include_x_diffusion)
                d += cfg.nu * double(cfg.k) * double(cfg.k) * cfg.dt;
            // fold the inverse-FFT 1/N normalization into the damping factor
            damp_[std::size_t(j)] = std::exp(-d) / double(n_);
        }
    }

    std::int64_t size() const { return n_; }

    void step(std::vector<Complex>& f) {
        if (std::int64_t(f.size()) != n_) throw std::invalid_argument("step: state size mismatch");
        for (std::int64_t j = 0; j < n_; ++j) f[std::size_t(j)] *= half_[std::size_t(j)];
        std::copy(f.begin(), f.end(), fwd_.data());
        fwd_.execute();
        const Complex* s = fwd_.data();
        Complex* b = bwd_.data();
        for (std::int64_t j = 0; j < n_; ++j) b[j] = s[j] * damp_[std::size_t(j)];
        bwd_.execute();
        const Complex* r = bwd_.data();
        for (std::int64_t j = 0; j < n_; ++j) f[std::size_t(j)] = r[j] * half_[std::size_t(j)];
    }

    /// Unitary-normalized spectrum: coefficients c_n with f = sum c_n e^{iny},
    /// n in the FFT's wrapped order (index j holds n = j or j - N).
    std::vector<Complex> spectrum(const std::vector<Complex>& f) {
        std::copy(f.begin(), f.end(), fwd_.data());
        fwd_.execute();
        std::vector<Complex> c(static_cast<std::size_t>(n_));
        for (std::int64_t j = 0; j < n_; ++j) c[std::size_t(j)] = fwd_.data()[j] / double(n_);
        return c;
    }

private:
    std::int64_t n_;
    FftPlan fwd_, bwd_;
    std::vector<Complex> half_;
    std::vector<Complex> damp_;
};

struct DecayRecord {
    std::vector<double> times;
    std::vector<double> norms;
    double tau = std::numeric_limits<double>::quiet_NaN();
    bool crossed = false;
    std::int64_t steps = 0;
    std::int64_t n_grid = 0;
    double nu = 0.0;
    int k = 0;
};

inline DecayRecord solve(const ViscousRunConfig& cfg, const std::vector<Complex>& f_in,
                         const std::vector<double>& u_grid) {
    cfg.validate();
    ViscousStepper st(cfg, u_grid);
    std::vector<Complex> f = f_in;
    DecayRecord rec;
    rec.n_grid = cfg.n_grid;
    rec.nu = cfg.nu;
    rec.k = cfg.k;
    double init = grid_l2_norm(f);
    if (!(init > 0.0)) throw std::invalid_argument("solve: zero initial data");
    rec.times.push_back(0.0);
    rec.norms.push_back(init);
    double target = cfg.threshold * init;
    std::int64_t stride = std::max<std::int64_t>(1, std::int64_t(cfg.sample_dt / cfg.dt));
    std::int64_t max_steps = std::int64_t(std::ceil(cfg.t_max / cfg.dt));
    while (rec.steps < max_steps) {
        for (std::int64_t i = 0; i < stride && rec.steps < max_steps; ++i) {
            st.step(f);
            ++rec.steps;
        }
        double t = double(rec.steps) * cfg.dt;
        double nm = grid_l2_norm(f);
        rec.times.push_back(t);
        rec.norms.push_back(nm);
        if (nm <= target) {
            // log-linear interpolation of the crossing time within the last sample
            double t0 = rec.times[rec.times.size() - 2];
            double n0 = rec.norms[rec.norms.size() - 2];
            if (n0 > nm && n0 > target)
                rec.tau = t0 + (t - t0) * (std::log(n0) - std::log(target)) /
                                   (std::log(n0) - std::log(nm));
            else
                rec.tau = t;
            rec.crossed = true;
            break;
        }
    }
    return rec;
}

/// solve() with u frozen at level cfg.m_res.
inline DecayRecord solve(const ViscousRunConfig& cfg, const std::vector<Complex>& f_in) {
    PiecewiseLinearFlow flow = build(cfg.params, cfg.m_res);
    return solve(cfg, f_in, sample_flow(flow, cfg.n_grid));
}

struct SweepResult {
    std::vector<double> nus;       // runs that crossed the threshold
    std::vector<double> taus;
    std::vector<double> excluded;  // nus whose run never crossed (warned)
    std::vector<std::string> warnings;
    RateFit fit;                   // tau = prefactor * nu^exponent
    double beta = 0.0;             // -exponent, to compare with alpha/(alpha+2)
    double predicted_beta = 0.0;
    std::vector<DecayRecord> records;
};

/// tau(nu) over a nu list spanning >= 3 decades, with log-log fit of the
/// decay exponent beta. Non-crossing runs are excluded with a warning.
inline SweepResult nu_sweep(const FlowParams& fp, const std::vector<double>& nus, int k,
                            double threshold = std::exp(-3.0)) {
    if (nus.size() < 2) throw std::invalid_argument("nu_sweep: need >= 2 viscosities");
    auto [lo, hi] = std::minmax_element(nus.begin(), nus.end());
    if (!(*lo > 0.0) || *hi / *lo < 1e3)
        throw std::invalid_argument("nu_sweep: nu list must be positive and span >= 3 decades");
    SweepResult sw;
    sw.predicted_beta = fp.alpha / (fp.alpha + 2.0);
    for (double nu : nus) {
        ViscousRunConfig cfg = make_config(fp, nu, k, threshold);
        DecayRecord rec = solve(cfg, grid_mode(cfg.n_grid, 1));
        if (rec.crossed) {
            sw.nus.push_back(nu);
            sw.taus.push_back(rec.tau);
        } else {
            sw.excluded.push_back(nu);
            sw.warnings.push_back("nu_sweep: no threshold crossing before t_max at nu = " +
                                  std::to_string(nu) + "; excluded from fit");
        }
        sw.records.push_back(std::move(rec));
    }
    sw.fit = fit_power_law(sw.nus, sw.taus);
    sw.beta = -sw.fit.exponent;
    return sw;
}

} // namespace shearmix

#endif
