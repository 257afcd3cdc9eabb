#ifndef SHEARMIX_MIXING_HPP
#define SHEARMIX_MIXING_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "shearmix/flow.hpp"
#include "shearmix/kahan.hpp"
#include "shearmix/oscint.hpp"

namespace shearmix {

/// One x-mode of the scalar: f_k(y) = (2pi)^{-1/2} sum_n c_n e^{iny}.
/// Coefficients are unitary-normalized, c_n = (2pi)^{-1/2} int f e^{-iny} dy,
/// so ||f||_{L^2}^2 = sum |c_n|^2.
struct SpectralField {
    int k = 0;
    int n_cut = 0;
    std::vector<Complex> c;  // index n + n_cut

    SpectralField(int k_, int n_cut_) : k(k_), n_cut(n_cut_), c(std::size_t(2 * n_cut_ + 1)) {
        if (k == 0) throw std::invalid_argument("SpectralField: k must be nonzero");
    }

    Complex coeff(int n) const {
        return std::abs(n) <= n_cut ? c[std::size_t(n + n_cut)] : Complex(0.0);
    }
    void set_coeff(int n, Complex v) { c.at(std::size_t(n + n_cut)) = v; }

    double l2_norm() const {
        KahanSum s;
        for (const Complex& z : c) s.add(std::norm(z));
        return std::sqrt(s.value());
    }

    /// ||f||_{H^s} with weight <n>^{2s}, <n> = (1 + n^2)^{1/2}.
    double h_norm(double s) const {
        KahanSum acc;
        for (int n = -n_cut; n <= n_cut; ++n)
            acc.add(std::pow(1.0 + double(n) * n, s) * std::norm(coeff(n)));
        return std::sqrt(acc.value());
    }
    double hminus1_norm() const { return h_norm(-1.0); }

    /// L^2 mass fraction carried by |n| > 0.9 n_cut; a truncation monitor.
    double tail_fraction() const {
        KahanSum tail, total;
        int edge = int(0.9 * n_cut);
        for (int n = -n_cut; n <= n_cut; ++n) {
            double mass = std::norm(coeff(n));
            total.add(mass);
            if (std::abs(n) > edge) tail.add(mass);
        }
        return total.value() > 0.0 ? tail.value() / total.value() : 0.0;
    }
};

/// Default y-bandwidth: the multiplier e^{-itku} sweeps phases at rate
/// t |k| ||u||_inf, so the cutoff grows linearly in t k.
inline int default_n_cut(double t, int k, double u_inf = 1.0) {
    return 8 * int(std::ceil(std::abs(t) * std::abs(k) * u_inf / two_pi)) + 64;
}

/// Bandwidth adequate for the level-m multiplier: e^{-itku_m} sweeps
/// instantaneous frequencies up to t |k| s_m, so the plain default (built
/// from ||u||_inf = 1) under-resolves fine levels badly. The cap keeps the
/// reach inside the Nyquist range so the FFT fast path stays available.
inline int adequate_n_cut(const PiecewiseLinearFlow& flow, double t, int k,
                          int n_cut_in = 0) {
    double band = std::abs(t) * std::abs(double(k)) * flow.slope_magnitude();
    std::int64_t want = std::int64_t(std::ceil(band)) + 64;
    if (flow.size() >= 8192) {
        std::int64_t cap = flow.size() / 2 - 2 - n_cut_in;
        if (want > cap) want = std::max<std::int64_t>(cap, 64);
    }
    return int(std::max<std::int64_t>(want, default_n_cut(t, k)));
}

struct EvolveOptions {
    int n_cut_out = -1;             // -1: default_n_cut(t, k)
    bool approximate_limit = false; // result should stand in for the limit flow u
    double phase_tol = 1e-3;
    bool allow_fft = true;
};

/// f_k(t, y) = e^{-itku_m(y)} f_k^in(y), coefficients by exact per-segment
/// integration of the product against e^{-iny}.
inline SpectralField evolve_inviscid(const PiecewiseLinearFlow& flow, const SpectralField& f_in,
                                     double t, const EvolveOptions& opts = {}) {
    if (opts.approximate_limit) {
        double err = t * std::abs(f_in.k) * uniform_error_bound(flow.params(), flow.level());
        if (err > opts.phase_tol) {
            int m_ok = flow.level();
            while (t * std::abs(f_in.k) * uniform_error_bound(flow.params(), m_ok) >
                   opts.phase_tol)
                ++m_ok;
            throw std::runtime_error(
                "evolve_inviscid: level " + std::to_string(flow.level()) +
                " under-resolves the limit flow at t=" + std::to_string(t) +
                "; minimal admissible m is " + std::to_string(m_ok));
        }
    }
    int n_out = opts.n_cut_out >= 0 ? opts.n_cut_out : default_n_cut(t, f_in.k);
    SpectralField out(f_in.k, n_out);
    if (t == 0.0) {
        for (int n = -n_out; n <= n_out; ++n) out.set_coeff(n, f_in.coeff(n));
        return out;
    }
    int reach = n_out + f_in.n_cut;
    std::vector<Complex> modes =
        mode_integrals(flow, -t * double(f_in.k), -reach, reach, opts.allow_fft);
    // c_n(t) = (2pi)^{-1} sum_j c^in_j I(j - n), I(r) = int e^{-itku} e^{iry} dy.
    for (int n = -n_out; n <= n_out; ++n) {
        Complex acc(0.0);
        for (int j = -f_in.n_cut; j <= f_in.n_cut; ++j) {
            Complex cj = f_in.coeff(j);
            if (cj == Complex(0.0)) continue;
            acc += cj * modes[std::size_t(j - n + reach)];
        }
        out.set_coeff(n, acc / two_pi);
    }
    return out;
}

/// ||f||_{L^2_x H^{-1}_y} = (sum_k ||f_k||^2_{H^{-1}})^{1/2}.
inline double mixing_norm(const std::vector<SpectralField>& fields) {
    KahanSum acc;
    for (const SpectralField& f : fields) {
        if (f.k == 0)
            throw std::invalid_argument("mixing_norm: k = 0 mode present (zero x-average required)");
        acc.add(std::norm(Complex(f.hminus1_norm())));
    }
    return std::sqrt(acc.value());
}

struct DecaySeriesMeta {
    int p = 0, q = 0, level = 0;
    std::vector<int> k_modes;
    std::string f_in_descriptor;
};

struct DecaySeries {
    std::vector<double> times;
    std::vector<double> values;                    // mixing norm at each time
    std::vector<std::vector<double>> per_k;        // per_k[i][j] = ||f_{k_j}(t_i)||_{H^-1}
    DecaySeriesMeta meta;
};

/// Log-spaced time grid with the special times t_m = 2 pi p^m and
/// t'_m = pi p^m injected exactly whenever they fall inside [t_min, t_max].
inline std::vector<double> make_time_grid(double t_min, double t_max, int n_points,
                                          const FlowParams& fp, int m_max) {
    if (!(t_min > 0.0) || !(t_max > t_min)) throw std::invalid_argument("make_time_grid: bad range");
    std::vector<double> ts;
    for (int i = 0; i < n_points; ++i) {
        double f = n_points > 1 ? double(i) / double(n_points - 1) : 0.0;
        ts.push_back(t_min * std::pow(t_max / t_min, f));
    }
    for (int m = 0; m <= m_max; ++m) {
        auto [tm, tpm] = special_times(fp, m);
        for (double t : {tm, tpm})
            if (t >= t_min && t <= t_max) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

inline DecaySeries decay_series(const PiecewiseLinearFlow& flow,
                                const std::vector<SpectralField>& initial,
                                const std::vector<double>& times,
                                const EvolveOptions& opts = {},
                                const std::string& descriptor = "") {
    DecaySeries out;
    out.meta.p = flow.params().p;
    out.meta.q = flow.params().q;
    out.meta.level = flow.level();
    out.meta.f_in_descriptor = descriptor;
    for (const SpectralField& f : initial) out.meta.k_modes.push_back(f.k);
    for (double t : times) {
        std::vector<SpectralField> evolved;
        evolved.reserve(initial.size());
        for (const SpectralField& f : initial) {
            EvolveOptions o = opts;
            if (o.n_cut_out < 0) o.n_cut_out = adequate_n_cut(flow, t, f.k, f.n_cut);
            evolved.push_back(evolve_inviscid(flow, f, t, o));
        }
        std::vector<double> per_k;
        for (const SpectralField& f : evolved) per_k.push_back(f.hminus1_norm());
        out.times.push_back(t);
        out.values.push_back(mixing_norm(evolved));
        out.per_k.push_back(std::move(per_k));
    }
    return out;
}

/// Lower envelope of value * t^{1/alpha'}; reported, not asserted against
/// a universal constant (it depends on the initial data).
struct EnvelopeReport {
    double alpha_prime = 0.0;
    double min_constant = 0.0;
    double argmin_t = 0.0;
    double first_constant = 0.0;
};

inline EnvelopeReport envelope_check(const DecaySeries& series, double alpha,
                                     double alpha_prime) {
    if (!(alpha_prime < alpha))
        throw std::invalid_argument("envelope_check: require alpha' < alpha");
    if (series.times.empty()) throw std::invalid_argument("envelope_check: empty series");
    EnvelopeReport rep;
    rep.alpha_prime = alpha_prime;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        double c = series.values[i] * std::pow(series.times[i], 1.0 / alpha_prime);
        if (i == 0) {
            rep.first_constant = c;
            rep.min_constant = c;
            rep.argmin_t = series.times[i];
        } else if (c < rep.min_constant) {
            rep.min_constant = c;
            rep.argmin_t = series.times[i];
        }
    }
    return rep;
}

} // namespace shearmix

#endif
