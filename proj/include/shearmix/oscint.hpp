#ifndef SHEARMIX_OSCINT_HPP
#define SHEARMIX_OSCINT_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "shearmix/fft.hpp"
#include "shearmix/flow.hpp"
#include "shearmix/kahan.hpp"

namespace shearmix {

using Complex = std::complex<double>;

/// phi(y) = sum_{|n| <= n_max} c_n e^{iny}.
class TrigPolynomial {
public:
    explicit TrigPolynomial(std::vector<Complex> coeffs) : c_(std::move(coeffs)) {
        if (c_.size() % 2 == 0) throw std::invalid_argument("TrigPolynomial: need odd length");
        n_max_ = int(c_.size() / 2);
    }

    static TrigPolynomial constant(Complex c0) { return TrigPolynomial({c0}); }
    static TrigPolynomial mode(int n, Complex cn) {
        int nm = std::abs(n);
        std::vector<Complex> c(std::size_t(2 * nm + 1), Complex(0.0));
        c[std::size_t(n + nm)] = cn;
        return TrigPolynomial(std::move(c));
    }

    int n_max() const { return n_max_; }
    Complex coeff(int n) const {
        return std::abs(n) <= n_max_ ? c_[std::size_t(n + n_max_)] : Complex(0.0);
    }

    Complex evaluate(double y) const {
        Complex acc(0.0);
        for (int n = -n_max_; n <= n_max_; ++n)
            acc += coeff(n) * std::polar(1.0, double(n) * y);
        return acc;
    }

    TrigPolynomial derivative() const {
        std::vector<Complex> d(c_.size());
        for (int n = -n_max_; n <= n_max_; ++n)
            d[std::size_t(n + n_max_)] = Complex(0.0, double(n)) * coeff(n);
        return TrigPolynomial(std::move(d));
    }

    bool is_real(double tol = 1e-12) const {
        for (int n = 0; n <= n_max_; ++n)
            if (std::abs(coeff(-n) - std::conj(coeff(n))) > tol) return false;
        return true;
    }

    /// int_T |phi| dy by composite Simpson. Exact trapezoid rules apply to
    /// phi itself; |phi| has kinks at zeros, so we just sample densely.
    double l1_norm() const {
        std::size_t m = std::max<std::size_t>(4096, 256 * std::size_t(2 * n_max_ + 1));
        double h = two_pi / double(m);
        KahanSum s;
        for (std::size_t i = 0; i < m; i += 2) {
            double y0 = -std::numbers::pi + double(i) * h;
            s.add(std::abs(evaluate(y0)) + 4.0 * std::abs(evaluate(y0 + h)) +
                  std::abs(evaluate(y0 + 2.0 * h)));
        }
        return s.value() * h / 3.0;
    }

    double w11_norm() const { return l1_norm() + derivative().l1_norm(); }

private:
    std::vector<Complex> c_;
    int n_max_;
};

namespace detail {

/// E(w, L) = int_0^L e^{i w z} dz, with the removable singularity at w = 0
/// handled by a series. `scale` sets the relative degeneracy threshold.
inline Complex phase_kernel(double w, double len, double scale) {
    if (std::abs(w) < 1e-12 * (scale + 1.0)) {
        double wl = w * len;
        return len * Complex(1.0, 0.5 * wl);  // first-order series term
    }
    Complex num = std::polar(1.0, w * len) - 1.0;
    return num / Complex(0.0, w);
}

} // namespace detail

/// int_a^b e^{i t (u_a + slope (y - a))} e^{i n y} dy, exact closed form.
inline Complex segment_integral(double a, double b, double u_a, double slope, double t,
                                int n) {
    if (!(b > a)) throw std::invalid_argument("segment_integral: need b > a");
    double w = t * slope + double(n);
    Complex prefactor = std::polar(1.0, t * u_a + double(n) * a);
    return prefactor * detail::phase_kernel(w, b - a, std::abs(t * slope) + std::abs(n));
}

/// int_T e^{i t u_m(y)} e^{i r y} dy for each r in [r_lo, r_hi].
/// Direct path: compensated sum of the per-segment closed forms.
/// FFT path (large N_m, modes within the Nyquist range): the same sum,
/// factored through two masked DFTs of e^{i t u_j}.
inline std::vector<Complex> mode_integrals(const PiecewiseLinearFlow& flow, double t,
                                           int r_lo, int r_hi, bool allow_fft = true) {
    if (r_lo > r_hi) throw std::invalid_argument("mode_integrals: bad range");
    std::int64_t n = flow.size();
    double ell = flow.cell();
    double s_mag = flow.slope_magnitude();
    std::size_t count = std::size_t(r_hi - r_lo + 1);
    std::vector<Complex> out(count);

    int max_abs_r = std::max(std::abs(r_lo), std::abs(r_hi));
    bool use_fft = allow_fft && n >= 8192 && max_abs_r <= n / 2 - 1;

    if (use_fft) {
        std::vector<Complex> plus(std::size_t(n), Complex(0.0));
        std::vector<Complex> minus(std::size_t(n), Complex(0.0));
        for (std::int64_t j = 0; j < n; ++j) {
            Complex b = std::polar(1.0, t * flow.node_value(j));
            (flow.slope_sign(j) > 0 ? plus : minus)[std::size_t(j)] = b;
        }
        FftPlan fft(std::size_t(n), FFTW_BACKWARD);  // kernel e^{+2pi i jr/N}
        std::vector<Complex> sp = fft.transform(plus);
        const std::vector<Complex>& sm = fft.transform(minus);
        for (int r = r_lo; r <= r_hi; ++r) {
            std::int64_t bin = ((std::int64_t(r) % n) + n) % n;
            Complex ep = detail::phase_kernel(t * s_mag + r, ell, std::abs(t * s_mag) + std::abs(r));
            Complex em = detail::phase_kernel(-t * s_mag + r, ell, std::abs(t * s_mag) + std::abs(r));
            Complex phase = std::polar(1.0, -std::numbers::pi * double(r));
            out[std::size_t(r - r_lo)] =
                phase * (ep * sp[std::size_t(bin)] + em * sm[std::size_t(bin)]);
        }
        return out;
    }

    for (int r = r_lo; r <= r_hi; ++r) {
        Complex ep = detail::phase_kernel(t * s_mag + r, ell, std::abs(t * s_mag) + std::abs(r));
        Complex em = detail::phase_kernel(-t * s_mag + r, ell, std::abs(t * s_mag) + std::abs(r));
        KahanComplexSum acc;
        Complex rot = std::polar(1.0, double(r) * ell);
        Complex ph = std::polar(1.0, -double(r) * std::numbers::pi);  // e^{i r y_0}
        for (std::int64_t j = 0; j < n; ++j) {
            if ((j & 0xfff) == 0)  // renormalize the phase recursion
                ph = std::polar(1.0, double(r) * flow.node_y(j));
            Complex b = std::polar(1.0, t * flow.node_value(j)) * ph;
            acc.add(b * (flow.slope_sign(j) > 0 ? ep : em));
            ph *= rot;
        }
        out[std::size_t(r - r_lo)] = acc.value();
    }
    return out;
}

/// int_T e^{i t u_m(y)} phi(y) dy as an exact sum of segment integrals.
inline Complex integral_pl(const PiecewiseLinearFlow& flow, double t, const TrigPolynomial& phi,
                           std::int64_t op_budget = std::int64_t(4) << 30) {
    if (flow.size() * std::int64_t(2 * phi.n_max() + 1) > op_budget)
        std::cerr << "shearmix: integral_pl operation count " << flow.size()
                  << " x " << (2 * phi.n_max() + 1) << " exceeds budget\n";
    std::vector<Complex> modes = mode_integrals(flow, t, -phi.n_max(), phi.n_max());
    KahanComplexSum acc;
    for (int nn = -phi.n_max(); nn <= phi.n_max(); ++nn)
        acc.add(phi.coeff(nn) * modes[std::size_t(nn + phi.n_max())]);
    return acc.value();
}

/// Boundary sum T_m of the segmentwise integration by parts:
/// T_m(phi) = sum_y e^{i t u(y)} phi(y) / t * (1/u'(y^-) - 1/u'(y^+)),
/// split into the S1 contribution and the two one-sided S2 sums.
struct BoundarySum {
    Complex total;
    Complex t1, t2plus, t2minus;
    int level;
    double t;
};

inline BoundarySum boundary_sum(const PiecewiseLinearFlow& flow,
                                const GridClassification& cls, double t,
                                const TrigPolynomial& phi) {
    if (cls.level() != flow.level() || cls.grid_points() != flow.size())
        throw std::invalid_argument("boundary_sum: classification/flow level mismatch");
    double s_mag = flow.slope_magnitude();
    KahanComplexSum t1, t2p, t2m;
    for (std::int64_t j = 0; j < flow.size(); ++j) {
        auto reg = cls.region(j);
        if (reg == GridClassification::Region::S0) continue;
        double inv_left = 1.0 / (double(flow.slope_sign(j - 1)) * s_mag);
        double inv_right = 1.0 / (double(flow.slope_sign(j)) * s_mag);
        Complex val = std::polar(1.0, t * flow.node_value(j)) * phi.evaluate(flow.node_y(j)) / t;
        if (reg == GridClassification::Region::S1) {
            t1.add(val * (inv_left - inv_right));
        } else {
            t2p.add(-val * inv_right);
            t2m.add(val * inv_left);
        }
    }
    BoundarySum out;
    out.t1 = t1.value();
    out.t2plus = t2p.value();
    out.t2minus = t2m.value();
    out.total = out.t1 + out.t2plus + out.t2minus;
    out.level = flow.level();
    out.t = t;
    return out;
}

/// Base case m = 0: both grid points change slope; no S2 pairs exist.
inline BoundarySum boundary_sum(const PiecewiseLinearFlow& flow, double t,
                                const TrigPolynomial& phi) {
    if (flow.level() != 0)
        throw std::invalid_argument("boundary_sum: this overload is the m = 0 base case");
    double s_mag = flow.slope_magnitude();
    KahanComplexSum t1;
    for (std::int64_t j = 0; j < flow.size(); ++j) {
        double inv_left = 1.0 / (double(flow.slope_sign(j - 1)) * s_mag);
        double inv_right = 1.0 / (double(flow.slope_sign(j)) * s_mag);
        Complex val = std::polar(1.0, t * flow.node_value(j)) * phi.evaluate(flow.node_y(j)) / t;
        t1.add(val * (inv_left - inv_right));
    }
    BoundarySum out;
    out.t1 = t1.value();
    out.t2plus = out.t2minus = Complex(0.0);
    out.total = out.t1;
    out.level = 0;
    out.t = t;
    return out;
}

/// Interior term of the integration by parts:
/// R_m(phi) = (1/t) sum_j (1/u'_j) int_j e^{i t u_m} phi' dy, so that
/// int_T e^{i t u_m} phi dy = (T_m(phi) - R_m(phi)) / i.
inline Complex interior_term(const PiecewiseLinearFlow& flow, double t,
                             const TrigPolynomial& phi) {
    TrigPolynomial dphi = phi.derivative();
    double s_mag = flow.slope_magnitude();
    double ell = flow.cell();
    KahanComplexSum acc;
    for (std::int64_t j = 0; j < flow.size(); ++j) {
        double a = flow.node_y(j);
        double slope = double(flow.slope_sign(j)) * s_mag;
        Complex seg(0.0);
        for (int nn = -dphi.n_max(); nn <= dphi.n_max(); ++nn) {
            Complex c = dphi.coeff(nn);
            if (c == Complex(0.0)) continue;
            seg += c * segment_integral(a, a + ell, flow.node_value(j), slope, t, nn);
        }
        acc.add(seg / (t * slope));
    }
    return acc.value();
}

/// Signed count of slope patterns over consecutive even-indexed interval
/// pairs: (+,-) pairs minus (-,+) pairs. Scales as M_m = M_0 q^m.
inline std::int64_t count_slope_patterns(const PiecewiseLinearFlow& flow) {
    std::int64_t m_count = 0;
    for (std::int64_t j = 0; j + 1 < flow.size(); j += 2) {
        int a = flow.slope_sign(j);
        int b = flow.slope_sign(j + 1);
        if (a > 0 && b < 0) ++m_count;
        if (a < 0 && b > 0) --m_count;
    }
    return m_count;
}

/// Closed form of int_T e^{i t'_m u_l} dy for every l >= m:
/// 4i M_m / (pq)^m, with M_m from the pattern count.
inline Complex special_integral_exact(const FlowParams& fp, int m,
                                      std::int64_t node_budget = 100000000) {
    PiecewiseLinearFlow flow = build(fp, m, node_budget);
    double pq_m = std::pow(double(fp.p) * fp.q, m);
    return Complex(0.0, 4.0) * double(count_slope_patterns(flow)) / pq_m;
}

} // namespace shearmix

#endif
