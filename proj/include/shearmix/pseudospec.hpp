#ifndef SHEARMIX_PSEUDOSPEC_HPP
#define SHEARMIX_PSEUDOSPEC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "shearmix/fit.hpp"
#include "shearmix/flow.hpp"
#include "shearmix/kahan.hpp"

namespace shearmix {

/// Second difference Delta_h^2 phi(y) = phi(y) - 2 phi(y+h) + phi(y+2h).
/// Annihilates affine and h-periodic functions.
inline double delta2(const PiecewiseQuadratic& phi, double y, double h) {
    return phi.evaluate(y) - 2.0 * phi.evaluate(y + h) + phi.evaluate(y + 2.0 * h);
}

inline double delta2(const StreamFunction& sf, double y, double h) {
    return delta2(sf.psi, y, h);
}

/// C_{p,alpha} = 1 / (pi^{2 alpha} p^{2 - 2 alpha}) = s_m^2 h_{m+1}^{2-2alpha}
/// for every m (level independence is one of the tested identities).
inline double c_p_alpha(const FlowParams& fp) {
    return 1.0 / (std::pow(std::numbers::pi, 2.0 * fp.alpha) *
                  std::pow(double(fp.p), 2.0 - 2.0 * fp.alpha));
}

/// C_1 in the window lower bound omega_1(delta) >= C_1 delta^{2 alpha + 3}.
inline double omega1_lower_constant(const FlowParams& fp) {
    return c_p_alpha(fp) /
           std::pow(2.0 * double(fp.p) * fp.p * fp.q, 3.0 + 2.0 * fp.alpha);
}

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

/// Moments of the gauged deviation g(w) = psi(anchor + w) - psi(anchor)
/// - psi'(anchor) w, accumulated over one (possibly partial) segment.
/// All coefficients stay segment-local, so no large-magnitude cancellation
/// enters: g itself is of the order of the final residual.
struct GaugedMoments {
    double g = 0.0;   // int g dw
    double wg = 0.0;  // int w g dw
    double gg = 0.0;  // int g^2 dw
};

class GaugeFrame {
public:
    GaugeFrame(const PiecewiseQuadratic& psi, double anchor)
        : psi_(psi), anchor_(anchor), psi_a_(psi.evaluate(anchor)),
          dpsi_a_(psi.derivative(anchor)) {}

    double anchor() const { return anchor_; }
    double value() const { return psi_a_; }
    double slope() const { return dpsi_a_; }

    /// Moments over the slice z in [z0, z1] of unwrapped segment j
    /// (segment start y_j = y0 + j * len; j may lie outside [0, n)).
    GaugedMoments segment_slice(std::int64_t j, double z0, double z1) const {
        std::int64_t n = psi_.segment_count();
        std::int64_t t = floor_div(j, n);
        const PiecewiseQuadratic::Segment& s = psi_.segment(j - t * n);
        double yj = psi_.y_origin() + double(j) * psi_.segment_length();
        double wj = yj - anchor_;
        double d0 = (s.c0 + double(t) * psi_.period_drop()) - psi_a_ - dpsi_a_ * wj;
        double d1 = s.c1 - dpsi_a_;
        double d2 = s.c2;

        double p[5];  // p[k] = int_{z0}^{z1} z^k dz
        double za = 1.0, zb = 1.0;
        for (int k = 0; k < 5; ++k) {
            za *= z0;
            zb *= z1;
            p[k] = (zb - za) / double(k + 1);
        }

        GaugedMoments m;
        double ig = d0 * p[0] + d1 * p[1] + d2 * p[2];
        double izg = d0 * p[1] + d1 * p[2] + d2 * p[3];
        m.g = ig;
        m.wg = wj * ig + izg;
        m.gg = d0 * d0 * p[0] + 2.0 * d0 * d1 * p[1] + (d1 * d1 + 2.0 * d0 * d2) * p[2] +
               2.0 * d1 * d2 * p[3] + d2 * d2 * p[4];
        return m;
    }

private:
    const PiecewiseQuadratic& psi_;
    double anchor_;
    double psi_a_;
    double dpsi_a_;
};

/// Window-centered least-squares residual from gauged moments: with
/// v = w - w_c and the exact Gram (2 delta, 0, 2 delta^3 / 3),
/// residual = int g^2 - a int g - b int v g.
struct WindowSolve {
    double residual;
    double a, b;  // best fit of g by a + b v
};

inline WindowSolve window_solve(const GaugedMoments& m, double wc, double delta) {
    double g1v = m.wg - wc * m.g;
    double s0 = 2.0 * delta;
    double s2 = 2.0 * delta * delta * delta / 3.0;
    WindowSolve ws;
    ws.a = m.g / s0;
    ws.b = g1v / s2;
    ws.residual = m.gg - ws.a * m.g - ws.b * g1v;
    if (ws.residual < 0.0) ws.residual = 0.0;
    return ws;
}

} // namespace detail

/// Inner infimum of the windowed affine deficit: value =
/// min_{c1,c2} int_{center-delta}^{center+delta} |psi(y) - c1 - c2 y|^2 dy,
/// by an exact 2x2 least-squares solve with exact per-segment polynomial
/// integration (the integrand is a quartic on each segment).
struct AffineResidual {
    double value;
    double c1, c2;
};

inline AffineResidual affine_residual(const PiecewiseQuadratic& psi, double center,
                                      double delta) {
    if (!(delta > 0.0) || !(delta <= std::numbers::pi))
        throw std::invalid_argument("affine_residual: need 0 < delta <= pi");
    double lo = center - delta, hi = center + delta;
    detail::GaugeFrame frame(psi, center);
    double y0 = psi.y_origin(), len = psi.segment_length();
    std::int64_t j_lo = std::int64_t(std::floor((lo - y0) / len));
    std::int64_t j_hi = std::int64_t(std::floor((hi - y0) / len));
    detail::GaugedMoments acc;
    KahanSum sg, swg, sgg;
    for (std::int64_t j = j_lo; j <= j_hi; ++j) {
        double yj = y0 + double(j) * len;
        double z0 = std::max(lo, yj) - yj;
        double z1 = std::min(hi, yj + len) - yj;
        if (!(z1 > z0)) continue;
        detail::GaugedMoments m = frame.segment_slice(j, z0, z1);
        sg.add(m.g);
        swg.add(m.wg);
        sgg.add(m.gg);
    }
    acc.g = sg.value();
    acc.wg = swg.value();
    acc.gg = sgg.value();
    detail::WindowSolve ws = detail::window_solve(acc, 0.0, delta);
    AffineResidual out;
    out.value = ws.residual;
    // un-gauge: fit(y) = psi(c) + psi'(c)(y - center) + a + b (y - center)
    out.c2 = frame.slope() + ws.b;
    out.c1 = frame.value() + ws.a - out.c2 * center;
    return out;
}

inline AffineResidual affine_residual(const StreamFunction& sf, double center, double delta) {
    return affine_residual(sf.psi, center, delta);
}

struct Omega1Result {
    double delta = 0.0;
    double value = 0.0;
    double argmin_center = 0.0;
    double c1 = 0.0, c2 = 0.0;
    int level = 0;
    double lower_bound = 0.0;  // C_1 delta^{2 alpha + 3}
};

/// omega_1(delta) = inf over centers of the windowed affine deficit,
/// approximated by an exhaustive scan at spacing ell_m / 2. Each inner
/// problem is exact; centers are processed in blocks sharing one gauge
/// anchor and per-segment prefix sums, so the scan is O(N_m) per delta.
inline Omega1Result omega1(const StreamFunction& sf, double delta) {
    const PiecewiseQuadratic& psi = sf.psi;
    double ell = psi.segment_length();
    if (!(delta > 0.0) || !(delta < 1.0))
        throw std::invalid_argument("omega1: need delta in (0, 1)");
    if (2.0 * ell > delta) {
        int m_ok = 0;
        while (2.0 * sf.params.cell(m_ok) > delta) ++m_ok;
        throw std::runtime_error("omega1: delta = " + std::to_string(delta) +
                                 " under-resolved at level " + std::to_string(sf.level) +
                                 "; minimal admissible m is " + std::to_string(m_ok));
    }

    std::int64_t n = psi.segment_count();
    double y0 = psi.y_origin();
    double spacing = ell / 2.0;
    std::int64_t n_centers = 2 * n;
    std::int64_t per_block =
        std::max<std::int64_t>(1, std::int64_t(std::ceil(4.0 * delta / spacing)));

    Omega1Result best;
    best.delta = delta;
    best.level = sf.level;
    best.value = std::numeric_limits<double>::infinity();

    for (std::int64_t b0 = 0; b0 < n_centers; b0 += per_block) {
        std::int64_t b1 = std::min(b0 + per_block, n_centers);
        double y_first = y0 + double(b0) * spacing;
        double y_last = y0 + double(b1 - 1) * spacing;
        double lo = y_first - delta, hi = y_last + delta;
        detail::GaugeFrame frame(psi, 0.5 * (lo + hi));

        std::int64_t j_lo = std::int64_t(std::floor((lo - y0) / ell)) - 1;
        std::int64_t j_hi = std::int64_t(std::floor((hi - y0) / ell)) + 1;
        std::size_t n_seg = std::size_t(j_hi - j_lo + 1);
        // prefix sums over whole segments in the block's reach
        std::vector<double> pg(n_seg + 1, 0.0), pwg(n_seg + 1, 0.0), pgg(n_seg + 1, 0.0);
        for (std::size_t i = 0; i < n_seg; ++i) {
            detail::GaugedMoments m = frame.segment_slice(j_lo + std::int64_t(i), 0.0, ell);
            pg[i + 1] = pg[i] + m.g;
            pwg[i + 1] = pwg[i] + m.wg;
            pgg[i + 1] = pgg[i] + m.gg;
        }

        for (std::int64_t ic = b0; ic < b1; ++ic) {
            double yc = y0 + double(ic) * spacing;
            double a = yc - delta, b = yc + delta;
            std::int64_t ja = std::int64_t(std::floor((a - y0) / ell));
            std::int64_t jb = std::int64_t(std::floor((b - y0) / ell));
            detail::GaugedMoments m;
            if (ja == jb) {
                m = frame.segment_slice(ja, a - (y0 + double(ja) * ell),
                                        b - (y0 + double(ja) * ell));
            } else {
                detail::GaugedMoments head =
                    frame.segment_slice(ja, a - (y0 + double(ja) * ell), ell);
                detail::GaugedMoments tail =
                    frame.segment_slice(jb, 0.0, b - (y0 + double(jb) * ell));
                std::size_t i0 = std::size_t(ja + 1 - j_lo), i1 = std::size_t(jb - j_lo);
                m.g = head.g + tail.g + (pg[i1] - pg[i0]);
                m.wg = head.wg + tail.wg + (pwg[i1] - pwg[i0]);
                m.gg = head.gg + tail.gg + (pgg[i1] - pgg[i0]);
            }
            detail::WindowSolve ws = detail::window_solve(m, yc - frame.anchor(), delta);
            if (ws.residual < best.value) {
                best.value = ws.residual;
                best.argmin_center = yc;
                // fit(y) = psi(A) + psi'(A)(y - A) + a + b (y - yc), A = anchor
                best.c2 = frame.slope() + ws.b;
                best.c1 =
                    frame.value() - frame.slope() * frame.anchor() + ws.a - ws.b * yc;
            }
        }
    }
    best.lower_bound =
        omega1_lower_constant(sf.params) * std::pow(delta, 2.0 * sf.params.alpha + 3.0);
    return best;
}

struct Omega1Scaling {
    std::vector<double> deltas;
    std::vector<double> values;
    RateFit fit;
    double predicted_slope = 0.0;  // 2 alpha + 3
    double c1_constant = 0.0;      // assembled lower-bound constant
    bool bound_holds = true;       // omega1 >= C_1 delta^{2 alpha + 3} for every delta
};

inline Omega1Scaling omega1_scaling(const StreamFunction& sf,
                                    const std::vector<double>& deltas) {
    if (deltas.size() < 4) throw std::invalid_argument("omega1_scaling: need >= 4 deltas");
    auto [lo, hi] = std::minmax_element(deltas.begin(), deltas.end());
    if (!(*lo > 0.0) || *hi / *lo < 100.0)
        throw std::invalid_argument("omega1_scaling: delta list must span >= 2 decades");
    Omega1Scaling sc;
    sc.predicted_slope = 2.0 * sf.params.alpha + 3.0;
    sc.c1_constant = omega1_lower_constant(sf.params);
    for (double d : deltas) {
        Omega1Result r = omega1(sf, d);
        sc.deltas.push_back(d);
        sc.values.push_back(r.value);
        if (r.value < r.lower_bound) sc.bound_holds = false;
    }
    sc.fit = fit_power_law(sc.deltas, sc.values);
    return sc;
}

} // namespace shearmix

#endif
