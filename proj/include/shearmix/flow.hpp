#ifndef SHEARMIX_FLOW_HPP
#define SHEARMIX_FLOW_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shearmix/kahan.hpp"

namespace shearmix {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct FlowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parameter pair (p, q) of the fractal shear family together with the
/// derived scales. alpha = ln p / (ln p + ln q), so (pq)^alpha = p.
struct FlowParams {
    int p;
    int q;
    double alpha;

    FlowParams(int p_, int q_) : p(p_), q(q_) {
        if (p < 3 || p % 2 == 0)
            throw FlowError("FlowParams: p must be odd and >= 3, got " + std::to_string(p));
        if (q < 3 || q % 2 == 0)
            throw FlowError("FlowParams: q must be odd and >= 3, got " + std::to_string(q));
        alpha = std::log(double(p)) / (std::log(double(p)) + std::log(double(q)));
    }

    /// N_m = 2 p^m q^m (number of torus grid cells at level m).
    std::int64_t grid_size(int m) const {
        std::int64_t n = 2;
        for (int i = 0; i < m; ++i) {
            if (n > (std::int64_t(1) << 62) / (std::int64_t(p) * q))
                throw FlowError("grid_size: N_m overflows int64 at m=" + std::to_string(m));
            n *= std::int64_t(p) * q;
        }
        return n;
    }

    /// ell_m = 2 pi / N_m = pi / (pq)^m.
    double cell(int m) const { return two_pi / double(grid_size(m)); }

    /// s_m = q^m / pi (magnitude of the slope of u_m).
    double slope(int m) const { return std::pow(double(q), m) / std::numbers::pi; }

    /// h_{m+1} = ell_m / p = q ell_{m+1}.
    double refine_step(int m_plus_1) const {
        if (m_plus_1 < 1) throw FlowError("refine_step: level must be >= 1");
        return cell(m_plus_1 - 1) / double(p);
    }

    double pow_p(int m) const { return std::pow(double(p), m); }

    /// Largest level m with N_m <= budget.
    int max_level(std::int64_t budget = 100000000) const {
        int m = 0;
        std::int64_t n = 2;
        while (n <= budget / (std::int64_t(p) * q)) {
            n *= std::int64_t(p) * q;
            ++m;
        }
        return m;
    }
};

/// (t_m, t'_m) = (2 pi p^m, pi p^m): the fast-decay and sharpness times.
inline std::pair<double, double> special_times(const FlowParams& fp, int m) {
    double pm = fp.pow_p(m);
    return {two_pi * pm, std::numbers::pi * pm};
}

/// ||u_m - u||_inf <= 1 / ((p-1) p^m).
inline double uniform_error_bound(const FlowParams& fp, int m) {
    return 1.0 / ((fp.p - 1) * fp.pow_p(m));
}

/// u_m as exact node data: node j holds u_m(y_m^j) * p^m, an integer in
/// [0, p^m]. Consecutive nodes differ by exactly +-1 in this scaling.
class PiecewiseLinearFlow {
public:
    PiecewiseLinearFlow(FlowParams params, int level, std::vector<std::int32_t> scaled)
        : params_(params), level_(level), scaled_(std::move(scaled)) {}

    const FlowParams& params() const { return params_; }
    int level() const { return level_; }
    std::int64_t size() const { return std::int64_t(scaled_.size()); }
    double cell() const { return params_.cell(level_); }
    double slope_magnitude() const { return params_.slope(level_); }

    std::int32_t scaled_value(std::int64_t j) const { return scaled_[wrap_index(j)]; }
    double node_value(std::int64_t j) const {
        return double(scaled_[wrap_index(j)]) / params_.pow_p(level_);
    }
    double node_y(std::int64_t j) const { return -std::numbers::pi + double(j) * cell(); }

    /// +1 or -1: sign of the slope on segment [y_j, y_{j+1}].
    int slope_sign(std::int64_t j) const {
        std::int64_t i = wrap_index(j);
        std::int64_t n = wrap_index(j + 1);
        return scaled_[n] > scaled_[i] ? +1 : -1;
    }

    /// Linear interpolation; exact at grid nodes. y is wrapped mod 2pi.
    double evaluate(double y) const {
        double s = (y + std::numbers::pi) / two_pi;
        s -= std::floor(s);                 // [0,1)
        double x = s * double(size());      // grid coordinate
        std::int64_t j = std::int64_t(std::floor(x));
        if (j >= size()) j = size() - 1;
        double frac = x - double(j);
        double a = node_value(j), b = node_value(j + 1);
        return a + frac * (b - a);
    }

    std::int64_t wrap_index(std::int64_t j) const {
        std::int64_t n = size();
        j %= n;
        return j < 0 ? j + n : j;
    }

private:
    FlowParams params_;
    int level_;
    std::vector<std::int32_t> scaled_;
};

/// Build u_m by m refinements of the tent u_0(y) = 1 - |y| / pi.
inline PiecewiseLinearFlow build(const FlowParams& fp, int m,
                                 std::int64_t node_budget = 100000000) {
    if (m < 0) throw FlowError("build: level must be >= 0");
    std::int64_t n_final = fp.grid_size(m);
    if (n_final > node_budget)
        throw FlowError("build: N_" + std::to_string(m) + " = " + std::to_string(n_final) +
                        " exceeds node budget " + std::to_string(node_budget));

    std::vector<std::int32_t> cur = {0, 1};   // u_0 at {-pi, 0}, scale p^0
    for (int lev = 0; lev < m; ++lev) {
        std::int64_t n = std::int64_t(cur.size());
        std::vector<std::int32_t> next(n * fp.p * fp.q);
        for (std::int64_t j = 0; j < n; ++j) {
            std::int32_t a = cur[j];
            std::int32_t b = cur[(j + 1) % n];
            std::int32_t sigma = b - a;       // +-1 at parent scale
            for (int k = 0; k < fp.p; ++k) {
                std::int32_t lo = std::int32_t(fp.p) * a + k * sigma;        // value at y^{j,k}
                std::int32_t hi = lo + sigma;                                // value at y^{j,k+1}
                std::int64_t base = (j * fp.p + k) * fp.q;
                for (int i = 0; i < fp.q; ++i)
                    next[base + i] = (i % 2 == 0) ? lo : hi;
            }
        }
        cur.swap(next);
    }
    return PiecewiseLinearFlow(fp, m, std::move(cur));
}

struct Oscillation {
    double value = 0.0;       // sup - inf over the interval
    bool under_resolved = false;  // |I| < 2 ell_m at this level
};

/// sup - inf of u_m over [a, b], exact from node values plus endpoint
/// interpolation. Intervals shorter than 2 ell_m are flagged: the level-m
/// grid cannot certify the Hoelder lower bound for them.
inline Oscillation oscillation(const PiecewiseLinearFlow& flow, double a, double b) {
    if (!(b > a)) throw FlowError("oscillation: need b > a");
    Oscillation out;
    out.under_resolved = (b - a) < 2.0 * flow.cell();
    double lo = std::min(flow.evaluate(a), flow.evaluate(b));
    double hi = std::max(flow.evaluate(a), flow.evaluate(b));
    double ell = flow.cell();
    std::int64_t j_first = std::int64_t(std::ceil((a + std::numbers::pi) / ell));
    std::int64_t j_last = std::int64_t(std::floor((b + std::numbers::pi) / ell));
    for (std::int64_t j = j_first; j <= j_last; ++j) {
        double v = flow.node_value(j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    out.value = hi - lo;
    return out;
}

/// Partition of the level-m grid into S0 (no slope change), S1 (translates
/// of the coarse grid) and S2 (new extrema), plus the pairing families
/// A_k. Membership is arithmetic in the grid index, so the partition is
/// exact at any size; only the A_k start lists are materialized.
class GridClassification {
public:
    enum class Region { S0, S1, S2 };

    GridClassification(FlowParams params, int level, std::int64_t n,
                       std::vector<std::vector<std::int64_t>> a_families,
                       std::array<std::int64_t, 3> counts = {-1, -1, -1})
        : params_(params), level_(level), n_(n), a_(std::move(a_families)),
          counts_(counts) {}

    const FlowParams& params() const { return params_; }
    int level() const { return level_; }
    std::int64_t grid_points() const { return n_; }

    /// Offset multiset D = {-(q-1), -(q-3), ..., q-1}.
    std::vector<int> offsets() const {
        std::vector<int> d;
        for (int v = -(params_.q - 1); v <= params_.q - 1; v += 2) d.push_back(v);
        return d;
    }

    /// Does grid point j of level `lev` change slope? Recursion: interior
    /// points of a refinement block always do; points on the coarse grid
    /// inherit the answer from one level down; at level 0 both points do.
    bool changes_slope(int lev, std::int64_t j) const {
        std::int64_t pq = std::int64_t(params_.p) * params_.q;
        while (lev > 0) {
            if (j % pq != 0) return j % params_.q != 0;
            j /= pq;
            --lev;
        }
        return true;
    }

    Region region(std::int64_t idx) const {
        std::int64_t pq = std::int64_t(params_.p) * params_.q;
        std::int64_t r = idx % pq;
        // S1: even offset within (q-1) of a coarse point that itself lies in
        // S(m-1), i.e. changes slope at the coarse level (d = 0 is the point).
        std::int64_t dist = std::min(r, pq - r);
        if (dist <= params_.q - 1 && dist % 2 == 0) {
            std::int64_t coarse = (r <= params_.q - 1) ? idx / pq : idx / pq + 1;
            std::int64_t n_coarse = n_ / pq;
            if (changes_slope(level_ - 1, coarse % n_coarse)) return Region::S1;
        }
        if (idx % params_.q == 0) return Region::S0;
        return Region::S2;
    }

    std::int64_t count(Region which) const {
        std::int64_t cached = counts_[std::size_t(which)];
        if (cached >= 0) return cached;
        std::int64_t c = 0;
        for (std::int64_t i = 0; i < n_; ++i)
            if (region(i) == which) ++c;
        return c;
    }

    /// A_k start points; the matching partner of y is y + (q+1) ell_m.
    const std::vector<std::vector<std::int64_t>>& families() const { return a_; }

    std::int64_t partner(std::int64_t start) const { return (start + params_.q + 1) % n_; }

private:
    FlowParams params_;
    int level_;
    std::int64_t n_;
    std::vector<std::vector<std::int64_t>> a_;
    std::array<std::int64_t, 3> counts_;
};

/// Classify the level-m grid against the level-(m-1) flow. Verifies the
/// structural identities (value equality and slope antisymmetry across
/// each S2 pair) exactly on the integer node data and throws on violation.
/// With materialize_families = false the A_k start lists stay empty (the
/// disjointness bookkeeping still runs); use it for very large grids.
inline GridClassification classify(const PiecewiseLinearFlow& fine,
                                   const PiecewiseLinearFlow& coarse,
                                   bool materialize_families = true) {
    const FlowParams& fp = fine.params();
    if (fine.level() < 1) throw FlowError("classify: need level >= 1");
    if (coarse.level() != fine.level() - 1 || coarse.params().p != fp.p ||
        coarse.params().q != fp.q)
        throw FlowError("classify: levels/params mismatch");

    std::int64_t n = fine.size();
    GridClassification cls(fp, fine.level(), n, {});

    // Collect S2 start points (odd offset within their length-q block) and
    // greedily color them so intervals [y, y + (q+1) ell] within one family
    // stay pairwise disjoint. q colors suffice.
    std::vector<std::vector<std::int64_t>> fams(fp.q);
    std::vector<std::int64_t> last_end(fp.q, -std::int64_t(1) << 62);
    std::vector<std::int64_t> first_start(fp.q, -1);
    std::int64_t n_starts = 0, n_s2 = 0;
    std::array<std::int64_t, 3> counts = {0, 0, 0};

    for (std::int64_t idx = 0; idx < n; ++idx) {
        GridClassification::Region reg = cls.region(idx);
        ++counts[std::size_t(reg)];
        if (reg != GridClassification::Region::S2) continue;
        ++n_s2;
        if ((idx % fp.q) % 2 != 1) continue;  // partners live at even offsets
        ++n_starts;
        std::int64_t partner = (idx + fp.q + 1) % n;
        if (cls.region(partner) != GridClassification::Region::S2)
            throw FlowError("classify: S2 partner not in S2 at idx " + std::to_string(idx));
        if (fine.scaled_value(idx) != fine.scaled_value(partner))
            throw FlowError("classify: value identity violated at idx " + std::to_string(idx));
        // y is a local extremum, its partner the opposite extremum:
        // u'(y^+) = -u'(partner^+) and u'(y^-) = -u'(partner^-).
        if (fine.slope_sign(idx) != -fine.slope_sign(partner) ||
            fine.slope_sign(idx - 1) != -fine.slope_sign(partner - 1))
            throw FlowError("classify: slope antisymmetry violated at idx " + std::to_string(idx));

        int color = -1;
        for (int k = 0; k < fp.q; ++k) {
            if (idx > last_end[k]) { color = k; break; }
        }
        if (color < 0) throw FlowError("classify: A_k coloring needs more than q sets");
        if (materialize_families) fams[color].push_back(idx);
        if (first_start[color] < 0) first_start[color] = idx;
        last_end[color] = idx + fp.q + 1;
    }
    if (2 * n_starts != n_s2)
        throw FlowError("classify: S2 does not split into start/partner pairs");
    // Torus wrap: the last interval of a family must not run into its first.
    for (int k = 0; k < fp.q; ++k) {
        bool multiple = first_start[k] >= 0 && last_end[k] != first_start[k] + fp.q + 1;
        if (multiple && last_end[k] - n >= first_start[k])
            throw FlowError("classify: A_k wrap overlap in family " + std::to_string(k));
    }

    return GridClassification(fp, fine.level(), n, std::move(fams), counts);
}

/// Piecewise-quadratic function on a uniform grid, with quasi-periodic
/// extension to the real line: v(y + 2 pi) = v(y) + period_drop.
/// Coefficients are stored segment-locally to keep evaluation exact.
class PiecewiseQuadratic {
public:
    struct Segment {
        double c0, c1, c2;  // v(y_j + z) = c0 + c1 z + c2 z^2
    };

    PiecewiseQuadratic(double y0, double seg_len, std::vector<Segment> segs,
                       double period_drop = 0.0)
        : y0_(y0), len_(seg_len), segs_(std::move(segs)), drop_(period_drop) {}

    double y_origin() const { return y0_; }
    double segment_length() const { return len_; }
    std::int64_t segment_count() const { return std::int64_t(segs_.size()); }
    double period() const { return len_ * double(segs_.size()); }
    double period_drop() const { return drop_; }
    const Segment& segment(std::int64_t j) const {
        std::int64_t n = segment_count();
        j %= n;
        if (j < 0) j += n;
        return segs_[j];
    }

    double evaluate(double y) const {
        double per = period();
        double t = std::floor((y - y0_) / per);
        double yy = y - t * per;
        std::int64_t j = std::int64_t(std::floor((yy - y0_) / len_));
        if (j >= segment_count()) j = segment_count() - 1;
        if (j < 0) j = 0;
        double z = yy - (y0_ + double(j) * len_);
        const Segment& s = segs_[std::size_t(j)];
        return s.c0 + z * (s.c1 + z * s.c2) + t * drop_;
    }

    /// dv/dy, using the right-limit on segment boundaries.
    double derivative(double y) const {
        double per = period();
        double t = std::floor((y - y0_) / per);
        double yy = y - t * per;
        std::int64_t j = std::int64_t(std::floor((yy - y0_) / len_));
        if (j >= segment_count()) j = segment_count() - 1;
        if (j < 0) j = 0;
        double z = yy - (y0_ + double(j) * len_);
        const Segment& s = segs_[std::size_t(j)];
        return s.c1 + 2.0 * s.c2 * z;
    }

    /// Coefficients (a, b, c) with v(y) = a y^2 + b y + c on segment j of
    /// the base period.
    void global_coeffs(std::int64_t j, double& a, double& b, double& c) const {
        const Segment& s = segment(j);
        double yj = y0_ + double(j) * len_;
        a = s.c2;
        b = s.c1 - 2.0 * s.c2 * yj;
        c = s.c0 - s.c1 * yj + s.c2 * yj * yj;
    }

private:
    double y0_;
    double len_;
    std::vector<Segment> segs_;
    double drop_;
};

/// Stream function of u_m: psi' = -u_m segmentwise, torus mean zero.
/// Since u_m has mean 1/2, psi is quasi-periodic with drop -pi per period.
struct StreamFunction {
    FlowParams params;
    int level;
    PiecewiseQuadratic psi;
};

inline StreamFunction stream(const PiecewiseLinearFlow& flow) {
    std::int64_t n = flow.size();
    double ell = flow.cell();
    double s_mag = flow.slope_magnitude();
    std::vector<PiecewiseQuadratic::Segment> segs(static_cast<std::size_t>(n));

    // psi(y_j + z) = psi_j - u_j z - sigma_j s_m z^2 / 2.
    double acc = 0.0;
    KahanSum mean;  // integral of psi over the torus before normalization
    for (std::int64_t j = 0; j < n; ++j) {
        double uj = flow.node_value(j);
        double c2 = -0.5 * double(flow.slope_sign(j)) * s_mag;
        segs[std::size_t(j)] = {acc, -uj, c2};
        mean.add(acc * ell - 0.5 * uj * ell * ell + c2 * ell * ell * ell / 3.0);
        acc += -uj * ell + c2 * ell * ell;  // psi_{j+1}
    }
    double offset = mean.value() / two_pi;
    for (auto& s : segs) s.c0 -= offset;
    double drop = acc;  // psi(pi) - psi(-pi); equals -pi exactly in theory
    return StreamFunction{flow.params(), flow.level(),
                          PiecewiseQuadratic(-std::numbers::pi, ell, std::move(segs), drop)};
}

} // namespace shearmix

#endif
