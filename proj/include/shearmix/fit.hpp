#ifndef SHEARMIX_FIT_HPP
#define SHEARMIX_FIT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "shearmix/kahan.hpp"

namespace shearmix {

/// Power-law fit y = prefactor * x^exponent, by ordinary least squares on
/// log-log data.
struct RateFit {
    double exponent = 0.0;
    double exponent_stderr = 0.0;  // OLS standard error of the slope
    double prefactor = 0.0;
    double residual_rms = 0.0;  // RMS of log-space residuals
    double x_lo = 0.0, x_hi = 0.0;
    std::size_t n_points = 0;

    double evaluate(double x) const { return prefactor * std::pow(x, exponent); }
    /// ~95% confidence interval for the exponent.
    std::pair<double, double> exponent_ci() const {
        return {exponent - 2.0 * exponent_stderr, exponent + 2.0 * exponent_stderr};
    }
};

inline RateFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("fit_power_law: size mismatch");
    if (xs.size() < 4) throw std::invalid_argument("fit_power_law: need at least 4 points");
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::invalid_argument("fit_power_law: data must be strictly positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    double n = double(xs.size());
    KahanSum sx, sy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx.add(lx[i]);
        sy.add(ly[i]);
    }
    double mx = sx.value() / n, my = sy.value() / n;
    KahanSum sxx, sxy;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx.add((lx[i] - mx) * (lx[i] - mx));
        sxy.add((lx[i] - mx) * (ly[i] - my));
    }
    if (sxx.value() == 0.0) throw std::invalid_argument("fit_power_law: degenerate x data");
    RateFit fit;
    fit.exponent = sxy.value() / sxx.value();
    double intercept = my - fit.exponent * mx;
    fit.prefactor = std::exp(intercept);
    KahanSum rss;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ly[i] - (intercept + fit.exponent * lx[i]);
        rss.add(r * r);
    }
    fit.residual_rms = std::sqrt(rss.value() / n);
    fit.exponent_stderr =
        xs.size() > 2 ? std::sqrt(rss.value() / (n - 2.0) / sxx.value()) : 0.0;
    fit.x_lo = *std::min_element(xs.begin(), xs.end());
    fit.x_hi = *std::max_element(xs.begin(), xs.end());
    fit.n_points = xs.size();
    return fit;
}

/// Restrict to xs in [x_lo, x_hi] before fitting.
inline RateFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys,
                             double x_lo, double x_hi) {
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i] >= x_lo && xs[i] <= x_hi) {
            fx.push_back(xs[i]);
            fy.push_back(ys[i]);
        }
    return fit_power_law(fx, fy);
}

} // namespace shearmix

#endif
