#ifndef SHEARMIX_KAHAN_HPP
#define SHEARMIX_KAHAN_HPP

#include <cmath>
#include <complex>

namespace shearmix {

/// Neumaier-compensated accumulator. Segment sums over N_m terms can have
/// cancellation down to 1e-12 of the summand magnitude, so plain summation
/// is not enough.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

class KahanComplexSum {
public:
    void add(std::complex<double> z) {
        re_.add(z.real());
        im_.add(z.imag());
    }
    std::complex<double> value() const { return {re_.value(), im_.value()}; }

private:
    KahanSum re_, im_;
};

} // namespace shearmix

#endif
