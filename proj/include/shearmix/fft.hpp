#ifndef SHEARMIX_FFT_HPP
#define SHEARMIX_FFT_HPP

#include <algorithm>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace shearmix {

/// Thin RAII wrapper around an in-place 1d complex FFTW plan.
/// sign = FFTW_FORWARD (-1) computes sum x_j e^{-2pi i jk/N},
/// sign = FFTW_BACKWARD (+1) the conjugate kernel. Unnormalized.
class FftPlan {
public:
    FftPlan(std::size_t n, int sign) : n_(n), buf_(n) {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan_ = fftw_plan_dft_1d(int(n), reinterpret_cast<fftw_complex*>(buf_.data()),
                                 reinterpret_cast<fftw_complex*>(buf_.data()), sign,
                                 FFTW_ESTIMATE);
    }
    ~FftPlan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;

    std::size_t size() const { return n_; }
    std::complex<double>* data() { return buf_.data(); }
    const std::complex<double>* data() const { return buf_.data(); }

    void execute() { fftw_execute(plan_); }

    /// Transform of `in`, leaving the result in the internal buffer.
    const std::vector<std::complex<double>>& transform(
        const std::vector<std::complex<double>>& in) {
        if (in.size() != n_) throw std::invalid_argument("FftPlan: size mismatch");
        std::copy(in.begin(), in.end(), buf_.begin());  // keep the planned buffer
        execute();
        return buf_;
    }

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

private:
    std::size_t n_;
    std::vector<std::complex<double>> buf_;
    fftw_plan plan_;
};

} // namespace shearmix

#endif
