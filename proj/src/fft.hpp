#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace gdfmgan::detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Complex DFT of fixed length. sign = FFTW_FORWARD (e^{-j...}) or FFTW_BACKWARD.
class ComplexDft {
public:
    ComplexDft(int n, int sign) : n_(n) {
        std::lock_guard lock(fftw_planner_mutex());
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(n));
        plan_ = fftw_plan_dft_1d(n, buf_, buf_, sign, FFTW_ESTIMATE);
    }
    ~ComplexDft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(buf_);
    }
    ComplexDft(const ComplexDft&) = delete;
    ComplexDft& operator=(const ComplexDft&) = delete;

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
    void execute() { fftw_execute(plan_); }
    int size() const { return n_; }

private:
    int n_;
    fftw_complex* buf_ = nullptr;
    fftw_plan plan_ = nullptr;
};

/// Real-to-complex forward DFT; output has n/2 + 1 bins.
class RealDft {
public:
    explicit RealDft(int n) : n_(n) {
        std::lock_guard lock(fftw_planner_mutex());
        in_ = fftw_alloc_real(static_cast<std::size_t>(n));
        out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    }
    ~RealDft() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealDft(const RealDft&) = delete;
    RealDft& operator=(const RealDft&) = delete;

    double* input() { return in_; }
    const std::complex<double>* output() const { return reinterpret_cast<const std::complex<double>*>(out_); }
    void execute() { fftw_execute(plan_); }

private:
    int n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

}  // namespace gdfmgan::detail
