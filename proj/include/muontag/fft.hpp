// Real-to-complex FFT plans backed by FFTW.
#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "core.hpp"

namespace muontag {

namespace detail {
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}
}  // namespace detail

/*!
 * Unnormalised forward r2c and backward c2r transforms of fixed length.
 *
 * Plans use FFTW_ESTIMATE so results do not depend on timing measurements,
 * and FFTW_UNALIGNED so execution accepts any std::vector storage. Execution
 * is thread-safe; only planning is serialised.
 */
class RealFft
{
  public:
    explicit RealFft(std::size_t n) : n_(n)
    {
        if (n < 2) throw InvalidArgument("FFT length must be at least 2");
        std::vector<double> in(n);
        std::vector<std::complex<double>> out(n / 2 + 1);
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* cin = reinterpret_cast<fftw_complex*>(out.data());
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), cin, flags);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cin, in.data(), flags | FFTW_DESTROY_INPUT);
        if (!forward_ || !backward_) throw Error("FFTW planning failed");
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;
    ~RealFft()
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    std::size_t size() const { return n_; }
    std::size_t bins() const { return n_ / 2 + 1; }

    std::vector<std::complex<double>> forward(const std::vector<double>& x) const
    {
        if (x.size() != n_) throw InvalidArgument("FFT input length mismatch");
        std::vector<double> in(x);
        std::vector<std::complex<double>> out(bins());
        fftw_execute_dft_r2c(forward_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }

    //! Inverse without the 1/n factor.
    std::vector<double> backward(const std::vector<std::complex<double>>& spectrum) const
    {
        if (spectrum.size() != bins()) throw InvalidArgument("FFT spectrum length mismatch");
        std::vector<std::complex<double>> in(spectrum);
        std::vector<double> out(n_);
        fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
        return out;
    }

  private:
    std::size_t n_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace muontag
