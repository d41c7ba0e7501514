#ifndef DCSC_FFT_HPP
#define DCSC_FFT_HPP

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include "dcsc/error.hpp"

namespace dcsc {

using Complex = std::complex<double>;

namespace detail {

// FFTW's planner is not re-entrant; plan creation and destruction go through
// this lock. Executing an existing plan is thread-safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// Real-to-complex 2-D transform pair for a fixed M x N grid. The spectrum is
// the non-redundant half, M x (N/2 + 1), row-major.
class Fft2d {
 public:
  Fft2d(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), half_cols_(cols / 2 + 1),
        real_scratch_(rows * cols), spectrum_scratch_(rows * half_cols_) {
    // The scratch buffers only exist so the planner has arrays to inspect.
    if (rows == 0 || cols == 0) throw DimensionError("FFT grid must be non-empty");
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      auto* in = real_scratch_.data();
      auto* out = reinterpret_cast<fftw_complex*>(spectrum_scratch_.data());
      const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
      forward_ = fftw_plan_dft_r2c_2d(static_cast<int>(rows), static_cast<int>(cols),
                                      in, out, flags);
      inverse_ = fftw_plan_dft_c2r_2d(static_cast<int>(rows), static_cast<int>(cols),
                                      out, in, flags);
    }
    if (forward_ == nullptr || inverse_ == nullptr) {
      destroy();
      throw Error("FFTW plan creation failed");
    }
  }

  Fft2d(const Fft2d& other) : Fft2d(other.rows_, other.cols_) {}
  Fft2d& operator=(const Fft2d&) = delete;

  ~Fft2d() { destroy(); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t half_cols() const noexcept { return half_cols_; }
  std::size_t spectrum_size() const noexcept { return rows_ * half_cols_; }

  void forward(std::span<const double> in, std::span<Complex> out) const {
    check(in.size(), out.size());
    // r2c leaves its input intact, but the new-array API takes a non-const pointer.
    fftw_execute_dft_r2c(forward_, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  // Normalized inverse: inverse(forward(x)) == x. c2r clobbers its input, so
  // the spectrum is copied first and `in` is left untouched.
  void inverse(std::span<const Complex> in, std::span<double> out) const {
    check(out.size(), in.size());
    std::vector<Complex> scratch(in.begin(), in.end());
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(scratch.data()),
                         out.data());
    const double scale = 1.0 / static_cast<double>(rows_ * cols_);
    for (double& v : out) v *= scale;
  }

  std::vector<Complex> forward(std::span<const double> in) const {
    std::vector<Complex> out(spectrum_size());
    forward(in, out);
    return out;
  }

 private:
  void check(std::size_t real_size, std::size_t spectrum_size) const {
    if (real_size != rows_ * cols_ || spectrum_size != this->spectrum_size()) {
      throw DimensionError("FFT buffer size does not match the planned grid");
    }
  }

  void destroy() noexcept {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_ != nullptr) fftw_destroy_plan(forward_);
    if (inverse_ != nullptr) fftw_destroy_plan(inverse_);
    forward_ = nullptr;
    inverse_ = nullptr;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::size_t half_cols_;
  std::vector<double> real_scratch_;
  std::vector<Complex> spectrum_scratch_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace dcsc

#endif  // DCSC_FFT_HPP
