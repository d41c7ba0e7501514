#ifndef DCSC_FREQ_HPP
#define DCSC_FREQ_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dcsc/convolution.hpp"
#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/fft.hpp"

namespace dcsc {

// Holds everything the coefficient-map subproblem
//
//   min_x 1/2 || sum_k d_k * x_k - s ||^2 + rho/2 sum_k || x_k - y_k + u_k ||^2
//
// needs across outer iterations: the filter transforms, the transform of the
// signal and the penalty rho.
class XUpdateWorkspace {
 public:
  XUpdateWorkspace(DictionaryFreq freq, const ImageGrid& signal, double rho)
      : freq_(std::move(freq)), rho_(rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("rho must be > 0");
    if (signal.rows() != freq_.rows() || signal.cols() != freq_.cols()) {
      throw DimensionError("signal does not match the dictionary transform grid");
    }
    detail::require_finite(signal.values(), "signal");
    signal_spectrum_ = freq_.fft().forward(signal.values());
  }

  XUpdateWorkspace(const Dictionary& dict, const ImageGrid& signal, double rho)
      : XUpdateWorkspace(DictionaryFreq(dict, signal.rows(), signal.cols()), signal, rho) {}

  const DictionaryFreq& freq() const noexcept { return freq_; }
  double rho() const noexcept { return rho_; }
  std::span<const Complex> signal_spectrum() const noexcept { return signal_spectrum_; }

  std::size_t filter_count() const noexcept { return freq_.filter_count(); }
  std::size_t rows() const noexcept { return freq_.rows(); }
  std::size_t cols() const noexcept { return freq_.cols(); }

 private:
  DictionaryFreq freq_;
  double rho_;
  std::vector<Complex> signal_spectrum_;
};

// Exact minimizer of the coefficient-map subproblem. At every frequency bin
// the normal equations (a^H a + rho I) x = a^H s + rho (y - u), with a the
// 1 x K row of filter transforms, are solved in O(K) via Sherman-Morrison:
//
//   x = (b - a^H (a b) / (rho + a a^H)) / rho,   b = a^H s + rho (y - u).
inline CoeffMapSet x_update(const XUpdateWorkspace& ws, const CoeffMapSet& y,
                            const CoeffMapSet& u) {
  require_same_shape(y, u, "x_update");
  if (y.count() != ws.filter_count() || y.rows() != ws.rows() || y.cols() != ws.cols()) {
    throw DimensionError("x_update: coefficient maps do not match the workspace");
  }
  const DictionaryFreq& freq = ws.freq();
  const std::size_t count = ws.filter_count();
  const std::size_t bins = freq.bins();
  const double rho = ws.rho();

  CoeffMapSet diff(count, y.rows(), y.cols());
  {
    auto yv = y.values();
    auto uv = u.values();
    auto dv = diff.values();
    for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = yv[i] - uv[i];
  }
  std::vector<Complex> rhs = transform_maps(freq, diff);
  auto s = ws.signal_spectrum();
  auto energy = freq.energy();

  for (std::size_t b = 0; b < bins; ++b) {
    Complex ab(0.0, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      Complex& r = rhs[k * bins + b];
      const Complex d = freq.spectrum(k)[b];
      r = std::conj(d) * s[b] + rho * r;
      ab += d * r;
    }
    const Complex factor = ab / (rho + energy[b]);
    for (std::size_t k = 0; k < count; ++k) {
      Complex& r = rhs[k * bins + b];
      r = (r - std::conj(freq.spectrum(k)[b]) * factor) / rho;
    }
  }

  CoeffMapSet x(count, y.rows(), y.cols());
  for (std::size_t k = 0; k < count; ++k) {
    freq.fft().inverse(std::span<const Complex>(rhs).subspan(k * bins, bins), x.map(k));
  }
  return x;
}

}  // namespace dcsc

#endif  // DCSC_FREQ_HPP
