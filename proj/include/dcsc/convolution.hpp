#ifndef DCSC_CONVOLUTION_HPP
#define DCSC_CONVOLUTION_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/fft.hpp"

namespace dcsc {

// Frequency transforms of the dictionary filters, each zero-padded to M x N
// with its origin at pixel (0, 0), plus sum_k |d_k^|^2 per bin.
class DictionaryFreq {
 public:
  DictionaryFreq(const Dictionary& dict, std::size_t rows, std::size_t cols)
      : count_(dict.filter_count()), filter_size_(dict.filter_size()),
        fft_(rows, cols) {
    dict.check_fits(rows, cols);
    const std::size_t bins = fft_.spectrum_size();
    spectra_.resize(count_ * bins);
    energy_.assign(bins, 0.0);
    std::vector<double> padded(rows * cols);
    const std::size_t p = dict.filter_size();
    for (std::size_t k = 0; k < count_; ++k) {
      std::fill(padded.begin(), padded.end(), 0.0);
      auto f = dict.filter(k);
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t c = 0; c < p; ++c) padded[r * cols + c] = f[r * p + c];
      }
      fft_.forward(padded, spectrum(k));
      auto s = spectrum(k);
      for (std::size_t b = 0; b < bins; ++b) energy_[b] += std::norm(s[b]);
    }
  }

  std::size_t filter_count() const noexcept { return count_; }
  std::size_t filter_size() const noexcept { return filter_size_; }
  std::size_t rows() const noexcept { return fft_.rows(); }
  std::size_t cols() const noexcept { return fft_.cols(); }
  std::size_t bins() const noexcept { return fft_.spectrum_size(); }

  std::span<const Complex> spectrum(std::size_t k) const {
    return std::span<const Complex>(spectra_).subspan(k * bins(), bins());
  }

  // sum_k |d_k^(bin)|^2
  std::span<const double> energy() const noexcept { return energy_; }

  const Fft2d& fft() const noexcept { return fft_; }

 private:
  std::span<Complex> spectrum(std::size_t k) {
    return std::span<Complex>(spectra_).subspan(k * bins(), bins());
  }

  std::size_t count_;
  std::size_t filter_size_;
  Fft2d fft_;
  std::vector<Complex> spectra_;
  std::vector<double> energy_;
};

// Transforms every map of `coeffs` into the half spectrum.
inline std::vector<Complex> transform_maps(const DictionaryFreq& freq,
                                           const CoeffMapSet& coeffs) {
  const std::size_t bins = freq.bins();
  std::vector<Complex> out(coeffs.count() * bins);
  for (std::size_t k = 0; k < coeffs.count(); ++k) {
    freq.fft().forward(coeffs.map(k), std::span<Complex>(out).subspan(k * bins, bins));
  }
  return out;
}

// sum_k d_k * x_k with periodic boundary, evaluated through the FFT.
inline ImageGrid circular_convolve_sum(const DictionaryFreq& freq,
                                       const CoeffMapSet& coeffs) {
  if (coeffs.count() != freq.filter_count() || coeffs.rows() != freq.rows() ||
      coeffs.cols() != freq.cols()) {
    throw DimensionError("coefficient maps do not match the dictionary transform");
  }
  if (!coeffs.finite()) throw ValidationError("coefficient maps contain non-finite values");
  const std::size_t bins = freq.bins();
  std::vector<Complex> acc(bins, Complex(0.0, 0.0));
  std::vector<Complex> spec(bins);
  for (std::size_t k = 0; k < coeffs.count(); ++k) {
    freq.fft().forward(coeffs.map(k), spec);
    auto d = freq.spectrum(k);
    for (std::size_t b = 0; b < bins; ++b) acc[b] += d[b] * spec[b];
  }
  ImageGrid out(coeffs.rows(), coeffs.cols());
  freq.fft().inverse(acc, out.values());
  return out;
}

inline ImageGrid circular_convolve_sum(const Dictionary& dict, const CoeffMapSet& coeffs) {
  if (dict.filter_count() != coeffs.count()) {
    throw DimensionError("dictionary has " + std::to_string(dict.filter_count()) +
                         " filters but " + std::to_string(coeffs.count()) +
                         " coefficient maps were given");
  }
  return circular_convolve_sum(DictionaryFreq(dict, coeffs.rows(), coeffs.cols()), coeffs);
}

// Adjoint of circular_convolve_sum: x_k = d_k (circularly correlated with) r.
inline CoeffMapSet circular_correlate(const DictionaryFreq& freq, const ImageGrid& image) {
  if (image.rows() != freq.rows() || image.cols() != freq.cols()) {
    throw DimensionError("image does not match the dictionary transform");
  }
  const std::size_t bins = freq.bins();
  std::vector<Complex> spec = freq.fft().forward(image.values());
  std::vector<Complex> prod(bins);
  CoeffMapSet out(freq.filter_count(), freq.rows(), freq.cols());
  for (std::size_t k = 0; k < freq.filter_count(); ++k) {
    auto d = freq.spectrum(k);
    for (std::size_t b = 0; b < bins; ++b) prod[b] = std::conj(d[b]) * spec[b];
    freq.fft().inverse(prod, out.map(k));
  }
  return out;
}

struct LowpassSplit {
  ImageGrid low;
  ImageGrid high;
};

// Splits `image` into a smooth part, the solution of
//   (I + strength * (Dr^T Dr + Dc^T Dc)) low = image
// with circular forward differences Dr, Dc, and the residual high = image - low.
inline LowpassSplit lowpass_split(const ImageGrid& image, double strength) {
  if (!(strength > 0.0) || !std::isfinite(strength)) {
    throw ParameterError("lowpass strength must be positive and finite");
  }
  detail::require_finite(image.values(), "image");
  const std::size_t rows = image.rows();
  const std::size_t cols = image.cols();
  Fft2d fft(rows, cols);
  std::vector<Complex> spec = fft.forward(image.values());
  const std::size_t half = fft.half_cols();
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < rows; ++r) {
    const double wr = 2.0 - 2.0 * std::cos(two_pi * static_cast<double>(r) /
                                           static_cast<double>(rows));
    for (std::size_t c = 0; c < half; ++c) {
      const double wc = 2.0 - 2.0 * std::cos(two_pi * static_cast<double>(c) /
                                             static_cast<double>(cols));
      spec[r * half + c] /= 1.0 + strength * (wr + wc);
    }
  }
  LowpassSplit out{ImageGrid(rows, cols), ImageGrid(rows, cols)};
  fft.inverse(spec, out.low.values());
  auto in = image.values();
  auto lo = out.low.values();
  auto hi = out.high.values();
  for (std::size_t i = 0; i < in.size(); ++i) hi[i] = in[i] - lo[i];
  return out;
}

}  // namespace dcsc

#endif  // DCSC_CONVOLUTION_HPP
