#ifndef DCSC_METRICS_HPP
#define DCSC_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/rng.hpp"

namespace dcsc {

struct NoiseSpec {
  // Standard deviation on the [0, 255] intensity scale.
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// clamp(image + n, 0, 255) with n_i ~ N(0, sigma^2) taken from the
// CounterGaussian stream `spec.seed`, pixel i (row-major) using draw i.
inline ImageGrid add_gaussian_noise(const ImageGrid& image, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw ParameterError("noise sigma must be >= 0");
  }
  ImageGrid out = image;
  if (spec.sigma == 0.0) return out;
  const CounterGaussian rng(spec.seed);
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::clamp(v[i] + spec.sigma * rng.normal(i), 0.0, 255.0);
  }
  return out;
}

inline double mse(const ImageGrid& a, const ImageGrid& b) {
  if (!a.same_shape(b)) throw DimensionError("mse: image dimensions differ");
  auto av = a.values();
  auto bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return acc / static_cast<double>(av.size());
}

// 10 log10(255^2 / MSE) in dB; +infinity when the images are identical.
inline double psnr(const ImageGrid& a, const ImageGrid& b) {
  const double err = mse(a, b);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / err);
}

}  // namespace dcsc

#endif  // DCSC_METRICS_HPP
