#ifndef DCSC_CORE_HPP
#define DCSC_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcsc/error.hpp"

namespace dcsc {

namespace detail {

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

inline void require_finite(std::span<const double> values, const char* what) {
  if (!all_finite(values)) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

inline double squared_norm(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return acc;
}

}  // namespace detail

// Single-channel M x N raster stored row-major. Intensities are canonically on
// the [0, 255] scale but the container itself accepts any finite reals.
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw DimensionError("image dimensions must be positive");
    }
  }

  ImageGrid(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw DimensionError("image dimensions must be positive");
    }
    if (values_.size() != rows * cols) {
      throw DimensionError("image buffer length " +
                           std::to_string(values_.size()) + " != " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    detail::require_finite(values_, "image");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const ImageGrid& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// K square p x p spatial filters, filter-major and row-major within a filter.
class Dictionary {
 public:
  Dictionary() = default;

  Dictionary(std::size_t filter_count, std::size_t filter_size,
             std::vector<double> values)
      : count_(filter_count), size_(filter_size), values_(std::move(values)) {
    if (filter_count == 0 || filter_size == 0) {
      throw DimensionError("dictionary needs at least one non-empty filter");
    }
    if (values_.size() != filter_count * filter_size * filter_size) {
      throw DimensionError("dictionary buffer does not hold K*p*p values");
    }
    detail::require_finite(values_, "dictionary");
  }

  std::size_t filter_count() const noexcept { return count_; }
  std::size_t filter_size() const noexcept { return size_; }
  std::size_t filter_area() const noexcept { return size_ * size_; }

  std::span<const double> filter(std::size_t k) const {
    return std::span<const double>(values_).subspan(k * filter_area(), filter_area());
  }
  std::span<double> filter(std::size_t k) {
    return std::span<double>(values_).subspan(k * filter_area(), filter_area());
  }

  std::span<const double> values() const noexcept { return values_; }

  // Scales any filter with l2 norm above one back onto the unit sphere.
  void project_to_unit_ball() {
    for (std::size_t k = 0; k < count_; ++k) {
      auto f = filter(k);
      const double norm = std::sqrt(detail::squared_norm(f));
      if (norm > 1.0 + 1e-12) {
        for (double& v : f) v /= norm;
      }
    }
  }

  void check_fits(std::size_t rows, std::size_t cols) const {
    if (size_ > std::min(rows, cols)) {
      throw DimensionError("filter size " + std::to_string(size_) +
                           " exceeds image dimension " +
                           std::to_string(std::min(rows, cols)));
    }
  }

  friend bool operator==(const Dictionary&, const Dictionary&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t size_ = 0;
  std::vector<double> values_;
};

// K stacked M x N real maps. Serves as the coefficient maps and every
// auxiliary variable / scaled multiplier of the ADMM iterations.
class CoeffMapSet {
 public:
  CoeffMapSet() = default;

  CoeffMapSet(std::size_t count, std::size_t rows, std::size_t cols)
      : count_(count), rows_(rows), cols_(cols), values_(count * rows * cols, 0.0) {
    if (count == 0 || rows == 0 || cols == 0) {
      throw DimensionError("coefficient map set dimensions must be positive");
    }
  }

  CoeffMapSet(std::size_t count, std::size_t rows, std::size_t cols,
              std::vector<double> values)
      : count_(count), rows_(rows), cols_(cols), values_(std::move(values)) {
    if (count == 0 || rows == 0 || cols == 0) {
      throw DimensionError("coefficient map set dimensions must be positive");
    }
    if (values_.size() != count * rows * cols) {
      throw DimensionError("coefficient buffer does not hold K*M*N values");
    }
    detail::require_finite(values_, "coefficient maps");
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t map_size() const noexcept { return rows_ * cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> map(std::size_t k) {
    return std::span<double>(values_).subspan(k * map_size(), map_size());
  }
  std::span<const double> map(std::size_t k) const {
    return std::span<const double>(values_).subspan(k * map_size(), map_size());
  }

  double& operator()(std::size_t k, std::size_t r, std::size_t c) {
    return values_[(k * rows_ + r) * cols_ + c];
  }
  double operator()(std::size_t k, std::size_t r, std::size_t c) const {
    return values_[(k * rows_ + r) * cols_ + c];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const CoeffMapSet& other) const noexcept {
    return count_ == other.count_ && rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  double frobenius_norm() const { return std::sqrt(detail::squared_norm(values_)); }

  double l1_norm() const {
    double acc = 0.0;
    for (double v : values_) acc += std::abs(v);
    return acc;
  }

  bool finite() const { return detail::all_finite(values_); }

  friend bool operator==(const CoeffMapSet&, const CoeffMapSet&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline void require_same_shape(const CoeffMapSet& a, const CoeffMapSet& b,
                               const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": coefficient map shapes differ");
  }
}

// ||a - b||_F
inline double distance(const CoeffMapSet& a, const CoeffMapSet& b) {
  require_same_shape(a, b, "distance");
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Extracts the h x w window starting at (row0, col0).
inline ImageGrid crop(const ImageGrid& image, std::size_t row0, std::size_t col0,
                      std::size_t height, std::size_t width) {
  if (row0 + height > image.rows() || col0 + width > image.cols()) {
    throw DimensionError("crop window exceeds image bounds");
  }
  ImageGrid out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = image(row0 + r, col0 + c);
  }
  return out;
}

inline ImageGrid center_crop(const ImageGrid& image, std::size_t height,
                             std::size_t width) {
  height = std::min(height, image.rows());
  width = std::min(width, image.cols());
  return crop(image, (image.rows() - height) / 2, (image.cols() - width) / 2,
              height, width);
}

// Symmetric (half-sample) reflection padding by `pad` pixels on every side.
inline ImageGrid reflect_pad(const ImageGrid& image, std::size_t pad) {
  const auto rows = static_cast<long>(image.rows());
  const auto cols = static_cast<long>(image.cols());
  const auto reflect = [](long i, long n) {
    const long period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  ImageGrid out(image.rows() + 2 * pad, image.cols() + 2 * pad);
  const auto p = static_cast<long>(pad);
  for (long r = 0; r < static_cast<long>(out.rows()); ++r) {
    for (long c = 0; c < static_cast<long>(out.cols()); ++c) {
      out(r, c) = image(reflect(r - p, rows), reflect(c - p, cols));
    }
  }
  return out;
}

}  // namespace dcsc

#endif  // DCSC_CORE_HPP
