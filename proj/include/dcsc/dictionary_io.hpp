#ifndef DCSC_DICTIONARY_IO_HPP
#define DCSC_DICTIONARY_IO_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/rng.hpp"

namespace dcsc {

// On-disk dictionary layout (all integers and floats little-endian):
//   "CSCD" | version u8 (= 1) | K u32 | p u32 | K*p*p float64
// filter-major, row-major within a filter.
inline constexpr std::array<char, 4> kDictionaryMagic{'C', 'S', 'C', 'D'};
inline constexpr std::uint8_t kDictionaryVersion = 1;
inline constexpr std::size_t kDictionaryHeaderSize = 4 + 1 + 4 + 4;

namespace detail {

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  const auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(byteswap_if_big(v));
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t offset) {
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
  return byteswap_if_big(std::bit_cast<T>(bytes));
}

}  // namespace detail

inline std::vector<unsigned char> encode_dictionary(const Dictionary& dict) {
  std::vector<unsigned char> out;
  out.reserve(kDictionaryHeaderSize + dict.values().size() * sizeof(double));
  out.insert(out.end(), kDictionaryMagic.begin(), kDictionaryMagic.end());
  out.push_back(kDictionaryVersion);
  detail::put_le(out, static_cast<std::uint32_t>(dict.filter_count()));
  detail::put_le(out, static_cast<std::uint32_t>(dict.filter_size()));
  for (double v : dict.values()) detail::put_le(out, v);
  return out;
}

// Decodes a dictionary image and projects every filter onto the unit l2 ball.
inline Dictionary decode_dictionary(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kDictionaryMagic.size()) {
    throw FormatError("dictionary file truncated inside magic", bytes.size());
  }
  for (std::size_t i = 0; i < kDictionaryMagic.size(); ++i) {
    if (bytes[i] != static_cast<unsigned char>(kDictionaryMagic[i])) {
      throw FormatError("bad dictionary magic, expected \"CSCD\"", i);
    }
  }
  if (bytes.size() < kDictionaryHeaderSize) {
    throw FormatError("dictionary header truncated", bytes.size());
  }
  if (bytes[4] != kDictionaryVersion) {
    throw FormatError("unsupported dictionary version " + std::to_string(bytes[4]), 4);
  }
  const auto count = detail::get_le<std::uint32_t>(bytes, 5);
  const auto size = detail::get_le<std::uint32_t>(bytes, 9);
  if (count == 0) throw FormatError("dictionary declares K = 0", 5);
  if (size == 0) throw FormatError("dictionary declares p = 0", 9);
  const std::size_t n = static_cast<std::size_t>(count) * size * size;
  const std::size_t expected = kDictionaryHeaderSize + n * sizeof(double);
  if (bytes.size() < expected) {
    const std::size_t have = (bytes.size() - kDictionaryHeaderSize) / sizeof(double);
    throw FormatError("dictionary payload holds " + std::to_string(have) +
                          " values, header declares K*p*p = " + std::to_string(n),
                      bytes.size());
  }
  if (bytes.size() > expected) {
    throw FormatError("trailing bytes after K*p*p dictionary payload", expected);
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t offset = kDictionaryHeaderSize + i * sizeof(double);
    values[i] = detail::get_le<double>(bytes, offset);
    if (!std::isfinite(values[i])) {
      throw FormatError("non-finite filter coefficient", offset);
    }
  }
  Dictionary dict(count, size, std::move(values));
  dict.project_to_unit_ball();
  return dict;
}

inline void save_dictionary(const Dictionary& dict, const std::filesystem::path& path) {
  const auto bytes = encode_dictionary(dict);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dictionary file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_dictionary(bytes);
}

// Orthonormal 2-D DCT-II atom with vertical frequency u, horizontal frequency v.
inline std::vector<double> dct_atom(std::size_t p, std::size_t u, std::size_t v) {
  const auto n = static_cast<double>(p);
  const double cu = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  const double cv = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
  std::vector<double> atom(p * p);
  for (std::size_t r = 0; r < p; ++r) {
    for (std::size_t c = 0; c < p; ++c) {
      atom[r * p + c] =
          cu * cv *
          std::cos(std::numbers::pi * (2.0 * static_cast<double>(r) + 1.0) *
                   static_cast<double>(u) / (2.0 * n)) *
          std::cos(std::numbers::pi * (2.0 * static_cast<double>(c) + 1.0) *
                   static_cast<double>(v) / (2.0 * n));
    }
  }
  return atom;
}

// Frequencies of the non-DC DCT atoms in the order the fallback dictionary
// uses them: increasing u + v, ties by increasing u.
inline std::vector<std::pair<std::size_t, std::size_t>> dct_atom_order(std::size_t p) {
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t total = 1; total <= 2 * (p - 1); ++total) {
    for (std::size_t u = 0; u < p; ++u) {
      if (total >= u && total - u < p) order.emplace_back(u, total - u);
    }
  }
  return order;
}

// Deterministic stand-in for a trained dictionary: the lowest-frequency non-DC
// DCT-II atoms first, then zero-mean unit-norm Gaussian filters drawn from the
// counter-based stream `seed`.
inline Dictionary fallback_dictionary(std::size_t filter_count, std::size_t filter_size,
                                      std::uint64_t seed) {
  if (filter_count < 1) throw ParameterError("fallback dictionary needs K >= 1");
  if (filter_size < 2) throw ParameterError("fallback dictionary needs p >= 2");
  const std::size_t p = filter_size;
  const std::size_t area = p * p;
  const auto order = dct_atom_order(p);
  std::vector<double> values;
  values.reserve(filter_count * area);
  for (std::size_t k = 0; k < std::min(filter_count, order.size()); ++k) {
    const auto atom = dct_atom(p, order[k].first, order[k].second);
    values.insert(values.end(), atom.begin(), atom.end());
  }
  const CounterGaussian rng(seed);
  std::uint64_t counter = 0;
  for (std::size_t k = order.size(); k < filter_count; ++k) {
    std::vector<double> f(area);
    double mean = 0.0;
    for (double& v : f) {
      v = rng.normal(counter++);
      mean += v;
    }
    mean /= static_cast<double>(area);
    double norm = 0.0;
    for (double& v : f) {
      v -= mean;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : f) v /= norm;
    values.insert(values.end(), f.begin(), f.end());
  }
  return Dictionary(filter_count, p, std::move(values));
}

}  // namespace dcsc

#endif  // DCSC_DICTIONARY_IO_HPP
