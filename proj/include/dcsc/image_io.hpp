#ifndef DCSC_IMAGE_IO_HPP
#define DCSC_IMAGE_IO_HPP

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"

namespace dcsc {

namespace detail {

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

// Binary PGM (P5) with maxval <= 255.
inline ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos]) != 0) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto read_int = [&]() -> long {
    skip_space_and_comments();
    const std::size_t start = pos;
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) != 0) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > (1L << 30)) throw FormatError("PGM header value too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError("expected an integer in PGM header", start);
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("not a binary PGM (P5) file: " + path.string(), 0);
  }
  pos = 2;
  const long width = read_int();
  const long height = read_int();
  const long maxval = read_int();
  if (width <= 0 || height <= 0) throw FormatError("PGM dimensions must be positive", pos);
  if (maxval <= 0 || maxval > 255) {
    throw FormatError("only 8-bit PGM (maxval <= 255) is supported", pos);
  }
  if (pos >= bytes.size() || std::isspace(bytes[pos]) == 0) {
    throw FormatError("missing whitespace after PGM header", pos);
  }
  ++pos;
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n) throw FormatError("PGM pixel data truncated", bytes.size());
  std::vector<double> values(n);
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = maxval == 255 ? static_cast<double>(bytes[pos + i])
                              : static_cast<double>(bytes[pos + i]) * scale;
  }
  return ImageGrid(static_cast<std::size_t>(height), static_cast<std::size_t>(width),
                   std::move(values));
}

inline void write_pgm(const ImageGrid& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<char> pixels(image.size());
  auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) pixels[i] = static_cast<char>(detail::to_byte(v[i]));
  out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

// 8-bit PNG. Colour inputs are reduced to Rec.601 luma 0.299 R + 0.587 G + 0.114 B.
inline ImageGrid read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&png, path.string().c_str()) == 0) {
    throw IoError("cannot read PNG " + path.string() + ": " + png.message);
  }
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = colour ? 3 : 1;
  const std::size_t rows = png.height;
  const std::size_t cols = png.width;
  std::vector<unsigned char> buffer(rows * cols * channels);
  if (png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = png.message;
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path.string() + ": " + message);
  }
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (colour) {
      values[i] = 0.299 * buffer[3 * i] + 0.587 * buffer[3 * i + 1] + 0.114 * buffer[3 * i + 2];
    } else {
      values[i] = buffer[i];
    }
  }
  return ImageGrid(rows, cols, std::move(values));
}

inline void write_png(const ImageGrid& image, const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.cols());
  png.height = static_cast<png_uint_32>(image.rows());
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> pixels(image.size());
  auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) pixels[i] = detail::to_byte(v[i]);
  if (png_image_write_to_file(&png, path.string().c_str(), 0, pixels.data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

// Dispatches on the file extension: .png, or .pgm / .pnm.
inline ImageGrid read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
  throw IoError("unsupported image format '" + ext + "' for " + path.string());
}

inline void write_image(const ImageGrid& image, const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  if (ext == ".png") return write_png(image, path);
  if (ext == ".pgm" || ext == ".pnm") return write_pgm(image, path);
  throw IoError("unsupported image format '" + ext + "' for " + path.string());
}

}  // namespace dcsc

#endif  // DCSC_IMAGE_IO_HPP
