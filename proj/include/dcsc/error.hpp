#ifndef DCSC_ERROR_HPP
#define DCSC_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcsc {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (M, N, K or vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input data is not usable (non-finite values, empty buffers).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A scalar parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. offset() is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// An iterative solve failed or the ADMM state became non-finite.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace dcsc

#endif  // DCSC_ERROR_HPP
