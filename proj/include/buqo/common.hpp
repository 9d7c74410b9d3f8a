#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace buqo {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Invalid configuration or precondition violation (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument shapes do not agree.
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A scalar argument lies outside its admissible interval.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The MAP contains no structure with respect to the chosen inpainting operator.
class DegenerateStructure : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed or corrupt file. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// An iterate became non-finite (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API used out of order, e.g. a backward pass without its forward cache.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require_size(Index got, Index expected, const char* what) {
  if (got != expected) {
    throw ShapeError(std::string(what) + ": expected size " + std::to_string(expected) + ", got " +
                     std::to_string(got));
  }
}

}  // namespace buqo
