#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nhvmc {

using cplx = std::complex<double>;

/// A single spin in the sigma^z basis: +1 or -1.
using Spin = std::int8_t;
using SpinConfig = std::vector<Spin>;
using SpinView = std::span<const Spin>;

/// Raised for malformed inputs (dimension mismatch, bad enum, out-of-range size).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values or cannot proceed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace nhvmc
