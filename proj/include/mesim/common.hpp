#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mesim {

// SI base units throughout; these aliases only document intent.
using Tesla = double;
using Volt = double;
using Hertz = double;
using Seconds = double;

using Complex = std::complex<double>;

namespace units {
inline constexpr double micro = 1e-6;
inline constexpr double nano = 1e-9;
inline constexpr double pico = 1e-12;
inline constexpr double kilo = 1e3;
inline constexpr double milli = 1e-3;
}  // namespace units

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

// A requested field or frequency lies outside the modeled domain.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Invalid configuration values (sample rates, filter orders, ADC settings).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data too short or degenerate for the requested estimate.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed or inconsistent external data (CSV, binary traces, reports).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Round-trip-safe decimal formatting, independent of the global locale.
std::string format_double(double value);

}  // namespace mesim
