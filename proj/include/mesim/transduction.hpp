#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mesim/common.hpp"

namespace mesim {

enum class SweepDirection { None, Up, Down };

/// Field-to-carrier transduction map C(H).
///
/// C is the signed, RMS-referred first-harmonic coil voltage at the reference
/// drive level. The tabulated knots are interpolated with a monotone piecewise
/// cubic Hermite scheme (Fritsch-Carlson slopes), so each knot interval is
/// monotone and the interpolant cannot create sign changes between knots of
/// equal sign. Evaluation outside the knot span throws RangeError.
///
/// A nonzero hysteresis half-width w models the minor loop as a play operator:
/// sweeping up reads C(H - w), sweeping down reads C(H + w).
class TransferCurve {
 public:
  TransferCurve(Eigen::VectorXd h, Eigen::VectorXd c, Tesla hysteresis_halfwidth = 0.0,
                std::string label = {});

  /// Flat curve C(H) = value over [h_lo, h_hi].
  static TransferCurve constant(Volt value, Tesla h_lo, Tesla h_hi, std::string label = "constant");

  /// Anhysteretic interpolant C(H).
  Volt evaluate(Tesla h) const;
  /// Signed carrier amplitude, honoring the sweep direction when w > 0.
  Volt carrier_amplitude(Tesla h, SweepDirection direction = SweepDirection::None) const;
  /// Analytic derivative of the interpolant; H must lie strictly inside the span.
  double sensitivity(Tesla h) const;
  /// Roots of C over [lo, hi], ascending.
  std::vector<Tesla> zero_crossings(Tesla lo, Tesla hi) const;

  Tesla h_min() const { return h_(0); }
  Tesla h_max() const { return h_(h_.size() - 1); }
  bool contains(Tesla h) const { return h >= h_min() && h <= h_max(); }
  Tesla hysteresis_halfwidth() const { return hysteresis_; }
  const std::string& label() const { return label_; }
  const Eigen::VectorXd& knots_h() const { return h_; }
  const Eigen::VectorXd& knots_c() const { return c_; }

  TransferCurve with_hysteresis(Tesla halfwidth) const;
  TransferCurve scaled(double factor) const;

  std::string span_description() const;

 private:
  Eigen::Index interval(Tesla h) const;
  void require_in_span(Tesla h, const char* what) const;

  Eigen::VectorXd h_;
  Eigen::VectorXd c_;
  Eigen::VectorXd d_;  // knot slopes
  Tesla hysteresis_ = 0.0;
  std::string label_;
};

/// Tolerance on |C| used to terminate root bisection.
inline constexpr Volt kZeroCrossingTolerance = 1e-6;

/// Rate-independent play operator: the internal state trails the input by at
/// most the half-width, giving the minor loop used for hysteretic curves.
class PlayOperator {
 public:
  PlayOperator(Tesla halfwidth, Tesla initial) : halfwidth_(halfwidth), state_(initial) {}
  Tesla update(Tesla h);
  Tesla state() const { return state_; }

 private:
  Tesla halfwidth_;
  Tesla state_;
};

/// Voltage noise referred to the coil output, centered on the carrier.
/// One-sided density at offset df: floor_asd * sqrt(1 + flicker_corner / df).
struct NoiseModel {
  double floor_asd = 0.0;  // V/sqrt(Hz)
  Hertz flicker_corner = 0.0;
  std::uint64_t seed = 0;

  double density(Hertz offset) const;
  bool enabled() const { return floor_asd > 0.0; }
};

struct SensorParams {
  TransferCurve curve;
  Hertz f_res = 509.25e3;
  Volt drive_rms = 0.7;
  Volt reference_drive_rms = 0.7;  // drive level the curve knots were recorded at
  Tesla operating_bias = 0.0;
  NoiseModel noise;

  double drive_scale() const { return drive_rms / reference_drive_rms; }
  Volt carrier(Tesla h, SweepDirection direction = SweepDirection::None) const {
    return drive_scale() * curve.carrier_amplitude(h, direction);
  }
  double sensitivity(Tesla h) const { return drive_scale() * curve.sensitivity(h); }
  void validate() const;
};

/// Parameters of the saturating curve family used by the presets:
///   C(x) = A tanh(x / s) + k x + q x^2,   x = H - center_zero.
/// A, k and q are solved so that C vanishes at both outer zeros and the slope
/// at the operating bias equals the target sensitivity.
struct SaturatingCurveSpec {
  Tesla center_zero = -3.5e-6;
  Tesla outer_zero_low = -70.4e-6;
  Tesla outer_zero_high = 64.6e-6;
  Tesla operating_bias = -3.1e-6;
  double sensitivity = 175e3;  // V/T at operating_bias
  Tesla saturation_width = 20e-6;
  Tesla span = 150e-6;  // knots cover [-span, span]
  Tesla knot_spacing = 0.1e-6;
  Tesla hysteresis_halfwidth = 0.0;
  std::string label = "custom";
};

struct SaturatingCoefficients {
  double amplitude = 0.0;  // A
  double linear = 0.0;     // k
  double quadratic = 0.0;  // q
  Volt operator()(const SaturatingCurveSpec& spec, Tesla h) const;
};

SaturatingCoefficients solve_saturating_curve(const SaturatingCurveSpec& spec);
TransferCurve build_saturating_curve(const SaturatingCurveSpec& spec);

inline constexpr std::string_view kPresetMlPaper = "ml-paper";
inline constexpr std::string_view kPresetSlPaper = "sl-paper";
std::vector<std::string> preset_names();
SaturatingCurveSpec preset_curve_spec(std::string_view name);
SensorParams preset(std::string_view name);

// CSV with header `h_tesla,c_volt`.
void write_curve_csv(std::ostream& out, const TransferCurve& curve);
TransferCurve read_curve_csv(std::istream& in, std::string label = "imported");

}  // namespace mesim
