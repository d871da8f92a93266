#include "mesim/transduction.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "mesim/csv.hpp"

namespace mesim {
namespace {

std::string micro_tesla(Tesla h) {
  std::ostringstream os;
  os << h / units::micro << " uT";
  return os.str();
}

// Fritsch-Carlson / Fritsch-Butland slopes; every interval stays monotone.
Eigen::VectorXd monotone_slopes(const Eigen::VectorXd& h, const Eigen::VectorXd& c) {
  const Eigen::Index n = h.size();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  if (n == 2) {
    d.setConstant((c(1) - c(0)) / (h(1) - h(0)));
    return d;
  }
  Eigen::VectorXd step = h.tail(n - 1) - h.head(n - 1);
  Eigen::VectorXd secant = (c.tail(n - 1) - c.head(n - 1)).cwiseQuotient(step);

  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    const double s0 = secant(k - 1), s1 = secant(k);
    if (s0 * s1 <= 0.0) continue;
    const double w1 = 2.0 * step(k) + step(k - 1);
    const double w2 = step(k) + 2.0 * step(k - 1);
    d(k) = (w1 + w2) / (w1 / s0 + w2 / s1);
  }

  auto edge = [](double h0, double h1, double s0, double s1) {
    double v = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if (std::signbit(v) != std::signbit(s0) || s0 == 0.0) return 0.0;
    if (std::signbit(s0) != std::signbit(s1) && std::abs(v) > 3.0 * std::abs(s0)) return 3.0 * s0;
    return v;
  };
  d(0) = edge(step(0), step(1), secant(0), secant(1));
  d(n - 1) = edge(step(n - 2), step(n - 3), secant(n - 2), secant(n - 3));
  return d;
}

}  // namespace

TransferCurve::TransferCurve(Eigen::VectorXd h, Eigen::VectorXd c, Tesla hysteresis_halfwidth,
                             std::string label)
    : h_(std::move(h)), c_(std::move(c)), hysteresis_(hysteresis_halfwidth), label_(std::move(label)) {
  if (h_.size() != c_.size()) throw ConfigError("TransferCurve: knot vectors differ in length");
  if (h_.size() < 2) throw ConfigError("TransferCurve: at least two knots required");
  if (!h_.allFinite() || !c_.allFinite()) throw ConfigError("TransferCurve: non-finite knot");
  for (Eigen::Index k = 1; k < h_.size(); ++k)
    if (!(h_(k) > h_(k - 1)))
      throw ConfigError("TransferCurve: knot fields must be strictly increasing (knot " +
                        std::to_string(k) + ")");
  if (!(hysteresis_ >= 0.0)) throw ConfigError("TransferCurve: hysteresis half-width must be >= 0");
  d_ = monotone_slopes(h_, c_);
}

TransferCurve TransferCurve::constant(Volt value, Tesla h_lo, Tesla h_hi, std::string label) {
  Eigen::VectorXd h(2), c(2);
  h << h_lo, h_hi;
  c << value, value;
  return TransferCurve(h, c, 0.0, std::move(label));
}

TransferCurve TransferCurve::with_hysteresis(Tesla halfwidth) const {
  return TransferCurve(h_, c_, halfwidth, label_);
}

TransferCurve TransferCurve::scaled(double factor) const {
  return TransferCurve(h_, c_ * factor, hysteresis_, label_);
}

std::string TransferCurve::span_description() const {
  return "[" + micro_tesla(h_min()) + ", " + micro_tesla(h_max()) + "]";
}

void TransferCurve::require_in_span(Tesla h, const char* what) const {
  if (!(h >= h_min() && h <= h_max()))
    throw RangeError(std::string(what) + ": field " + micro_tesla(h) + " outside curve span " +
                     span_description());
}

Eigen::Index TransferCurve::interval(Tesla h) const {
  const double* first = h_.data();
  const double* last = h_.data() + h_.size();
  auto it = std::upper_bound(first, last, h);
  Eigen::Index k = static_cast<Eigen::Index>(it - first) - 1;
  return std::clamp<Eigen::Index>(k, 0, h_.size() - 2);
}

Volt TransferCurve::evaluate(Tesla h) const {
  require_in_span(h, "carrier_amplitude");
  const Eigen::Index k = interval(h);
  const double dh = h_(k + 1) - h_(k);
  const double t = (h - h_(k)) / dh;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * c_(k) + h10 * dh * d_(k) + h01 * c_(k + 1) + h11 * dh * d_(k + 1);
}

Volt TransferCurve::carrier_amplitude(Tesla h, SweepDirection direction) const {
  require_in_span(h, "carrier_amplitude");
  if (hysteresis_ == 0.0 || direction == SweepDirection::None) return evaluate(h);
  const double sign = direction == SweepDirection::Up ? 1.0 : -1.0;
  return evaluate(h - sign * hysteresis_);
}

double TransferCurve::sensitivity(Tesla h) const {
  if (!(h > h_min() && h < h_max()))
    throw RangeError("sensitivity: field " + micro_tesla(h) + " not strictly inside curve span " +
                     span_description());
  const Eigen::Index k = interval(h);
  const double dh = h_(k + 1) - h_(k);
  const double t = (h - h_(k)) / dh;
  const double t2 = t * t;
  const double g00 = 6 * t2 - 6 * t;
  const double g10 = 3 * t2 - 4 * t + 1;
  const double g01 = -6 * t2 + 6 * t;
  const double g11 = 3 * t2 - 2 * t;
  return (g00 * c_(k) + g01 * c_(k + 1)) / dh + g10 * d_(k) + g11 * d_(k + 1);
}

std::vector<Tesla> TransferCurve::zero_crossings(Tesla lo, Tesla hi) const {
  if (lo > hi) std::swap(lo, hi);
  require_in_span(lo, "zero_crossings");
  require_in_span(hi, "zero_crossings");

  std::vector<Tesla> roots;
  auto push = [&roots](Tesla h) {
    if (roots.empty() || roots.back() != h) roots.push_back(h);
  };

  // Each Hermite interval is monotone, so the knot grid brackets every root.
  std::vector<Tesla> grid{lo};
  for (Eigen::Index k = 0; k < h_.size(); ++k)
    if (h_(k) > lo && h_(k) < hi) grid.push_back(h_(k));
  grid.push_back(hi);

  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    double a = grid[i], b = grid[i + 1];
    double fa = evaluate(a), fb = evaluate(b);
    if (fa == 0.0) {
      push(a);
      continue;
    }
    if (fa * fb >= 0.0) continue;
    for (int iter = 0; iter < 200; ++iter) {
      const double m = 0.5 * (a + b);
      const double fm = evaluate(m);
      if (std::abs(fm) < kZeroCrossingTolerance || m == a || m == b) {
        a = b = m;
        break;
      }
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    push(0.5 * (a + b));
  }
  if (evaluate(hi) == 0.0) push(hi);
  return roots;
}

Tesla PlayOperator::update(Tesla h) {
  state_ = std::clamp(state_, h - halfwidth_, h + halfwidth_);
  return state_;
}

double NoiseModel::density(Hertz offset) const {
  const double df = std::abs(offset);
  if (flicker_corner == 0.0) return floor_asd;
  if (df == 0.0) return std::numeric_limits<double>::infinity();
  return floor_asd * std::sqrt(1.0 + flicker_corner / df);
}

void SensorParams::validate() const {
  if (!(f_res > 0.0)) throw ConfigError("sensor: f_res must be > 0");
  if (!(drive_rms > 0.0)) throw ConfigError("sensor: drive_rms must be > 0");
  if (!(reference_drive_rms > 0.0)) throw ConfigError("sensor: reference drive must be > 0");
  if (!(noise.floor_asd >= 0.0)) throw ConfigError("noise: floor_asd must be >= 0");
  if (!(noise.flicker_corner >= 0.0)) throw ConfigError("noise: flicker_corner must be >= 0");
}

Volt SaturatingCoefficients::operator()(const SaturatingCurveSpec& spec, Tesla h) const {
  const double x = h - spec.center_zero;
  return amplitude * std::tanh(x / spec.saturation_width) + linear * x + quadratic * x * x;
}

SaturatingCoefficients solve_saturating_curve(const SaturatingCurveSpec& spec) {
  if (!(spec.saturation_width > 0.0)) throw ConfigError("curve builder: saturation width must be > 0");
  if (!(spec.outer_zero_low < spec.center_zero && spec.center_zero < spec.outer_zero_high))
    throw ConfigError("curve builder: zeros must satisfy low < center < high");
  const double s = spec.saturation_width;
  auto value_row = [&](Tesla h) {
    const double x = h - spec.center_zero;
    return Eigen::RowVector3d(std::tanh(x / s), x, x * x);
  };
  const double xo = spec.operating_bias - spec.center_zero;
  const double sech = 1.0 / std::cosh(xo / s);

  Eigen::Matrix3d system;
  system.row(0) << sech * sech / s, 1.0, 2.0 * xo;
  system.row(1) = value_row(spec.outer_zero_low);
  system.row(2) = value_row(spec.outer_zero_high);
  const Eigen::Vector3d rhs(spec.sensitivity, 0.0, 0.0);
  const Eigen::Vector3d coef = system.colPivHouseholderQr().solve(rhs);
  if (!coef.allFinite() || (system * coef - rhs).norm() > 1e-6 * rhs.norm())
    throw ConfigError("curve builder: anchor system is singular");
  return {coef(0), coef(1), coef(2)};
}

TransferCurve build_saturating_curve(const SaturatingCurveSpec& spec) {
  if (!(spec.knot_spacing > 0.0) || !(spec.span > spec.knot_spacing))
    throw ConfigError("curve builder: invalid knot spacing or span");
  const auto coef = solve_saturating_curve(spec);

  const auto half = static_cast<long>(std::llround(spec.span / spec.knot_spacing));
  std::vector<Tesla> h;
  h.reserve(static_cast<std::size_t>(2 * half + 4));
  for (long j = -half; j <= half; ++j) h.push_back(static_cast<double>(j) * spec.knot_spacing);

  // Anchor zeros become exact knots.
  const std::vector<Tesla> zeros{spec.outer_zero_low, spec.center_zero, spec.outer_zero_high};
  for (Tesla z : zeros) {
    if (z <= h.front() || z >= h.back()) throw ConfigError("curve builder: anchor zero outside span");
    auto it = std::lower_bound(h.begin(), h.end(), z);
    const double snap = 1e-3 * spec.knot_spacing;
    if (it != h.end() && std::abs(*it - z) < snap)
      *it = z;
    else if (it != h.begin() && std::abs(*(it - 1) - z) < snap)
      *(it - 1) = z;
    else
      h.insert(it, z);
  }

  Eigen::VectorXd hv = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  Eigen::VectorXd cv(hv.size());
  for (Eigen::Index k = 0; k < hv.size(); ++k) {
    const bool is_zero = std::find(zeros.begin(), zeros.end(), hv(k)) != zeros.end();
    cv(k) = is_zero ? 0.0 : coef(spec, hv(k));
  }
  return TransferCurve(hv, cv, spec.hysteresis_halfwidth, spec.label);
}

std::vector<std::string> preset_names() {
  return {std::string(kPresetMlPaper), std::string(kPresetSlPaper)};
}

SaturatingCurveSpec preset_curve_spec(std::string_view name) {
  SaturatingCurveSpec spec;
  if (name == kPresetMlPaper) {
    spec.label = std::string(kPresetMlPaper);
    return spec;  // defaults are the multilayer anchors
  }
  if (name == kPresetSlPaper) {
    // Single-layer sensor: twice the saturation field, 43 kV/T, open minor loop.
    spec.center_zero = -1.0e-6;
    spec.operating_bias = -0.6e-6;
    spec.outer_zero_low = -140.0e-6;
    spec.outer_zero_high = 136.0e-6;
    spec.sensitivity = 43e3;
    spec.saturation_width = 40e-6;
    spec.span = 160e-6;
    spec.hysteresis_halfwidth = 0.5e-6;
    spec.label = std::string(kPresetSlPaper);
    return spec;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

SensorParams preset(std::string_view name) {
  const auto spec = preset_curve_spec(name);
  SensorParams params{build_saturating_curve(spec), 509.25e3, 0.7, 0.7, 0.0, NoiseModel{}};
  params.f_res = 509.25e3;
  params.drive_rms = 0.7;
  params.reference_drive_rms = 0.7;
  params.operating_bias = spec.operating_bias;
  if (name == kPresetMlPaper) {
    // Least-squares fit of the flicker law to the 10/33/70 Hz equivalent
    // magnetic noise densities, converted to volts with 175 kV/T.
    params.noise.floor_asd = 4.640923e-7;
    params.noise.flicker_corner = 74.0343;
  } else {
    params.noise.floor_asd = 3.0e-6;
    params.noise.flicker_corner = 18.3;
  }
  return params;
}

void write_curve_csv(std::ostream& out, const TransferCurve& curve) {
  Eigen::MatrixXd rows(curve.knots_h().size(), 2);
  rows.col(0) = curve.knots_h();
  rows.col(1) = curve.knots_c();
  csv::write(out, {"h_tesla", "c_volt"}, rows);
}

TransferCurve read_curve_csv(std::istream& in, std::string label) {
  const auto table = csv::read(in, {"h_tesla", "c_volt"});
  try {
    return TransferCurve(table.data.col(0), table.data.col(1), 0.0, std::move(label));
  } catch (const ConfigError& e) {
    throw DataError(std::string("curve CSV: ") + e.what());
  }
}

}  // namespace mesim
