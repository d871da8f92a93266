#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mesim/common.hpp"
#include "mesim/transduction.hpp"

namespace mesim {

struct Tone {
  Hertz frequency = 10.0;
  Tesla amplitude = 0.0;  // peak
  double phase = 0.0;     // rad, h(t) = A sin(2 pi f t + phase)
};

struct FieldStep {
  Seconds start = 0.0;
  Tesla level = 0.0;
};

/// Applied field H(t) = bias + sum of tones + staircase level active at t.
struct FieldProgram {
  Tesla bias = 0.0;
  std::vector<Tone> tones;
  std::vector<FieldStep> steps;

  Tesla at(Seconds t) const;
  Tesla step_level(Seconds t) const;
  /// Throws ConfigError for non-positive tone frequencies, tones above
  /// `max_tone_frequency`, or non-increasing step starts.
  void validate(Hertz max_tone_frequency) const;
};

struct ChainConfig {
  Hertz fs = 2.037e6;
  double gain = 10.0;
  int adc_bits = 14;
  Volt adc_fullscale = 1.0;
  Seconds duration = 1.0;
  bool quantize = true;

  Eigen::Index length() const { return static_cast<Eigen::Index>(std::llround(fs * duration)); }
  void validate() const;
};

struct TraceMeta {
  std::uint64_t seed = 0;
  std::string mode;
  std::string sensor;
  Hertz f_res = 0.0;
  double gain = 1.0;
  int adc_bits = 0;
  Volt adc_fullscale = 0.0;
};

/// Uniformly sampled coil voltage after gain and ADC.
struct RawTrace {
  Hertz fs = 1.0;
  Seconds t0 = 0.0;
  Eigen::VectorXd samples;
  TraceMeta meta;

  Seconds time(Eigen::Index k) const { return t0 + static_cast<double>(k) / fs; }
};

/// Complex envelope sampled at the envelope rate; RMS-referred like the curve.
struct BasebandTrace {
  Hertz fs = 1.0;
  Seconds t0 = 0.0;
  Eigen::VectorXcd samples;
  TraceMeta meta;

  Seconds time(Eigen::Index k) const { return t0 + static_cast<double>(k) / fs; }
};

/// 4 f_res rounded to a whole multiple of 1 kHz.
Hertz default_passband_rate(Hertz f_res);
/// 1.5x the peak output-referred carrier at zero applied field.
Volt default_adc_fullscale(const SensorParams& sensor, double gain);

/// Passband coil voltage:
///   x_k = Q(gain * (sqrt2 C(H(t_k)) cos(2 pi f_res t_k) + sqrt2 Re(z_k e^{i 2 pi f_res t_k})))
/// with z carrier-centered complex noise (see carrier_noise) and Q the ADC.
RawTrace synthesize_passband(const SensorParams& sensor, const FieldProgram& program, const ChainConfig& chain);

/// Complex envelope e_k = gain * (C(H(t_k)) + z_k). No ADC is applied on this path.
BasebandTrace synthesize_baseband(const SensorParams& sensor, const FieldProgram& program,
                                  const ChainConfig& chain);

/// Complex baseband noise whose two-sided density at offset f is
/// model.density(f) for |f| <= band_limit and zero beyond; the zero-offset bin
/// uses the density of the first nonzero bin. Deterministic in model.seed.
Eigen::VectorXcd carrier_noise(const NoiseModel& model, Hertz fs, Eigen::Index n, Hertz band_limit);

inline double adc_step(int bits, double fullscale) { return fullscale / std::ldexp(1.0, bits - 1); }

/// Mid-tread uniform quantizer with saturation to codes [-2^(b-1), 2^(b-1)-1].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> quantize(const Eigen::MatrixBase<Derived>& x,
                                                                    int bits,
                                                                    typename Derived::Scalar fullscale) {
  using Scalar = typename Derived::Scalar;
  if (bits < 2 || bits > 32) throw ConfigError("quantize: adc_bits must lie in [2, 32]");
  if (!(fullscale > Scalar(0))) throw ConfigError("quantize: adc_fullscale must be > 0");
  const Scalar step = static_cast<Scalar>(adc_step(bits, static_cast<double>(fullscale)));
  const Scalar lo = -std::ldexp(Scalar(1), bits - 1);
  const Scalar hi = std::ldexp(Scalar(1), bits - 1) - Scalar(1);
  return x.derived()
      .unaryExpr([=](Scalar v) {
        Scalar code = std::round(v / step);
        if (code < lo) code = lo;
        if (code > hi) code = hi;
        return code * step;
      })
      .eval();
}

RawTrace quantize(const RawTrace& trace, int bits, Volt fullscale);

// CSV `t_s,v_volt`.
void write_trace_csv(std::ostream& out, const RawTrace& trace);
RawTrace read_trace_csv(std::istream& in);

// Binary container, little-endian:
//   magic "MESIMTR1" | u32 version (1) | u32 reserved | f64 fs | f64 t0 | u64 length | f64 samples[length]
void write_trace_binary(std::ostream& out, const RawTrace& trace);
RawTrace read_trace_binary(std::istream& in);

/// Sample rate implied by a uniformly spaced time column; throws DataError if
/// the spacing is not uniform to 1e-6 relative.
Hertz infer_sample_rate(const Eigen::VectorXd& t);

}  // namespace mesim
