#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mesim/common.hpp"
#include "mesim/synth.hpp"

namespace mesim {

struct DemodConfig {
  Hertz f_ref = 509.25e3;
  int order = 4;
  Hertz b_3db = 7.0;
  Hertz decimate_to = 1000.0;

  /// Checks the filter settings against an input sample rate.
  void validate(Hertz fs_in) const;
};

// The low-pass is a cascade of `order` identical single-pole stages. Each
// stage cutoff is b_3db / sqrt(2^(1/order) - 1), which places the overall
// -3 dB point of the cascade at b_3db.
Hertz stage_cutoff(const DemodConfig& cfg);
Seconds stage_time_constant(const DemodConfig& cfg);

/// |H(f)| of the continuous-time cascade.
double analog_response(const DemodConfig& cfg, Hertz f);
/// Frequency response of the implemented recursive cascade running at `fs`.
Complex discrete_response(const DemodConfig& cfg, Hertz fs, Hertz f);

struct EnbwResult {
  Hertz enbw = 0.0;
  double nep_ratio = 0.0;  // enbw / b_3db
};

/// Equivalent noise bandwidth: integral of |H(f)|^2 / |H(0)|^2 over [0, inf),
/// evaluated with composite Simpson after the substitution f = fc tan(theta).
EnbwResult enbw(const DemodConfig& cfg, int intervals = 4096);

/// Statistics skip the first 7 cascade time constants (order * stage tau each).
inline constexpr double kSettlingTimeConstants = 7.0;
Seconds settling_time(const DemodConfig& cfg);

struct DemodTrace {
  Hertz fs_out = 1.0;
  Seconds t0 = 0.0;
  Eigen::VectorXcd samples;
  Eigen::Index settling_index = 0;

  Seconds time(Eigen::Index k) const { return t0 + static_cast<double>(k) / fs_out; }
};

/// Streaming lock-in. Passband input is mixed with exp(-i 2 pi f_ref t) and
/// scaled by sqrt2 so a carrier of peak A reads A / sqrt2; envelope input is
/// already at baseband and is only filtered. Outputs every D-th filtered
/// sample, D = round(fs_in / decimate_to).
class LockIn {
 public:
  enum class Input { Passband, Envelope };

  LockIn(const DemodConfig& cfg, Hertz fs_in, Input input, Seconds t0 = 0.0);

  void process(std::span<const double> passband);
  void process(std::span<const Complex> envelope);

  Hertz output_rate() const { return fs_in_ / static_cast<double>(decimation_); }
  Eigen::Index decimation() const { return decimation_; }
  /// Moves the accumulated output out; the filter state is kept.
  DemodTrace take();

 private:
  void push(Complex x);

  DemodConfig cfg_;
  Hertz fs_in_;
  Input input_;
  Seconds t0_;
  Eigen::Index decimation_;
  double alpha_;
  double cycles_per_sample_;
  Eigen::VectorXcd stages_;
  long long consumed_ = 0;
  Eigen::Index emitted_ = 0;
  std::vector<Complex> out_;
};

DemodTrace demodulate(const RawTrace& raw, const DemodConfig& cfg);
DemodTrace demodulate(const BasebandTrace& envelope, const DemodConfig& cfg);

/// Unwrapped phase of each sample relative to `reference_phase`.
Eigen::VectorXd unwrapped_phase(const Eigen::VectorXcd& z, double reference_phase = 0.0);

/// Signed amplitude |y| * sign, where the sign is negative while the unwrapped
/// phase sits beyond a +-pi/2 boundary (mod 2 pi). A sample exactly on a
/// boundary keeps the previous sign.
Eigen::VectorXd unwrap_phase(const DemodTrace& demod, double reference_phase = 0.0);

// CSV `t_s,re_v,im_v`.
void write_demod_csv(std::ostream& out, const DemodTrace& demod);
DemodTrace read_demod_csv(std::istream& in);

}  // namespace mesim
