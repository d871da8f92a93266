#include "mesim/lockin.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "mesim/csv.hpp"

namespace mesim {

void DemodConfig::validate(Hertz fs_in) const {
  if (order < 1) throw ConfigError("demod: order must be >= 1");
  if (!(b_3db > 0.0) || !(b_3db < fs_in / 4.0))
    throw ConfigError("demod: b_3db must lie in (0, fs/4) = (0, " + format_double(fs_in / 4.0) + ") Hz");
  if (!(decimate_to >= 4.0 * b_3db))
    throw ConfigError("demod: decimate_to must be >= 4 * b_3db = " + format_double(4.0 * b_3db) + " Hz");
  if (decimate_to > fs_in)
    throw ConfigError("demod: decimate_to exceeds the input rate " + format_double(fs_in) + " Hz");
}

Hertz stage_cutoff(const DemodConfig& cfg) {
  return cfg.b_3db / std::sqrt(std::exp2(1.0 / cfg.order) - 1.0);
}

Seconds stage_time_constant(const DemodConfig& cfg) { return 1.0 / (2.0 * kPi * stage_cutoff(cfg)); }

double analog_response(const DemodConfig& cfg, Hertz f) {
  const double x = f / stage_cutoff(cfg);
  return std::pow(1.0 + x * x, -0.5 * cfg.order);
}

Complex discrete_response(const DemodConfig& cfg, Hertz fs, Hertz f) {
  const double alpha = -std::expm1(-2.0 * kPi * stage_cutoff(cfg) / fs);
  const Complex z1 = std::polar(1.0, -2.0 * kPi * f / fs);
  const Complex stage = alpha / (1.0 - (1.0 - alpha) * z1);
  return std::pow(stage, cfg.order);
}

EnbwResult enbw(const DemodConfig& cfg, int intervals) {
  if (cfg.order < 1) throw ConfigError("enbw: order must be >= 1");
  if (!(cfg.b_3db > 0.0)) throw ConfigError("enbw: b_3db must be > 0");
  if (intervals < 2) intervals = 2;
  if (intervals % 2) ++intervals;
  // f = fc tan(theta): |H|^2 df = fc cos^(2 order - 2)(theta) dtheta on [0, pi/2].
  const double fc = stage_cutoff(cfg);
  const double h = 0.5 * kPi / intervals;
  auto integrand = [&](double theta) { return std::pow(std::cos(theta), 2 * cfg.order - 2); };
  double sum = integrand(0.0) + integrand(0.5 * kPi);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
  const double enbw_hz = fc * sum * h / 3.0;
  return {enbw_hz, enbw_hz / cfg.b_3db};
}

Seconds settling_time(const DemodConfig& cfg) {
  return kSettlingTimeConstants * cfg.order * stage_time_constant(cfg);
}

LockIn::LockIn(const DemodConfig& cfg, Hertz fs_in, Input input, Seconds t0)
    : cfg_(cfg), fs_in_(fs_in), input_(input), t0_(t0) {
  if (!(fs_in > 0.0)) throw ConfigError("lock-in: input sample rate must be > 0");
  cfg.validate(fs_in);
  if (input == Input::Passband && !(cfg.f_ref > 0.0 && cfg.f_ref < fs_in / 2.0))
    throw ConfigError("lock-in: f_ref = " + format_double(cfg.f_ref) +
                      " Hz is not representable below Nyquist (" + format_double(fs_in / 2.0) + " Hz)");
  decimation_ = std::max<Eigen::Index>(1, std::llround(fs_in / cfg.decimate_to));
  alpha_ = -std::expm1(-2.0 * kPi * stage_cutoff(cfg) / fs_in);
  cycles_per_sample_ = input == Input::Passband ? cfg.f_ref / fs_in : 0.0;
  stages_ = Eigen::VectorXcd::Zero(cfg.order);
}

void LockIn::push(Complex x) {
  for (Eigen::Index s = 0; s < stages_.size(); ++s) {
    stages_(s) += alpha_ * (x - stages_(s));
    x = stages_(s);
  }
  if (consumed_ % decimation_ == 0) out_.push_back(x);
  ++consumed_;
}

void LockIn::process(std::span<const double> passband) {
  if (input_ != Input::Passband) throw ConfigError("lock-in: configured for envelope input");
  for (double v : passband) {
    const double theta = 2.0 * kPi * std::fmod(cycles_per_sample_ * static_cast<double>(consumed_), 1.0);
    push(Complex(v * std::cos(theta), -v * std::sin(theta)) * kSqrt2);
  }
}

void LockIn::process(std::span<const Complex> envelope) {
  if (input_ != Input::Envelope) throw ConfigError("lock-in: configured for passband input");
  for (const Complex& v : envelope) push(v);
}

DemodTrace LockIn::take() {
  DemodTrace trace;
  trace.fs_out = output_rate();
  trace.t0 = t0_ + static_cast<double>(emitted_) / trace.fs_out;
  trace.samples = Eigen::Map<const Eigen::VectorXcd>(out_.data(), static_cast<Eigen::Index>(out_.size()));
  const auto settled = static_cast<Eigen::Index>(std::ceil(settling_time(cfg_) * trace.fs_out));
  trace.settling_index = std::clamp<Eigen::Index>(settled - emitted_, 0, trace.samples.size());
  emitted_ += trace.samples.size();
  out_.clear();
  return trace;
}

DemodTrace demodulate(const RawTrace& raw, const DemodConfig& cfg) {
  LockIn lockin(cfg, raw.fs, LockIn::Input::Passband, raw.t0);
  lockin.process(std::span<const double>(raw.samples.data(), static_cast<std::size_t>(raw.samples.size())));
  return lockin.take();
}

DemodTrace demodulate(const BasebandTrace& envelope, const DemodConfig& cfg) {
  LockIn lockin(cfg, envelope.fs, LockIn::Input::Envelope, envelope.t0);
  lockin.process(
      std::span<const Complex>(envelope.samples.data(), static_cast<std::size_t>(envelope.samples.size())));
  return lockin.take();
}

Eigen::VectorXd unwrapped_phase(const Eigen::VectorXcd& z, double reference_phase) {
  Eigen::VectorXd phase(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (k == 0) {
      phase(k) = std::remainder(std::arg(z(k)) - reference_phase, 2.0 * kPi);
      continue;
    }
    const double step = std::remainder(std::arg(z(k)) - std::arg(z(k - 1)), 2.0 * kPi);
    phase(k) = phase(k - 1) + step;
  }
  return phase;
}

Eigen::VectorXd unwrap_phase(const DemodTrace& demod, double reference_phase) {
  const Eigen::VectorXd phase = unwrapped_phase(demod.samples, reference_phase);
  Eigen::VectorXd signed_amplitude(demod.samples.size());
  double sign = 1.0;
  for (Eigen::Index k = 0; k < phase.size(); ++k) {
    // Distance from the nearest even multiple of pi decides the half-plane.
    const double folded = std::abs(std::remainder(phase(k), 2.0 * kPi));
    if (folded < 0.5 * kPi)
      sign = 1.0;
    else if (folded > 0.5 * kPi)
      sign = -1.0;
    signed_amplitude(k) = sign * std::abs(demod.samples(k));
  }
  return signed_amplitude;
}

void write_demod_csv(std::ostream& out, const DemodTrace& demod) {
  Eigen::MatrixXd rows(demod.samples.size(), 3);
  for (Eigen::Index k = 0; k < demod.samples.size(); ++k) {
    rows(k, 0) = demod.time(k);
    rows(k, 1) = demod.samples(k).real();
    rows(k, 2) = demod.samples(k).imag();
  }
  csv::write(out, {"t_s", "re_v", "im_v"}, rows);
}

DemodTrace read_demod_csv(std::istream& in) {
  const auto table = csv::read(in, {"t_s", "re_v", "im_v"});
  DemodTrace demod;
  const Eigen::VectorXd t = table.data.col(0);
  demod.fs_out = infer_sample_rate(t);
  demod.t0 = t(0);
  demod.samples.resize(table.data.rows());
  for (Eigen::Index k = 0; k < table.data.rows(); ++k)
    demod.samples(k) = Complex(table.data(k, 1), table.data(k, 2));
  demod.settling_index = 0;
  return demod;
}

}  // namespace mesim
