#include "mesim/synth.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "mesim/csv.hpp"

namespace mesim {
namespace {

std::string seconds_text(Seconds t) {
  std::ostringstream os;
  os << t << " s";
  return os.str();
}

// Evaluates the total field sample by sample, feeding the hysteresis play
// operator, and reports the first sample that leaves the curve span.
class FieldSampler {
 public:
  FieldSampler(const SensorParams& sensor, const FieldProgram& program, Hertz fs)
      : sensor_(sensor),
        program_(program),
        fs_(fs),
        play_(sensor.curve.hysteresis_halfwidth(), program.at(0.0)) {}

  Volt carrier(Eigen::Index k) {
    const Seconds t = static_cast<double>(k) / fs_;
    const Tesla h = program_.at(t);
    const Tesla state = play_.update(h);
    const auto& curve = sensor_.curve;
    if (!curve.contains(h) || !curve.contains(state))
      throw RangeError("applied field leaves the curve span " + curve.span_description() + " at t = " +
                       seconds_text(t) + " (H = " + format_double(h / units::micro) + " uT)");
    return sensor_.drive_scale() * curve.evaluate(state);
  }

 private:
  const SensorParams& sensor_;
  const FieldProgram& program_;
  Hertz fs_;
  PlayOperator play_;
};

TraceMeta make_meta(const SensorParams& sensor, const ChainConfig& chain, const char* mode) {
  TraceMeta meta;
  meta.seed = sensor.noise.seed;
  meta.mode = mode;
  meta.sensor = sensor.curve.label();
  meta.f_res = sensor.f_res;
  meta.gain = chain.gain;
  meta.adc_bits = chain.quantize ? chain.adc_bits : 0;
  meta.adc_fullscale = chain.quantize ? chain.adc_fullscale : 0.0;
  return meta;
}

}  // namespace

Tesla FieldProgram::step_level(Seconds t) const {
  auto it = std::upper_bound(steps.begin(), steps.end(), t,
                             [](Seconds value, const FieldStep& s) { return value < s.start; });
  if (it == steps.begin()) return 0.0;
  return std::prev(it)->level;
}

Tesla FieldProgram::at(Seconds t) const {
  Tesla h = bias + step_level(t);
  for (const auto& tone : tones) h += tone.amplitude * std::sin(2.0 * kPi * tone.frequency * t + tone.phase);
  return h;
}

void FieldProgram::validate(Hertz max_tone_frequency) const {
  for (const auto& tone : tones) {
    if (!(tone.frequency > 0.0)) throw ConfigError("field program: tone frequency must be > 0");
    if (tone.frequency > max_tone_frequency)
      throw ConfigError("field program: tone at " + format_double(tone.frequency) +
                        " Hz exceeds the sideband band limit of " + format_double(max_tone_frequency) + " Hz");
    if (!std::isfinite(tone.amplitude)) throw ConfigError("field program: tone amplitude not finite");
  }
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (!(steps[i].start > steps[i - 1].start))
      throw ConfigError("field program: step start times must be strictly increasing");
}

void ChainConfig::validate() const {
  if (!(fs > 0.0)) throw ConfigError("chain: fs must be > 0");
  if (!(duration > 0.0)) throw ConfigError("chain: duration must be > 0");
  if (!(gain > 0.0)) throw ConfigError("chain: gain must be > 0");
  if (adc_bits < 2 || adc_bits > 32) throw ConfigError("chain: adc_bits must lie in [2, 32]");
  if (!(adc_fullscale > 0.0)) throw ConfigError("chain: adc_fullscale must be > 0");
}

Hertz default_passband_rate(Hertz f_res) { return 1e3 * std::round(4.0 * f_res / 1e3); }

Volt default_adc_fullscale(const SensorParams& sensor, double gain) {
  Volt c0 = 0.0;
  if (sensor.curve.contains(0.0)) c0 = std::abs(sensor.carrier(0.0));
  const Volt peak = gain * kSqrt2 * c0;
  return peak > 0.0 ? 1.5 * peak : 1.0;
}

RawTrace synthesize_passband(const SensorParams& sensor, const FieldProgram& program, const ChainConfig& chain) {
  sensor.validate();
  chain.validate();
  if (!(chain.fs > 2.0 * sensor.f_res))
    throw ConfigError("passband synthesis needs fs > 2 f_res (fs = " + format_double(chain.fs) +
                      " Hz, f_res = " + format_double(sensor.f_res) + " Hz)");
  program.validate(chain.fs / 2.0 - sensor.f_res);

  const Eigen::Index n = chain.length();
  const Hertz band = std::min(sensor.f_res, chain.fs / 2.0 - sensor.f_res);
  const Eigen::VectorXcd noise = carrier_noise(sensor.noise, chain.fs, n, band);
  const bool noisy = noise.size() == n && sensor.noise.enabled();

  RawTrace trace;
  trace.fs = chain.fs;
  trace.samples.resize(n);
  trace.meta = make_meta(sensor, chain, "passband");

  FieldSampler sampler(sensor, program, chain.fs);
  const double cycles_per_sample = sensor.f_res / chain.fs;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double theta = 2.0 * kPi * std::fmod(cycles_per_sample * static_cast<double>(k), 1.0);
    const double c = std::cos(theta);
    double v = sampler.carrier(k) * c;
    if (noisy) v += noise(k).real() * c - noise(k).imag() * std::sin(theta);
    trace.samples(k) = chain.gain * kSqrt2 * v;
  }
  if (chain.quantize) trace.samples = quantize(trace.samples, chain.adc_bits, chain.adc_fullscale);
  return trace;
}

BasebandTrace synthesize_baseband(const SensorParams& sensor, const FieldProgram& program,
                                  const ChainConfig& chain) {
  sensor.validate();
  if (!(chain.fs > 0.0)) throw ConfigError("chain: fs must be > 0");
  if (!(chain.duration > 0.0)) throw ConfigError("chain: duration must be > 0");
  if (!(chain.gain > 0.0)) throw ConfigError("chain: gain must be > 0");
  program.validate(chain.fs / 10.0);

  const Eigen::Index n = chain.length();
  const Eigen::VectorXcd noise = carrier_noise(sensor.noise, chain.fs, n, chain.fs / 2.0);

  BasebandTrace trace;
  trace.fs = chain.fs;
  trace.samples.resize(n);
  trace.meta = make_meta(sensor, chain, "baseband");
  trace.meta.adc_bits = 0;
  trace.meta.adc_fullscale = 0.0;

  FieldSampler sampler(sensor, program, chain.fs);
  for (Eigen::Index k = 0; k < n; ++k) trace.samples(k) = Complex(sampler.carrier(k), 0.0);
  if (noise.size() == n) trace.samples += noise;
  trace.samples *= chain.gain;
  return trace;
}

RawTrace quantize(const RawTrace& trace, int bits, Volt fullscale) {
  RawTrace out = trace;
  out.samples = quantize(trace.samples, bits, fullscale);
  out.meta.adc_bits = bits;
  out.meta.adc_fullscale = fullscale;
  return out;
}

Hertz infer_sample_rate(const Eigen::VectorXd& t) {
  const Eigen::Index n = t.size();
  if (n < 2) throw DataError("trace needs at least two samples to infer the sample rate");
  const double dt = (t(n - 1) - t(0)) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw DataError("trace time column must be increasing");
  for (Eigen::Index k = 1; k < n; ++k) {
    const double step = t(k) - t(k - 1);
    if (std::abs(step - dt) > 1e-6 * dt)
      throw DataError("line " + std::to_string(k + 2) + ": non-uniform sample spacing");
  }
  return 1.0 / dt;
}

void write_trace_csv(std::ostream& out, const RawTrace& trace) {
  Eigen::MatrixXd rows(trace.samples.size(), 2);
  for (Eigen::Index k = 0; k < trace.samples.size(); ++k) rows(k, 0) = trace.time(k);
  rows.col(1) = trace.samples;
  csv::write(out, {"t_s", "v_volt"}, rows);
}

RawTrace read_trace_csv(std::istream& in) {
  const auto table = csv::read(in, {"t_s", "v_volt"});
  RawTrace trace;
  const Eigen::VectorXd t = table.data.col(0);
  trace.fs = infer_sample_rate(t);
  trace.t0 = t(0);
  trace.samples = table.data.col(1);
  return trace;
}

namespace {

constexpr char kMagic[8] = {'M', 'E', 'S', 'I', 'M', 'T', 'R', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>)
    bits = std::bit_cast<std::uint64_t>(value);
  else
    bits = static_cast<std::uint64_t>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError("binary trace: truncated input");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if constexpr (std::is_same_v<T, double>)
    return std::bit_cast<double>(bits);
  else
    return static_cast<T>(bits);
}

}  // namespace

void write_trace_binary(std::ostream& out, const RawTrace& trace) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, 0);
  put_le<double>(out, trace.fs);
  put_le<double>(out, trace.t0);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(trace.samples.size()));
  for (Eigen::Index k = 0; k < trace.samples.size(); ++k) put_le<double>(out, trace.samples(k));
}

RawTrace read_trace_binary(std::istream& in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("binary trace: bad magic");
  const auto version = get_le<std::uint32_t>(in);
  if (version != 1) throw DataError("binary trace: unsupported version " + std::to_string(version));
  (void)get_le<std::uint32_t>(in);
  RawTrace trace;
  trace.fs = get_le<double>(in);
  trace.t0 = get_le<double>(in);
  const auto n = get_le<std::uint64_t>(in);
  if (!(trace.fs > 0.0)) throw DataError("binary trace: fs must be > 0");
  trace.samples.resize(static_cast<Eigen::Index>(n));
  for (std::uint64_t k = 0; k < n; ++k) trace.samples(static_cast<Eigen::Index>(k)) = get_le<double>(in);
  return trace;
}

}  // namespace mesim
