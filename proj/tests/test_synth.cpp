#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "doctest.h"

#include "mesim/spectrum.hpp"
#include "mesim/synth.hpp"

using namespace mesim;

namespace {

double mean_asd(const SpectrumReport& s, double lo, double hi) {
  double acc = 0.0;
  int n = 0;
  for (Eigen::Index k = 0; k < s.frequency.size(); ++k)
    if (s.frequency(k) >= lo && s.frequency(k) <= hi) {
      acc += s.asd(k) * s.asd(k);
      ++n;
    }
  return std::sqrt(acc / n);
}

SensorParams quiet_ml() {
  SensorParams s = preset(kPresetMlPaper);
  s.noise = NoiseModel{};
  return s;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("AM sidebands match the closed form and an independent FFT") {
  const SensorParams s = quiet_ml();
  ChainConfig chain;
  chain.fs = 2.048e6;
  chain.duration = 1.0;
  chain.quantize = false;
  FieldProgram program;
  program.bias = -3.1e-6;
  program.tones.push_back({10.0, 1e-9, 0.0});

  const RawTrace raw = synthesize_passband(s, program, chain);
  WindowConfig cfg;
  cfg.segment_length = raw.samples.size();
  cfg.window = WindowType::Rectangular;
  const SpectrumReport spec = spectrum(raw.samples, raw.fs, cfg);

  const double S = s.sensitivity(program.bias);
  const double expected = chain.gain * kSqrt2 * S * 1e-9 / 2.0;
  const double lower = spec.peak_amplitude(s.f_res - 10.0, 0);
  const double upper = spec.peak_amplitude(s.f_res + 10.0, 0);
  CHECK(lower == doctest::Approx(expected).epsilon(0.01));
  CHECK(upper == doctest::Approx(expected).epsilon(0.01));

  // Analytic AM waveform, transformed without the library's spectrum code.
  const Eigen::Index n = raw.samples.size();
  std::vector<double> x(static_cast<std::size_t>(n));
  const double c0 = s.carrier(program.bias);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / chain.fs;
    x[static_cast<std::size_t>(k)] = chain.gain * kSqrt2 * (c0 + S * 1e-9 * std::sin(2 * kPi * 10.0 * t)) *
                                     std::cos(2 * kPi * s.f_res * t);
  }
  std::vector<std::complex<double>> X;
  Eigen::FFT<double> fft;
  fft.fwd(X, x);
  const auto bin = [&](double f) { return static_cast<std::size_t>(std::llround(f * chain.duration)); };
  const double ref_lower = 2.0 * std::abs(X[bin(s.f_res - 10.0)]) / static_cast<double>(n);
  const double ref_upper = 2.0 * std::abs(X[bin(s.f_res + 10.0)]) / static_cast<double>(n);
  CHECK(ref_lower == doctest::Approx(expected).epsilon(0.01));
  CHECK(lower == doctest::Approx(ref_lower).epsilon(0.01));
  CHECK(upper == doctest::Approx(ref_upper).epsilon(0.01));
  CHECK(spec.peak_amplitude(s.f_res, 0) == doctest::Approx(chain.gain * kSqrt2 * std::abs(c0)).epsilon(1e-6));
}

TEST_CASE("baseband envelope sidebands read S h / 2") {
  const SensorParams s = quiet_ml();
  ChainConfig chain;
  chain.fs = 2000.0;
  chain.duration = 10.0;
  FieldProgram program;
  program.bias = -3.1e-6;
  program.tones.push_back({10.0, 1e-9, 0.3});
  const BasebandTrace env = synthesize_baseband(s, program, chain);
  WindowConfig cfg;
  cfg.segment_length = env.samples.size();
  cfg.window = WindowType::Rectangular;
  const SpectrumReport spec = spectrum(env.samples, env.fs, cfg);
  const double expected = chain.gain * s.sensitivity(-3.1e-6) * 1e-9 / 2.0;
  CHECK(spec.peak_amplitude(10.0, 0) == doctest::Approx(expected).epsilon(0.01));
  CHECK(spec.peak_amplitude(-10.0, 0) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("carrier noise has the requested two-sided density") {
  NoiseModel m{1e-6, 0.0, 42};
  const Eigen::VectorXcd z = carrier_noise(m, 1e4, 1 << 18, 5e3);
  WindowConfig cfg;
  cfg.segment_length = 4096;
  const SpectrumReport spec = spectrum(z, 1e4, cfg);
  CHECK(mean_asd(spec, -4000, 4000) == doctest::Approx(1e-6).epsilon(0.02));

  m.flicker_corner = 100.0;
  const SpectrumReport pink = spectrum(carrier_noise(m, 1e4, 1 << 18, 5e3), 1e4, cfg);
  CHECK(mean_asd(pink, 9.0, 11.0) == doctest::Approx(m.density(10.0)).epsilon(0.1));
  CHECK(mean_asd(pink, 2000.0, 3000.0) == doctest::Approx(1e-6).epsilon(0.03));
}

TEST_CASE("passband noise has one-sided density gain times the floor") {
  SensorParams s = preset(kPresetMlPaper);
  s.noise.flicker_corner = 0.0;
  s.noise.seed = 3;
  ChainConfig chain;
  chain.duration = 0.25;
  chain.quantize = false;
  FieldProgram program;
  program.bias = -3.5e-6;  // carrier nulled
  const RawTrace raw = synthesize_passband(s, program, chain);
  WindowConfig cfg;
  cfg.segment_length = 1 << 14;
  const SpectrumReport spec = spectrum(raw.samples, raw.fs, cfg);
  CHECK(mean_asd(spec, 300e3, 700e3) == doctest::Approx(chain.gain * s.noise.floor_asd).epsilon(0.03));
}

TEST_CASE("synthesis is deterministic in the seed") {
  SensorParams s = preset(kPresetMlPaper);
  ChainConfig chain;
  chain.fs = 2000.0;
  chain.duration = 2.0;
  FieldProgram program;
  program.bias = -3.1e-6;
  s.noise.seed = 11;
  const auto a = synthesize_baseband(s, program, chain);
  const auto b = synthesize_baseband(s, program, chain);
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
  s.noise.seed = 12;
  const auto c = synthesize_baseband(s, program, chain);
  CHECK((a.samples - c.samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("quantizer is mid-tread and saturates") {
  Eigen::VectorXd x(5);
  x << 0.0, 0.49, 0.51, 10.0, -10.0;
  const double step = adc_step(4, 1.0);
  const Eigen::VectorXd q = quantize(x / 1.0 * step, 4, 1.0);
  CHECK(q(0) == 0.0);
  CHECK(q(1) == 0.0);
  CHECK(q(2) == doctest::Approx(step));
  CHECK(q(3) == doctest::Approx(7 * step));
  CHECK(q(4) == doctest::Approx(-8 * step));
  CHECK_THROWS_AS(quantize(x, 1, 1.0), ConfigError);
  CHECK_THROWS_AS(quantize(x, 8, 0.0), ConfigError);
}

TEST_CASE("quantization error power is LSB^2 / 12 on a busy signal") {
  const int n = 1 << 16;
  Eigen::VectorXd x(n);
  for (int k = 0; k < n; ++k) x(k) = 0.7 * std::sin(0.01234567 * k) + 0.2 * std::sin(0.3 * k + 1.0);
  const double step = adc_step(10, 1.0);
  const Eigen::VectorXd e = quantize(x, 10, 1.0) - x;
  CHECK(e.squaredNorm() / n == doctest::Approx(step * step / 12.0).epsilon(0.05));
}

TEST_CASE("passband synthesis rejects undersampling") {
  ChainConfig chain;
  chain.fs = 900e3;
  CHECK_THROWS_AS(synthesize_passband(quiet_ml(), FieldProgram{}, chain), ConfigError);
}

TEST_CASE("trace CSV and binary round trip") {
  RawTrace t;
  t.fs = 1000.0;
  t.t0 = 0.5;
  t.samples = Eigen::VectorXd::LinSpaced(50, -1.0, 1.0);
  std::stringstream csv_io, bin_io;
  write_trace_csv(csv_io, t);
  write_trace_binary(bin_io, t);
  const RawTrace a = read_trace_csv(csv_io);
  const RawTrace b = read_trace_binary(bin_io);
  CHECK(a.fs == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(a.t0 == 0.5);
  CHECK((a.samples - t.samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.fs == 1000.0);
  CHECK((b.samples - t.samples).cwiseAbs().maxCoeff() == 0.0);
}

}
