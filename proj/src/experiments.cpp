#include "mesim/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mesim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Tesla> grid(Tesla lo, Tesla hi, Tesla step) {
  const auto n = static_cast<long long>(std::llround((hi - lo) / step));
  std::vector<Tesla> out;
  for (long long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
  return out;
}

std::string field_text(Tesla h) { return format_double(h / units::micro) + " uT"; }

void require_field(const Scenario& sc, Tesla h, const std::string& what) {
  if (!sc.sensor.curve.contains(h))
    throw ConfigError(what + " = " + field_text(h) + " lies outside the curve span " +
                      sc.sensor.curve.span_description());
}

void require_positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError(what + " = " + format_double(v) + ": expected a value > 0");
}

void require_dwell(const Scenario& sc, Seconds dwell, const std::string& what) {
  require_positive(dwell, what);
  const Seconds settle = settling_time(sc.demod);
  if (!(dwell > settle))
    throw ConfigError(what + " = " + format_double(dwell) + " s is shorter than the filter settling time " +
                      format_double(settle) + " s");
}

FieldProgram staircase_program(Tesla bias, const std::vector<Tesla>& levels, Seconds dwell) {
  FieldProgram program;
  program.bias = bias;
  for (std::size_t i = 0; i < levels.size(); ++i) program.steps.push_back({static_cast<double>(i) * dwell, levels[i]});
  return program;
}

std::vector<Plateau> schedule_of(const FieldProgram& program, Seconds dwell) {
  std::vector<Plateau> out;
  for (const auto& s : program.steps) out.push_back({s.start, s.start + dwell, program.bias + s.level});
  return out;
}

RawTrace signed_trace(const DemodTrace& demod) {
  RawTrace trace;
  trace.fs = demod.fs_out;
  trace.t0 = demod.t0;
  trace.samples = unwrap_phase(demod);
  trace.meta.mode = "demodulated";
  return trace;
}

// Plateau means of a stepped field program, in schedule order.
std::vector<Volt> plateau_means(const Scenario& sc, const RawTrace& trace, const std::vector<Plateau>& schedule) {
  const auto nep = enbw(sc.demod).nep_ratio;
  const auto report =
      lod_dc(trace.samples, trace.fs, trace.t0, schedule, 1.0, nep, sc.demod.b_3db, {settling_time(sc.demod), 0.0});
  std::vector<Volt> out;
  for (const auto& rec : report.plateaus) out.push_back(rec.excluded ? kNaN : rec.mean);
  return out;
}

bool near_bin(const SpectrumReport& spec, Hertz f) {
  const double k = f / spec.resolution();
  return std::abs(k - std::round(k)) < 0.01;
}

Eigen::Index tone_guard(const SpectrumReport& spec, Hertz f) { return near_bin(spec, f) ? 0 : 1; }

Volt sideband(const SpectrumReport& spec, Hertz f) { return sideband_amplitude(spec, 0.0, f, tone_guard(spec, f)); }

Scenario noise_free(const Scenario& sc) {
  Scenario clean = sc;
  clean.sensor.noise.floor_asd = 0.0;
  return clean;
}

ExperimentResult make_result(const Scenario& sc, Payload payload) {
  ExperimentResult result;
  result.report.scenario = sc;
  result.report.provenance.seed = sc.seed;
  result.report.provenance.mode = mode_name(sc.mode);
  result.report.payload = std::move(payload);
  return result;
}

}  // namespace

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::BiasSweep: return "bias_sweep";
    case Protocol::Staircase: return "staircase";
    case Protocol::AmplitudeSeries: return "amplitude_series";
    case Protocol::FrequencySeries: return "frequency_series";
    case Protocol::CarrierSuppression: return "carrier_suppression";
  }
  throw std::logic_error("unknown protocol");
}

Protocol parse_protocol(const std::string& name) {
  for (Protocol p : {Protocol::BiasSweep, Protocol::Staircase, Protocol::AmplitudeSeries, Protocol::FrequencySeries,
                     Protocol::CarrierSuppression})
    if (protocol_name(p) == name) return p;
  throw ConfigError("protocol = \"" + name +
                    "\": expected one of bias_sweep, staircase, amplitude_series, frequency_series, "
                    "carrier_suppression");
}

std::string mode_name(SynthMode m) { return m == SynthMode::Baseband ? "baseband" : "passband"; }

SynthMode parse_mode(const std::string& name) {
  if (name == "baseband") return SynthMode::Baseband;
  if (name == "passband") return SynthMode::Passband;
  throw ConfigError("mode = \"" + name + "\": expected baseband or passband");
}

std::vector<Tesla> alternating_levels(Tesla max_level, Tesla spacing) {
  std::vector<Tesla> out;
  const auto n = static_cast<int>(std::llround(max_level / spacing + 0.5));
  for (int i = 0; i < n; ++i) {
    const Tesla level = (i + 0.5) * spacing;
    out.push_back(level);
    out.push_back(-level);
  }
  return out;
}

Scenario default_scenario(Protocol protocol, const std::string& preset_name) {
  Scenario sc;
  sc.preset = preset_name;
  sc.sensor = preset(preset_name);
  sc.protocol = protocol;
  sc.chain.fs = default_passband_rate(sc.sensor.f_res);
  sc.chain.adc_fullscale = default_adc_fullscale(sc.sensor, sc.chain.gain);
  sc.demod.f_ref = sc.sensor.f_res;
  const Tesla bias = sc.sensor.operating_bias;
  sc.staircase.bias = bias;
  sc.amplitude_series.bias = bias;
  sc.frequency_series.bias = bias;
  sc.carrier_suppression.bias = bias;
  const auto spec = preset_curve_spec(preset_name);
  sc.carrier_suppression.target_minimum = spec.outer_zero_low;
  sc.carrier_suppression.range = std::min(125e-6, spec.span - 5e-6);
  if (spec.outer_zero_low < -sc.carrier_suppression.range || spec.outer_zero_high > sc.carrier_suppression.range)
    sc.carrier_suppression.range = spec.span - 5e-6;
  return sc;
}

void Scenario::validate() const {
  sensor.validate();
  const auto& curve = sensor.curve;
  if (mode == SynthMode::Passband) {
    chain.validate();
    if (!(chain.fs > 2.0 * sensor.f_res))
      throw ConfigError("chain.fs_khz = " + format_double(chain.fs / units::kilo) +
                        ": passband mode needs fs > 2 f_res = " + format_double(2.0 * sensor.f_res / units::kilo) +
                        " kHz");
    demod.validate(chain.fs);
  } else {
    require_positive(chain.gain, "chain.gain");
    require_positive(envelope_rate, "chain.envelope_rate_hz");
    demod.validate(envelope_rate);
  }
  require_positive(analysis.segment, "analysis.segment_s");
  if (!(analysis.overlap >= 0.0 && analysis.overlap < 1.0))
    throw ConfigError("analysis.overlap = " + format_double(analysis.overlap) + ": expected a fraction in [0, 1)");
  if (analysis.guard_bins < 0) throw ConfigError("analysis.guard_bins: expected an integer >= 0");
  if (!(analysis.neighborhood > 0.0 && analysis.neighborhood < 1.0))
    throw ConfigError("analysis.neighborhood_frac = " + format_double(analysis.neighborhood) +
                      ": expected a fraction in (0, 1)");
  require_positive(analysis.detection_sigma, "analysis.detection_sigma");

  auto check_tone = [&](Hertz f, const std::string& what) {
    require_positive(f, what);
    if (f * 10.0 > envelope_rate)
      throw ConfigError(what + " = " + format_double(f) + " Hz: envelope rate " + format_double(envelope_rate) +
                        " Hz must be >= 10x the tone frequency");
  };

  switch (protocol) {
    case Protocol::BiasSweep: {
      const auto& p = bias_sweep;
      require_positive(p.range, "bias_sweep.range_ut");
      require_positive(p.step, "bias_sweep.step_ut");
      require_dwell(*this, p.dwell, "bias_sweep.dwell_s");
      require_field(*this, -p.range - curve.hysteresis_halfwidth(), "bias_sweep.range_ut (lower end incl. hysteresis)");
      require_field(*this, p.range + curve.hysteresis_halfwidth(), "bias_sweep.range_ut (upper end incl. hysteresis)");
      if (!(p.window_lo < p.window_hi))
        throw ConfigError("bias_sweep.fit_window_lo_ut must be below bias_sweep.fit_window_hi_ut");
      break;
    }
    case Protocol::Staircase: {
      const auto& p = staircase;
      if (p.levels.empty()) throw ConfigError("staircase.levels_nt: expected at least one level");
      require_dwell(*this, p.dwell, "staircase.dwell_s");
      if (p.settle < 0.0) throw ConfigError("staircase.settle_s: expected a value >= 0");
      if (p.min_settled < 0.0) throw ConfigError("staircase.min_settled_s: expected a value >= 0");
      for (Tesla level : p.levels) require_field(*this, p.bias + level, "staircase.bias_ut + level");
      require_field(*this, p.bias, "staircase.bias_ut");
      break;
    }
    case Protocol::AmplitudeSeries: {
      const auto& p = amplitude_series;
      check_tone(p.frequency, "amplitude_series.tone_hz");
      if (p.amplitudes.empty()) throw ConfigError("amplitude_series.amplitudes_nt: expected at least one amplitude");
      if (p.harmonics < 2) throw ConfigError("amplitude_series.harmonics: expected an integer >= 2");
      require_positive(p.duration, "amplitude_series.duration_s");
      for (Tesla a : p.amplitudes) {
        if (a < 0.0) throw ConfigError("amplitude_series.amplitudes_nt: amplitudes must be >= 0");
        require_field(*this, p.bias - a, "amplitude_series.bias_ut - amplitude");
        require_field(*this, p.bias + a, "amplitude_series.bias_ut + amplitude");
      }
      break;
    }
    case Protocol::FrequencySeries: {
      const auto& p = frequency_series;
      if (p.frequencies.empty()) throw ConfigError("frequency_series.tones_hz: expected at least one frequency");
      for (Hertz f : p.frequencies) check_tone(f, "frequency_series.tones_hz");
      require_positive(p.duration, "frequency_series.duration_s");
      if (p.amplitude < 0.0) throw ConfigError("frequency_series.amplitude_nt: expected a value >= 0");
      require_field(*this, p.bias - p.amplitude, "frequency_series.bias_ut - amplitude");
      require_field(*this, p.bias + p.amplitude, "frequency_series.bias_ut + amplitude");
      break;
    }
    case Protocol::CarrierSuppression: {
      const auto& p = carrier_suppression;
      require_positive(p.range, "carrier_suppression.range_ut");
      require_positive(p.step, "carrier_suppression.step_ut");
      require_dwell(*this, p.dwell, "carrier_suppression.dwell_s");
      require_positive(p.refine_halfwidth, "carrier_suppression.refine_halfwidth_ut");
      require_positive(p.refine_step, "carrier_suppression.refine_step_ut");
      require_positive(p.duration, "carrier_suppression.duration_s");
      check_tone(p.tone_frequency, "carrier_suppression.tone_hz");
      require_field(*this, -p.range, "carrier_suppression.range_ut (lower end)");
      require_field(*this, p.range, "carrier_suppression.range_ut (upper end)");
      require_field(*this, p.bias, "carrier_suppression.bias_ut");
      break;
    }
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run_index) {
  std::uint64_t z = seed + (run_index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Acquisition acquire(const Scenario& sc, const FieldProgram& program, Seconds duration, std::uint64_t run_index) {
  SensorParams sensor = sc.sensor;
  sensor.noise.seed = derive_seed(sc.seed, run_index);
  ChainConfig chain = sc.chain;
  chain.duration = duration;

  Acquisition acq;
  if (sc.mode == SynthMode::Baseband) {
    chain.fs = sc.envelope_rate;
    const BasebandTrace env = synthesize_baseband(sensor, program, chain);
    acq.demod = demodulate(env, sc.demod);
    acq.demod_input_rate = env.fs;
    acq.envelope = env.samples / chain.gain;
    acq.envelope_rate = env.fs;
  } else {
    if (chain.length() > kMaxPassbandSamples)
      throw ConfigError("passband run of " + format_double(duration) + " s at " + format_double(chain.fs) +
                        " Hz exceeds " + std::to_string(kMaxPassbandSamples) +
                        " samples; shorten the protocol or use baseband mode");
    const RawTrace raw = synthesize_passband(sensor, program, chain);
    acq.demod = demodulate(raw, sc.demod);
    acq.demod_input_rate = raw.fs;
    // Wideband lock-in forming the envelope used for spectra.
    acq.envelope_filter = DemodConfig{sc.demod.f_ref, 4, sc.envelope_rate / 8.0, sc.envelope_rate};
    acq.envelope_filtered = true;
    const DemodTrace wide = demodulate(raw, acq.envelope_filter);
    const auto skip = std::min<Eigen::Index>(wide.settling_index, wide.samples.size());
    acq.envelope = wide.samples.tail(wide.samples.size() - skip) / chain.gain;
    acq.envelope_rate = wide.fs_out;
  }
  acq.demod.samples /= chain.gain;
  return acq;
}

SpectrumReport envelope_spectrum(const Scenario& sc, const Acquisition& acq, bool detrend) {
  WindowConfig cfg;
  cfg.segment_length = std::min<Eigen::Index>(std::llround(sc.analysis.segment * acq.envelope_rate),
                                              acq.envelope.size());
  cfg.overlap = sc.analysis.overlap;
  cfg.window = sc.analysis.window;
  cfg.detrend = detrend;
  SpectrumReport spec = spectrum(acq.envelope, acq.envelope_rate, cfg);
  if (acq.envelope_filtered) {
    for (Eigen::Index k = 0; k < spec.frequency.size(); ++k) {
      const double g = std::abs(discrete_response(acq.envelope_filter, acq.demod_input_rate, spec.frequency(k)));
      spec.amplitude(k) /= g;
      spec.asd(k) /= g;
    }
  }
  return spec;
}

HarmonicCheck detect_sideband(const SpectrumReport& spec, Hertz offset, const AnalysisConfig& cfg,
                              const std::vector<Hertz>& exclude) {
  HarmonicCheck check;
  check.frequency = offset;
  check.amplitude = sideband(spec, offset);

  const double res = spec.resolution();
  std::vector<Hertz> keep_out{0.0, offset, -offset};
  for (Hertz e : exclude) {
    keep_out.push_back(e);
    keep_out.push_back(-e);
  }
  const double guard = (static_cast<double>(cfg.guard_bins) + 0.5) * res;
  const double half_width = std::max(cfg.neighborhood * offset, (static_cast<double>(cfg.guard_bins) + 4.0) * res);

  double power = 0.0;
  int bins = 0;
  int sides = 0;
  for (double side : {1.0, -1.0}) {
    const Hertz target = side * offset;
    if (target < spec.frequency(0) || target > spec.frequency(spec.frequency.size() - 1)) continue;
    ++sides;
    for (Eigen::Index k = 0; k < spec.frequency.size(); ++k) {
      const Hertz f = spec.frequency(k);
      if (std::abs(f - target) > half_width) continue;
      bool blocked = false;
      for (Hertz e : keep_out) blocked = blocked || std::abs(f - e) <= guard;
      if (blocked) continue;
      power += spec.amplitude(k) * spec.amplitude(k);
      ++bins;
    }
  }
  if (bins == 0 || sides == 0) {
    check.noise = kNaN;
    check.excess_sigma = kNaN;
    return check;
  }
  const double noise_power = power / bins;
  check.noise = std::sqrt(noise_power);
  // Relative spread of a Welch power estimate is 1/sqrt(averages) per bin.
  const double sigma = noise_power / std::sqrt(static_cast<double>(spec.averages * sides));
  check.excess_sigma = sigma > 0.0 ? (check.amplitude * check.amplitude - noise_power) / sigma
                                   : (check.amplitude > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  check.detected = check.excess_sigma > cfg.detection_sigma;
  return check;
}

ExperimentResult run_bias_sweep(const Scenario& sc) {
  sc.validate();
  const auto& p = sc.bias_sweep;
  std::vector<Tesla> up = grid(-p.range, p.range, p.step);
  std::vector<Tesla> levels = up;
  levels.insert(levels.end(), up.rbegin(), up.rend());

  const FieldProgram program = staircase_program(0.0, levels, p.dwell);
  const Acquisition acq = acquire(sc, program, static_cast<double>(levels.size()) * p.dwell, 0);
  const RawTrace trace = signed_trace(acq.demod);
  const std::vector<Volt> means = plateau_means(sc, trace, schedule_of(program, p.dwell));

  BiasSweepResult r;
  r.window_lo = p.window_lo;
  r.window_hi = p.window_hi;
  const std::size_t n = up.size();
  for (std::size_t i = 0; i < n; ++i) {
    r.up.emplace_back(up[i], means[i]);
    r.down.emplace_back(up[n - 1 - i], means[n + i]);
  }
  std::vector<std::pair<Tesla, Volt>> pooled = r.up;
  pooled.insert(pooled.end(), r.down.begin(), r.down.end());
  for (std::size_t i = 0; i < n; ++i) {
    const Volt down_here = r.down[n - 1 - i].second;
    r.hysteresis_opening = std::max(r.hysteresis_opening, std::abs(r.up[i].second - down_here));
  }
  for (const auto& pt : pooled) r.full_scale = std::max(r.full_scale, std::abs(pt.second));
  r.opening_fraction = r.full_scale > 0.0 ? r.hysteresis_opening / r.full_scale : 0.0;
  r.fit = fit_sensitivity(pooled, {p.window_lo, p.window_hi});

  ExperimentResult result = make_result(sc, r);
  result.artifacts.trace = trace;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows(k, 0) = up[i];
    rows(k, 1) = r.up[i].second;
    rows(k, 2) = r.down[n - 1 - i].second;
  }
  result.artifacts.plots.push_back({"fig3a", {"h_tesla", "up_v", "down_v"}, rows});
  return result;
}

ExperimentResult run_staircase(const Scenario& sc) {
  sc.validate();
  const auto& p = sc.staircase;
  const FieldProgram program = staircase_program(p.bias, p.levels, p.dwell);
  const Acquisition acq = acquire(sc, program, static_cast<double>(p.levels.size()) * p.dwell, 0);
  const RawTrace trace = signed_trace(acq.demod);

  std::vector<Plateau> schedule;
  for (const auto& s : program.steps) schedule.push_back({s.start, s.start + p.dwell, s.level});
  const double sensitivity = p.sensitivity > 0.0 ? p.sensitivity : std::abs(sc.sensor.sensitivity(p.bias));
  const Seconds settle = p.settle > 0.0 ? p.settle : settling_time(sc.demod);

  StaircaseResult r;
  r.bias = p.bias;
  r.levels = p.levels;
  r.lod = lod_dc(trace.samples, trace.fs, trace.t0, schedule, sensitivity, enbw(sc.demod).nep_ratio, sc.demod.b_3db,
                 {settle, p.min_settled});

  ExperimentResult result = make_result(sc, r);
  result.artifacts.trace = trace;
  result.artifacts.spectrum = envelope_spectrum(sc, acq, false);
  Eigen::MatrixXd rows(trace.samples.size(), 3);
  for (Eigen::Index k = 0; k < trace.samples.size(); ++k) {
    rows(k, 0) = trace.time(k);
    rows(k, 1) = trace.samples(k);
    rows(k, 2) = program.step_level(trace.time(k));
  }
  result.artifacts.plots.push_back({"fig3b", {"t_s", "v_volt", "level_tesla"}, rows});
  return result;
}

ExperimentResult run_amplitude_series(const Scenario& sc) {
  sc.validate();
  const auto& p = sc.amplitude_series;
  AmplitudeSeriesResult r;
  r.frequency = p.frequency;
  r.bias = p.bias;
  r.sensitivity = sc.sensor.sensitivity(p.bias);

  std::vector<Hertz> multiples;
  for (int k = 1; k <= p.harmonics; ++k) multiples.push_back(k * p.frequency);

  const Scenario clean = noise_free(sc);
  std::size_t largest = 0;
  std::optional<Acquisition> largest_acq;
  std::optional<SpectrumReport> largest_spec;
  for (std::size_t i = 0; i < p.amplitudes.size(); ++i) {
    FieldProgram program;
    program.bias = p.bias;
    program.tones.push_back({p.frequency, p.amplitudes[i], 0.0});
    Acquisition acq = acquire(sc, program, p.duration, i);
    SpectrumReport spec = envelope_spectrum(sc, acq, true);

    AmplitudePoint point;
    point.amplitude = p.amplitudes[i];
    point.sideband = sideband(spec, p.frequency);
    for (int k = 2; k <= p.harmonics; ++k) {
      HarmonicCheck h = detect_sideband(spec, k * p.frequency, sc.analysis, multiples);
      h.order = k;
      point.harmonics.push_back(h);
    }
    point.thd = point.sideband > 0.0 ? thd(spec, p.frequency, p.harmonics) : kNaN;
    point.thd_noise_free = kNaN;
    if (p.noise_free_thd && point.amplitude > 0.0) {
      const Acquisition clean_acq = acquire(clean, program, p.duration, i);
      point.thd_noise_free = thd(envelope_spectrum(clean, clean_acq, true), p.frequency, p.harmonics);
    }
    r.points.push_back(point);
    if (!largest_acq || p.amplitudes[i] >= p.amplitudes[largest]) {
      largest = i;
      largest_acq = std::move(acq);
      largest_spec = std::move(spec);
    }
  }

  std::vector<std::pair<Tesla, Volt>> pts;
  for (const auto& pt : r.points) pts.emplace_back(pt.amplitude, pt.sideband);
  try {
    r.linearity = linearity(pts);
  } catch (const SizeError& e) {
    r.linearity_error = e.what();
  } catch (const DataError& e) {
    r.linearity_error = e.what();
  }

  ExperimentResult result = make_result(sc, r);
  result.artifacts.trace = signed_trace(largest_acq->demod);
  result.artifacts.spectrum = std::move(largest_spec);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows(k, 0) = pts[i].first;
    rows(k, 1) = pts[i].second;
    rows(k, 2) = r.linearity ? r.linearity->slope * pts[i].first + r.linearity->intercept : kNaN;
  }
  result.artifacts.plots.push_back({"fig4b", {"h_amplitude_tesla", "sideband_v", "fit_v"}, rows});
  return result;
}

ExperimentResult run_frequency_series(const Scenario& sc) {
  sc.validate();
  const auto& p = sc.frequency_series;
  FrequencySeriesResult r;
  r.bias = p.bias;
  r.sensitivity = sc.sensor.sensitivity(p.bias);
  const double s_abs = std::abs(r.sensitivity);

  std::optional<Acquisition> first_acq;
  std::optional<SpectrumReport> first_spec;
  for (std::size_t i = 0; i < p.frequencies.size(); ++i) {
    const Hertz f = p.frequencies[i];
    FieldProgram program;
    program.bias = p.bias;
    if (p.amplitude > 0.0) program.tones.push_back({f, p.amplitude, 0.0});
    Acquisition acq = acquire(sc, program, p.duration, i);
    SpectrumReport spec = envelope_spectrum(sc, acq, true);

    FrequencyPoint point;
    point.frequency = f;
    point.amplitude = p.amplitude;
    point.sideband = sideband(spec, f);
    point.tone = detect_sideband(spec, f, sc.analysis, {});
    AcLodOptions opts;
    opts.tone_offsets = {f};
    opts.neighborhood = sc.analysis.neighborhood;
    opts.guard_bins = sc.analysis.guard_bins;
    point.lod = lod_ac(spec, s_abs, {f}, opts).front();

    // Envelope amplitude as seen in the lock-in output, then undo |H(f)|.
    const auto& demod = acq.demod;
    const Eigen::Index settled = std::min(demod.settling_index, demod.samples.size());
    const Eigen::VectorXcd tail = demod.samples.tail(demod.samples.size() - settled);
    WindowConfig wcfg;
    wcfg.segment_length = std::min<Eigen::Index>(std::llround(sc.analysis.segment * demod.fs_out), tail.size());
    wcfg.overlap = sc.analysis.overlap;
    wcfg.window = sc.analysis.window;
    wcfg.detrend = true;
    const SpectrumReport dspec = spectrum(tail, demod.fs_out, wcfg);
    const Eigen::Index g = tone_guard(dspec, f);
    point.demod_amplitude = dspec.peak_amplitude(f, g) + dspec.peak_amplitude(-f, g);
    point.filter_gain = std::abs(discrete_response(sc.demod, acq.demod_input_rate, f));
    point.compensated_amplitude = point.demod_amplitude / point.filter_gain;
    r.points.push_back(point);

    if (!first_acq) {
      first_acq = std::move(acq);
      first_spec = std::move(spec);
    }
  }

  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  for (const auto& pt : r.points) {
    lo = std::min(lo, pt.compensated_amplitude);
    hi = std::max(hi, pt.compensated_amplitude);
    sum += pt.compensated_amplitude;
  }
  const double mean = sum / static_cast<double>(r.points.size());
  r.amplitude_spread = mean > 0.0 ? (hi - lo) / mean : 0.0;

  ExperimentResult result = make_result(sc, r);
  result.artifacts.trace = signed_trace(first_acq->demod);

  // Equivalent magnetic noise spectrum of the first run, both sidebands pooled.
  const SpectrumReport& spec = *first_spec;
  std::vector<std::array<double, 3>> rows;
  for (Eigen::Index k = 0; k < spec.frequency.size(); ++k) {
    const Hertz f = spec.frequency(k);
    if (!(f > 0.0) || f > 110.0) continue;
    const double mirror = spec.asd(spec.bin(-f));
    const double asd = std::sqrt(0.5 * (spec.asd(k) * spec.asd(k) + mirror * mirror));
    rows.push_back({f, asd / s_abs, sc.sensor.noise.density(f) / s_abs});
  }
  Eigen::MatrixXd table(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < 3; ++c) table(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  result.artifacts.plots.push_back({"fig4d", {"freq_hz", "noise_t_per_sqrthz", "model_t_per_sqrthz"}, table});
  result.artifacts.spectrum = std::move(first_spec);
  return result;
}

namespace {

SuppressionRun suppression_run(const Scenario& sc, Tesla bias, std::uint64_t run_index,
                               std::optional<SpectrumReport>* keep) {
  const auto& p = sc.carrier_suppression;
  FieldProgram program;
  program.bias = bias;
  program.tones.push_back({p.tone_frequency, p.tone_amplitude, 0.0});
  const Acquisition acq = acquire(sc, program, p.duration, run_index);
  SpectrumReport spec = envelope_spectrum(sc, acq, false);

  SuppressionRun run;
  run.bias = bias;
  run.carrier = spec.amplitude(spec.bin(0.0));
  run.sideband = sideband(spec, p.tone_frequency);
  run.local_sensitivity = sc.sensor.sensitivity(bias);
  run.sideband_per_sensitivity = run.sideband / std::abs(run.local_sensitivity);
  AcLodOptions opts;
  opts.tone_offsets = {p.tone_frequency};
  opts.neighborhood = sc.analysis.neighborhood;
  opts.guard_bins = sc.analysis.guard_bins;
  run.noise_asd = lod_ac(spec, 1.0, {p.tone_frequency}, opts).front().asd;
  if (keep) *keep = std::move(spec);
  return run;
}

}  // namespace

ExperimentResult run_carrier_suppression(const Scenario& sc) {
  sc.validate();
  const auto& p = sc.carrier_suppression;
  CarrierSuppressionResult r;

  const std::vector<Tesla> levels = grid(-p.range, p.range, p.step);
  const FieldProgram sweep_program = staircase_program(0.0, levels, p.dwell);
  const Acquisition sweep_acq = acquire(sc, sweep_program, static_cast<double>(levels.size()) * p.dwell, 0);
  const RawTrace trace = signed_trace(sweep_acq.demod);
  const std::vector<Volt> means = plateau_means(sc, trace, schedule_of(sweep_program, p.dwell));
  std::vector<std::pair<Tesla, Volt>> points;
  for (std::size_t i = 0; i < levels.size(); ++i) points.emplace_back(levels[i], std::abs(means[i]));
  r.sweep = carrier_minima(points, p.reference_field);
  r.reference_carrier = r.sweep.reference_carrier;

  ExperimentResult result;
  if (r.sweep.minima.empty()) {
    if (r.sweep.note.empty()) r.sweep.note = "no carrier minimum in the sweep";
    r.sweep.flagged = true;
    r.chosen_minimum = r.refined_bias = kNaN;
    r.suppression_db = r.carrier_reduction = r.ratio_change = kNaN;
    result = make_result(sc, r);
  } else {
    auto best = std::min_element(r.sweep.minima.begin(), r.sweep.minima.end(), [&](const auto& a, const auto& b) {
      return std::abs(a.field - p.target_minimum) < std::abs(b.field - p.target_minimum);
    });
    r.chosen_minimum = best->field;

    // Fine re-sweep around the chosen minimum; the signed output locates the
    // zero crossing by linear interpolation.
    std::vector<Tesla> fine = grid(r.chosen_minimum - p.refine_halfwidth, r.chosen_minimum + p.refine_halfwidth,
                                   p.refine_step);
    fine.erase(std::remove_if(fine.begin(), fine.end(), [&](Tesla h) { return !sc.sensor.curve.contains(h); }),
               fine.end());
    const FieldProgram fine_program = staircase_program(0.0, fine, p.dwell);
    const Acquisition fine_acq = acquire(sc, fine_program, static_cast<double>(fine.size()) * p.dwell, 1);
    const std::vector<Volt> fine_means =
        plateau_means(sc, signed_trace(fine_acq.demod), schedule_of(fine_program, p.dwell));
    r.refined_bias = r.chosen_minimum;
    double smallest = std::numeric_limits<double>::infinity();
    bool crossed = false;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      r.refine_points.emplace_back(fine[i], fine_means[i]);
      if (!crossed && std::abs(fine_means[i]) < smallest) {
        smallest = std::abs(fine_means[i]);
        r.refined_bias = fine[i];
      }
      if (!crossed && i > 0 && fine_means[i - 1] * fine_means[i] < 0.0) {
        const double t = fine_means[i - 1] / (fine_means[i - 1] - fine_means[i]);
        r.refined_bias = fine[i - 1] + t * (fine[i] - fine[i - 1]);
        crossed = true;
      }
    }

    std::optional<SpectrumReport> kept;
    r.operating = suppression_run(sc, p.bias, 2, nullptr);
    r.suppressed = suppression_run(sc, r.refined_bias, 3, &kept);
    r.carrier_reduction = r.reference_carrier - r.suppressed.carrier;
    r.suppression_db = 20.0 * std::log10(r.reference_carrier / r.suppressed.carrier);
    r.ratio_change = r.suppressed.sideband_per_sensitivity / r.operating.sideband_per_sensitivity - 1.0;
    result = make_result(sc, r);
    result.artifacts.spectrum = std::move(kept);
  }

  result.artifacts.trace = trace;
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(levels.size()), 3);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rows(k, 0) = levels[i];
    rows(k, 1) = means[i];
    rows(k, 2) = std::abs(means[i]);
  }
  result.artifacts.plots.push_back({"sfig1a", {"h_tesla", "c_volt", "carrier_abs_v"}, rows});
  return result;
}

ExperimentResult run(const Scenario& scenario) {
  switch (scenario.protocol) {
    case Protocol::BiasSweep: return run_bias_sweep(scenario);
    case Protocol::Staircase: return run_staircase(scenario);
    case Protocol::AmplitudeSeries: return run_amplitude_series(scenario);
    case Protocol::FrequencySeries: return run_frequency_series(scenario);
    case Protocol::CarrierSuppression: return run_carrier_suppression(scenario);
  }
  throw std::logic_error("unknown protocol");
}

}  // namespace mesim
