#include "mesim/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mesim {
namespace {

std::string show(const Json& v) {
  std::string s = v.dump();
  if (s.size() > 60) s = s.substr(0, 57) + "...";
  return s;
}

// Reads one JSON object, remembering which keys were consumed so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_.empty() ? "config" : path_, j, "an object");
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& key, const Json& value, const std::string& expect) {
    throw ConfigError("config: " + key + " = " + show(value) + ": expected " + expect);
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool is_auto(const std::string& key) {
    const Json* v = find(key);
    return v && v->is_string() && v->get<std::string>() == "auto";
  }

  // Number in the key's unit, stored as unit * value.
  template <typename Check>
  bool number(const std::string& key, double& target, double unit, const std::string& expect, Check ok) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_number()) fail(where(key), *v, expect);
    const double raw = v->get<double>();
    if (!std::isfinite(raw) || !ok(raw)) fail(where(key), *v, expect);
    target = raw * unit;
    return true;
  }

  bool positive(const std::string& key, double& target, double unit, const std::string& unit_text) {
    return number(key, target, unit, unit_text + " > 0", [](double x) { return x > 0.0; });
  }
  bool non_negative(const std::string& key, double& target, double unit, const std::string& unit_text) {
    return number(key, target, unit, unit_text + " >= 0", [](double x) { return x >= 0.0; });
  }
  bool any(const std::string& key, double& target, double unit, const std::string& unit_text) {
    return number(key, target, unit, unit_text, [](double) { return true; });
  }

  bool integer(const std::string& key, int& target, long lo, long hi) {
    const Json* v = find(key);
    if (!v) return false;
    const std::string expect = "an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
    if (!v->is_number_integer()) fail(where(key), *v, expect);
    const auto x = v->get<long long>();
    if (x < lo || x > hi) fail(where(key), *v, expect);
    target = static_cast<int>(x);
    return true;
  }

  bool boolean(const std::string& key, bool& target) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_boolean()) fail(where(key), *v, "true or false");
    target = v->get<bool>();
    return true;
  }

  bool string(const std::string& key, std::string& target) {
    const Json* v = find(key);
    if (!v) return false;
    if (!v->is_string()) fail(where(key), *v, "a string");
    target = v->get<std::string>();
    return true;
  }

  bool list(const std::string& key, std::vector<double>& target, double unit, const std::string& unit_text,
            bool allow_negative) {
    const Json* v = find(key);
    if (!v) return false;
    const std::string expect = "a non-empty list of " + unit_text + (allow_negative ? "" : " >= 0");
    if (!v->is_array() || v->empty()) fail(where(key), *v, expect);
    target.clear();
    for (const auto& e : *v) {
      if (!e.is_number()) fail(where(key), *v, expect);
      const double x = e.get<double>();
      if (!std::isfinite(x) || (!allow_negative && x < 0.0)) fail(where(key), *v, expect);
      target.push_back(x * unit);
    }
    return true;
  }

  // Sub-object, or nullptr when absent.
  const Json* object(const std::string& key) {
    const Json* v = find(key);
    if (v && !v->is_object()) fail(where(key), *v, "an object");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("config: unknown key " + where(it.key()) + " (see `mesim config-reference`)");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Rewraps errors raised while applying values so they name the key.
template <typename F>
void apply(const std::string& key, const Json& value, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config: " + key + " = " + show(value) + ": " + e.what());
  }
}

void parse_sensor(Section& s, Scenario& sc, const std::filesystem::path& base_dir) {
  double f_res = sc.sensor.f_res;
  if (s.positive("f_res_khz", f_res, units::kilo, "kHz")) sc.sensor.f_res = f_res;
  s.positive("drive_rms_mv", sc.sensor.drive_rms, units::milli, "mV");
  s.non_negative("noise_floor_nv_per_rthz", sc.sensor.noise.floor_asd, units::nano, "nV/sqrt(Hz)");
  s.non_negative("flicker_corner_hz", sc.sensor.noise.flicker_corner, 1.0, "Hz");

  std::string csv;
  if (s.string("curve_csv", csv) && !csv.empty()) {
    std::filesystem::path path(csv);
    if (path.is_relative()) path = base_dir / path;
    std::ifstream in(path);
    if (!in) throw ConfigError("config: sensor.curve_csv = \"" + csv + "\": cannot open " + path.string());
    const Tesla w = sc.sensor.curve.hysteresis_halfwidth();
    sc.sensor.curve = read_curve_csv(in, path.stem().string()).with_hysteresis(w);
    sc.curve_csv = std::filesystem::absolute(path).lexically_normal().string();
  }
  double w = sc.sensor.curve.hysteresis_halfwidth();
  if (s.non_negative("hysteresis_ut", w, units::micro, "uT")) sc.sensor.curve = sc.sensor.curve.with_hysteresis(w);
}

void parse_chain(Section& s, Scenario& sc) {
  if (!s.is_auto("fs_khz")) s.positive("fs_khz", sc.chain.fs, units::kilo, "kHz");
  s.positive("envelope_rate_hz", sc.envelope_rate, 1.0, "Hz");
  s.positive("gain", sc.chain.gain, 1.0, "a dimensionless gain");
  s.integer("adc_bits", sc.chain.adc_bits, 2, 32);
  if (!s.is_auto("adc_fullscale_v")) s.positive("adc_fullscale_v", sc.chain.adc_fullscale, 1.0, "V");
  s.boolean("quantize", sc.chain.quantize);
}

void parse_demod(Section& s, Scenario& sc) {
  if (!s.is_auto("f_ref_khz")) s.positive("f_ref_khz", sc.demod.f_ref, units::kilo, "kHz");
  s.integer("order", sc.demod.order, 1, 16);
  s.positive("b_3db_hz", sc.demod.b_3db, 1.0, "Hz");
  s.positive("decimate_to_hz", sc.demod.decimate_to, 1.0, "Hz");
}

void parse_analysis(Section& s, Scenario& sc) {
  auto& a = sc.analysis;
  s.positive("segment_s", a.segment, 1.0, "s");
  s.number("overlap", a.overlap, 1.0, "a fraction in [0, 1)", [](double x) { return x >= 0.0 && x < 1.0; });
  std::string window;
  if (s.string("window", window)) {
    if (window == "hann")
      a.window = WindowType::Hann;
    else if (window == "rectangular")
      a.window = WindowType::Rectangular;
    else
      Section::fail(s.where("window"), Json(window), "\"hann\" or \"rectangular\"");
  }
  int guard = static_cast<int>(a.guard_bins);
  if (s.integer("guard_bins", guard, 0, 1000)) a.guard_bins = guard;
  s.number("neighborhood_frac", a.neighborhood, 1.0, "a fraction in (0, 1)",
           [](double x) { return x > 0.0 && x < 1.0; });
  s.positive("detection_sigma", a.detection_sigma, 1.0, "a multiple of the noise spread");
}

void parse_bias_sweep(Section& s, BiasSweepParams& p) {
  s.positive("range_ut", p.range, units::micro, "uT");
  s.positive("step_ut", p.step, units::micro, "uT");
  s.positive("dwell_s", p.dwell, 1.0, "s");
  s.any("fit_window_lo_ut", p.window_lo, units::micro, "uT");
  s.any("fit_window_hi_ut", p.window_hi, units::micro, "uT");
}

void parse_staircase(Section& s, StaircaseParams& p) {
  s.any("bias_ut", p.bias, units::micro, "uT");
  s.list("levels_nt", p.levels, units::nano, "nT", true);
  s.positive("dwell_s", p.dwell, 1.0, "s");
  if (s.is_auto("settle_s"))
    p.settle = 0.0;
  else
    s.positive("settle_s", p.settle, 1.0, "s");
  s.non_negative("min_settled_s", p.min_settled, 1.0, "s");
  if (s.is_auto("sensitivity_kv_per_t"))
    p.sensitivity = 0.0;
  else
    s.positive("sensitivity_kv_per_t", p.sensitivity, units::kilo, "kV/T");
}

void parse_amplitude_series(Section& s, AmplitudeSeriesParams& p) {
  s.any("bias_ut", p.bias, units::micro, "uT");
  s.positive("tone_hz", p.frequency, 1.0, "Hz");
  s.list("amplitudes_nt", p.amplitudes, units::nano, "nT", false);
  s.positive("duration_s", p.duration, 1.0, "s");
  s.integer("harmonics", p.harmonics, 2, 20);
  s.boolean("noise_free_thd", p.noise_free_thd);
}

void parse_frequency_series(Section& s, FrequencySeriesParams& p) {
  s.any("bias_ut", p.bias, units::micro, "uT");
  s.list("tones_hz", p.frequencies, 1.0, "Hz", false);
  s.non_negative("amplitude_nt", p.amplitude, units::nano, "nT");
  s.positive("duration_s", p.duration, 1.0, "s");
}

void parse_carrier_suppression(Section& s, CarrierSuppressionParams& p) {
  s.positive("range_ut", p.range, units::micro, "uT");
  s.positive("step_ut", p.step, units::micro, "uT");
  s.positive("dwell_s", p.dwell, 1.0, "s");
  s.any("reference_ut", p.reference_field, units::micro, "uT");
  s.any("target_minimum_ut", p.target_minimum, units::micro, "uT");
  s.positive("refine_halfwidth_ut", p.refine_halfwidth, units::micro, "uT");
  s.positive("refine_step_ut", p.refine_step, units::micro, "uT");
  s.any("bias_ut", p.bias, units::micro, "uT");
  s.positive("tone_hz", p.tone_frequency, 1.0, "Hz");
  s.non_negative("tone_nt", p.tone_amplitude, units::nano, "nT");
  s.positive("duration_s", p.duration, 1.0, "s");
}

template <typename F>
void section(Section& parent, const std::string& key, F&& f) {
  if (const Json* j = parent.object(key)) {
    Section s(*j, parent.where(key));
    f(s);
    s.finish();
  }
}

// x / unit rounded to 15 significant digits, so 0.7 V prints as 700 mV.
double in_unit(double x, double unit) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x / unit, std::chars_format::general, 15);
  double v = 0.0;
  std::from_chars(buf.data(), res.ptr, v);
  return v;
}

Json number_list(const std::vector<double>& v, double unit) {
  Json out = Json::array();
  for (double x : v) out.push_back(in_unit(x, unit));
  return out;
}

const std::map<std::string, std::string>& key_docs() {
  static const std::map<std::string, std::string> docs = {
      {"version", "config schema version (1)"},
      {"protocol", "bias_sweep | staircase | amplitude_series | frequency_series | carrier_suppression"},
      {"mode", "baseband (envelope synthesis) | passband (full coil voltage at chain.fs_khz)"},
      {"seed", "64-bit seed of the noise realization"},
      {"sensor.preset", "ml-paper | sl-paper"},
      {"sensor.curve_csv", "optional h_tesla,c_volt table replacing the preset curve"},
      {"sensor.f_res_khz", "carrier frequency"},
      {"sensor.drive_rms_mv", "excitation level; scales the curve linearly from 700 mV"},
      {"sensor.noise_floor_nv_per_rthz", "white voltage noise density at the coil (0 disables noise)"},
      {"sensor.flicker_corner_hz", "offset from the carrier where flicker noise equals the floor"},
      {"sensor.hysteresis_ut", "play-operator half-width of the minor loop"},
      {"chain.fs_khz", "passband sample rate (\"auto\": 4 f_res rounded to 1 kHz)"},
      {"chain.envelope_rate_hz", "envelope sample rate for baseband synthesis and spectra"},
      {"chain.gain", "preamplifier gain"},
      {"chain.adc_bits", "ADC resolution"},
      {"chain.adc_fullscale_v", "ADC full scale (\"auto\": 1.5x the carrier peak at zero field)"},
      {"chain.quantize", "apply the ADC in passband mode"},
      {"demod.f_ref_khz", "lock-in reference frequency (\"auto\": sensor f_res)"},
      {"demod.order", "number of cascaded single-pole stages"},
      {"demod.b_3db_hz", "overall -3 dB bandwidth of the cascade"},
      {"demod.decimate_to_hz", "lock-in output rate"},
      {"analysis.segment_s", "Welch segment length"},
      {"analysis.overlap", "Welch segment overlap fraction"},
      {"analysis.window", "hann | rectangular"},
      {"analysis.guard_bins", "bins excluded around tones and the carrier in noise estimates"},
      {"analysis.neighborhood_frac", "noise neighborhood half-width as a fraction of the offset"},
      {"analysis.detection_sigma", "excess power (in spreads of the noise estimate) to call a tone present"},
      {"bias_sweep.range_ut", "sweep covers [-range, range], up then down"},
      {"bias_sweep.step_ut", "field step"},
      {"bias_sweep.dwell_s", "time per field step"},
      {"bias_sweep.fit_window_lo_ut", "lower edge of the sensitivity fit window"},
      {"bias_sweep.fit_window_hi_ut", "upper edge of the sensitivity fit window"},
      {"staircase.bias_ut", "DC operating bias"},
      {"staircase.levels_nt", "plateau levels in playback order"},
      {"staircase.dwell_s", "plateau duration"},
      {"staircase.settle_s", "skipped at each plateau start (\"auto\": 7 filter time constants)"},
      {"staircase.min_settled_s", "plateaus with less settled data are flagged and excluded"},
      {"staircase.sensitivity_kv_per_t", "S used for LOD (\"auto\": local slope of the curve)"},
      {"amplitude_series.bias_ut", "DC operating bias"},
      {"amplitude_series.tone_hz", "test tone frequency"},
      {"amplitude_series.amplitudes_nt", "peak tone amplitudes, one run each"},
      {"amplitude_series.duration_s", "duration of each run"},
      {"amplitude_series.harmonics", "highest harmonic included in THD"},
      {"amplitude_series.noise_free_thd", "also evaluate THD on a noise-free rerun"},
      {"frequency_series.bias_ut", "DC operating bias"},
      {"frequency_series.tones_hz", "tone frequencies, one run each"},
      {"frequency_series.amplitude_nt", "peak tone amplitude"},
      {"frequency_series.duration_s", "duration of each run"},
      {"carrier_suppression.range_ut", "coarse sweep covers [-range, range]"},
      {"carrier_suppression.step_ut", "coarse sweep step"},
      {"carrier_suppression.dwell_s", "time per sweep step"},
      {"carrier_suppression.reference_ut", "field of the unsuppressed reference carrier"},
      {"carrier_suppression.target_minimum_ut", "the minimum nearest this field is refined and used"},
      {"carrier_suppression.refine_halfwidth_ut", "half-width of the fine re-sweep"},
      {"carrier_suppression.refine_step_ut", "fine re-sweep step"},
      {"carrier_suppression.bias_ut", "operating bias of the comparison run"},
      {"carrier_suppression.tone_hz", "verification tone frequency"},
      {"carrier_suppression.tone_nt", "verification tone amplitude"},
      {"carrier_suppression.duration_s", "duration of each comparison run"},
  };
  return docs;
}

void flatten(const Json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace(key, it->dump());
  }
}

}  // namespace

Scenario scenario_from_json(const Json& doc, const std::filesystem::path& base_dir) {
  Section top(doc, "");
  int version = kConfigVersion;
  top.integer("version", version, kConfigVersion, kConfigVersion);

  std::string protocol_text = "staircase";
  top.string("protocol", protocol_text);
  const Protocol protocol = parse_protocol(protocol_text);

  std::string preset_name(kPresetMlPaper);
  const Json* sensor_json = top.object("sensor");
  if (sensor_json && sensor_json->contains("preset")) {
    const Json& v = sensor_json->at("preset");
    if (!v.is_string()) Section::fail("sensor.preset", v, "a preset name");
    preset_name = v.get<std::string>();
    apply("sensor.preset", v, [&] { (void)preset_curve_spec(preset_name); });
  }
  Scenario sc = default_scenario(protocol, preset_name);

  std::string mode;
  if (top.string("mode", mode)) sc.mode = parse_mode(mode);
  if (const Json* seed = top.find("seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0))
      Section::fail("seed", *seed, "an integer in [0, 2^64)");
    sc.seed = seed->get<std::uint64_t>();
  }

  if (sensor_json) {
    Section s(*sensor_json, "sensor");
    std::string ignored;
    s.string("preset", ignored);
    apply("sensor", *sensor_json, [&] { parse_sensor(s, sc, base_dir); });
    s.finish();
  }
  // Derived defaults follow the (possibly overridden) sensor.
  sc.chain.fs = default_passband_rate(sc.sensor.f_res);
  sc.demod.f_ref = sc.sensor.f_res;
  section(top, "chain", [&](Section& s) { parse_chain(s, sc); });
  const bool fullscale_given = doc.contains("chain") && doc["chain"].contains("adc_fullscale_v") &&
                               doc["chain"]["adc_fullscale_v"].is_number();
  if (!fullscale_given) sc.chain.adc_fullscale = default_adc_fullscale(sc.sensor, sc.chain.gain);
  section(top, "demod", [&](Section& s) { parse_demod(s, sc); });
  section(top, "analysis", [&](Section& s) { parse_analysis(s, sc); });
  section(top, "bias_sweep", [&](Section& s) { parse_bias_sweep(s, sc.bias_sweep); });
  section(top, "staircase", [&](Section& s) { parse_staircase(s, sc.staircase); });
  section(top, "amplitude_series", [&](Section& s) { parse_amplitude_series(s, sc.amplitude_series); });
  section(top, "frequency_series", [&](Section& s) { parse_frequency_series(s, sc.frequency_series); });
  section(top, "carrier_suppression", [&](Section& s) { parse_carrier_suppression(s, sc.carrier_suppression); });
  top.finish();

  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return scenario_from_json(doc, path.parent_path());
}

Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["version"] = kConfigVersion;
  j["protocol"] = protocol_name(sc.protocol);
  j["mode"] = mode_name(sc.mode);
  j["seed"] = sc.seed;

  Json sensor;
  sensor["preset"] = sc.preset;
  if (!sc.curve_csv.empty()) sensor["curve_csv"] = sc.curve_csv;
  sensor["f_res_khz"] = in_unit(sc.sensor.f_res, units::kilo);
  sensor["drive_rms_mv"] = in_unit(sc.sensor.drive_rms, units::milli);
  sensor["noise_floor_nv_per_rthz"] = in_unit(sc.sensor.noise.floor_asd, units::nano);
  sensor["flicker_corner_hz"] = sc.sensor.noise.flicker_corner;
  sensor["hysteresis_ut"] = in_unit(sc.sensor.curve.hysteresis_halfwidth(), units::micro);
  j["sensor"] = sensor;

  Json chain;
  chain["fs_khz"] = in_unit(sc.chain.fs, units::kilo);
  chain["envelope_rate_hz"] = sc.envelope_rate;
  chain["gain"] = sc.chain.gain;
  chain["adc_bits"] = sc.chain.adc_bits;
  chain["adc_fullscale_v"] = sc.chain.adc_fullscale;
  chain["quantize"] = sc.chain.quantize;
  j["chain"] = chain;

  Json demod;
  demod["f_ref_khz"] = in_unit(sc.demod.f_ref, units::kilo);
  demod["order"] = sc.demod.order;
  demod["b_3db_hz"] = sc.demod.b_3db;
  demod["decimate_to_hz"] = sc.demod.decimate_to;
  j["demod"] = demod;

  Json analysis;
  analysis["segment_s"] = sc.analysis.segment;
  analysis["overlap"] = sc.analysis.overlap;
  analysis["window"] = window_name(sc.analysis.window);
  analysis["guard_bins"] = sc.analysis.guard_bins;
  analysis["neighborhood_frac"] = sc.analysis.neighborhood;
  analysis["detection_sigma"] = sc.analysis.detection_sigma;
  j["analysis"] = analysis;

  Json p;
  switch (sc.protocol) {
    case Protocol::BiasSweep: {
      const auto& b = sc.bias_sweep;
      p["range_ut"] = in_unit(b.range, units::micro);
      p["step_ut"] = in_unit(b.step, units::micro);
      p["dwell_s"] = b.dwell;
      p["fit_window_lo_ut"] = in_unit(b.window_lo, units::micro);
      p["fit_window_hi_ut"] = in_unit(b.window_hi, units::micro);
      break;
    }
    case Protocol::Staircase: {
      const auto& s = sc.staircase;
      p["bias_ut"] = in_unit(s.bias, units::micro);
      p["levels_nt"] = number_list(s.levels, units::nano);
      p["dwell_s"] = s.dwell;
      p["settle_s"] = s.settle > 0.0 ? Json(s.settle) : Json("auto");
      p["min_settled_s"] = s.min_settled;
      p["sensitivity_kv_per_t"] = s.sensitivity > 0.0 ? Json(in_unit(s.sensitivity, units::kilo)) : Json("auto");
      break;
    }
    case Protocol::AmplitudeSeries: {
      const auto& a = sc.amplitude_series;
      p["bias_ut"] = in_unit(a.bias, units::micro);
      p["tone_hz"] = a.frequency;
      p["amplitudes_nt"] = number_list(a.amplitudes, units::nano);
      p["duration_s"] = a.duration;
      p["harmonics"] = a.harmonics;
      p["noise_free_thd"] = a.noise_free_thd;
      break;
    }
    case Protocol::FrequencySeries: {
      const auto& f = sc.frequency_series;
      p["bias_ut"] = in_unit(f.bias, units::micro);
      p["tones_hz"] = number_list(f.frequencies, 1.0);
      p["amplitude_nt"] = in_unit(f.amplitude, units::nano);
      p["duration_s"] = f.duration;
      break;
    }
    case Protocol::CarrierSuppression: {
      const auto& c = sc.carrier_suppression;
      p["range_ut"] = in_unit(c.range, units::micro);
      p["step_ut"] = in_unit(c.step, units::micro);
      p["dwell_s"] = c.dwell;
      p["reference_ut"] = in_unit(c.reference_field, units::micro);
      p["target_minimum_ut"] = in_unit(c.target_minimum, units::micro);
      p["refine_halfwidth_ut"] = in_unit(c.refine_halfwidth, units::micro);
      p["refine_step_ut"] = in_unit(c.refine_step, units::micro);
      p["bias_ut"] = in_unit(c.bias, units::micro);
      p["tone_hz"] = c.tone_frequency;
      p["tone_nt"] = in_unit(c.tone_amplitude, units::nano);
      p["duration_s"] = c.duration;
      break;
    }
  }
  j[protocol_name(sc.protocol)] = p;
  return j;
}

Json config_template(Protocol protocol, const std::string& preset_name) {
  return scenario_to_json(default_scenario(protocol, preset_name));
}

std::string config_reference() {
  std::map<std::string, std::string> defaults;
  for (Protocol p : {Protocol::BiasSweep, Protocol::Staircase, Protocol::AmplitudeSeries, Protocol::FrequencySeries,
                     Protocol::CarrierSuppression})
    flatten(config_template(p), "", defaults);
  defaults["protocol"] = "\"staircase\"";
  defaults["sensor.curve_csv"] = "\"\"";

  std::ostringstream os;
  os << "# mesim config keys (ml-paper defaults). Units are part of each key name.\n";
  for (const auto& [key, value] : key_docs()) {
    auto it = defaults.find(key);
    os << key << " = " << (it == defaults.end() ? std::string("-") : it->second) << "\n    " << value << "\n";
  }
  return os.str();
}

}  // namespace mesim
