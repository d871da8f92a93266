#include "mesim/report_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mesim/csv.hpp"

namespace mesim {
namespace {

constexpr const char* kSchema = "mesim-report/1";

Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double num(const Json& j, const char* key) {
  const Json& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw DataError(std::string("report: ") + key + " is not a number");
  return v.get<double>();
}

Json pairs(const std::vector<std::pair<double, double>>& pts, const char* x, const char* y) {
  Json out = Json::array();
  for (const auto& [a, b] : pts) out.push_back(Json{{x, num(a)}, {y, num(b)}});
  return out;
}

std::vector<std::pair<double, double>> pairs_from(const Json& j, const char* x, const char* y) {
  std::vector<std::pair<double, double>> out;
  for (const auto& e : j) out.emplace_back(num(e, x), num(e, y));
  return out;
}

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

std::vector<double> numbers_from(const Json& j) {
  std::vector<double> out;
  for (const auto& e : j) out.push_back(e.is_null() ? std::numeric_limits<double>::quiet_NaN() : e.get<double>());
  return out;
}

Json to_json(const HarmonicCheck& h) {
  return Json{{"order", h.order},
              {"frequency_hz", num(h.frequency)},
              {"amplitude_v", num(h.amplitude)},
              {"noise_v", num(h.noise)},
              {"excess_sigma", num(h.excess_sigma)},
              {"detected", h.detected}};
}

HarmonicCheck harmonic_from_json(const Json& j) {
  HarmonicCheck h;
  h.order = j.at("order").get<int>();
  h.frequency = num(j, "frequency_hz");
  h.amplitude = num(j, "amplitude_v");
  h.noise = num(j, "noise_v");
  h.excess_sigma = num(j, "excess_sigma");
  h.detected = j.at("detected").get<bool>();
  return h;
}

Json to_json(const AcLodPoint& p) {
  return Json{{"offset_hz", num(p.offset)},
              {"asd_v_per_rthz", num(p.asd)},
              {"lod_t_per_rthz", num(p.lod)},
              {"bins_used", p.bins_used},
              {"flagged", p.flagged}};
}

AcLodPoint ac_point_from_json(const Json& j) {
  AcLodPoint p;
  p.offset = num(j, "offset_hz");
  p.asd = num(j, "asd_v_per_rthz");
  p.lod = num(j, "lod_t_per_rthz");
  p.bins_used = j.at("bins_used").get<Eigen::Index>();
  p.flagged = j.at("flagged").get<bool>();
  return p;
}

Json to_json(const SuppressionRun& r) {
  return Json{{"bias_t", num(r.bias)},
              {"carrier_v", num(r.carrier)},
              {"sideband_v", num(r.sideband)},
              {"local_sensitivity_v_per_t", num(r.local_sensitivity)},
              {"sideband_per_sensitivity_t", num(r.sideband_per_sensitivity)},
              {"noise_asd_v_per_rthz", num(r.noise_asd)}};
}

SuppressionRun suppression_from_json(const Json& j) {
  SuppressionRun r;
  r.bias = num(j, "bias_t");
  r.carrier = num(j, "carrier_v");
  r.sideband = num(j, "sideband_v");
  r.local_sensitivity = num(j, "local_sensitivity_v_per_t");
  r.sideband_per_sensitivity = num(j, "sideband_per_sensitivity_t");
  r.noise_asd = num(j, "noise_asd_v_per_rthz");
  return r;
}

Json payload_json(const BiasSweepResult& r) {
  return Json{{"up", pairs(r.up, "field_t", "signed_v")},
              {"down", pairs(r.down, "field_t", "signed_v")},
              {"hysteresis_opening_v", num(r.hysteresis_opening)},
              {"full_scale_v", num(r.full_scale)},
              {"opening_fraction", num(r.opening_fraction)},
              {"fit_window_lo_t", num(r.window_lo)},
              {"fit_window_hi_t", num(r.window_hi)},
              {"fit", to_json(r.fit)}};
}

Json payload_json(const StaircaseResult& r) {
  return Json{{"bias_t", num(r.bias)}, {"levels_t", numbers(r.levels)}, {"lod_dc", to_json(r.lod)}};
}

Json payload_json(const AmplitudeSeriesResult& r) {
  Json points = Json::array();
  for (const auto& p : r.points) {
    Json harmonics = Json::array();
    for (const auto& h : p.harmonics) harmonics.push_back(to_json(h));
    points.push_back(Json{{"amplitude_t", num(p.amplitude)},
                          {"sideband_v", num(p.sideband)},
                          {"thd", num(p.thd)},
                          {"thd_noise_free", num(p.thd_noise_free)},
                          {"harmonics", harmonics}});
  }
  return Json{{"tone_hz", num(r.frequency)},
              {"bias_t", num(r.bias)},
              {"sensitivity_v_per_t", num(r.sensitivity)},
              {"points", points},
              {"linearity", r.linearity ? to_json(*r.linearity) : Json(nullptr)},
              {"linearity_error", r.linearity_error}};
}

Json payload_json(const FrequencySeriesResult& r) {
  Json points = Json::array();
  for (const auto& p : r.points)
    points.push_back(Json{{"frequency_hz", num(p.frequency)},
                          {"amplitude_t", num(p.amplitude)},
                          {"sideband_v", num(p.sideband)},
                          {"demod_amplitude_v", num(p.demod_amplitude)},
                          {"filter_gain", num(p.filter_gain)},
                          {"compensated_amplitude_v", num(p.compensated_amplitude)},
                          {"lod_ac", to_json(p.lod)},
                          {"tone", to_json(p.tone)}});
  return Json{{"bias_t", num(r.bias)},
              {"sensitivity_v_per_t", num(r.sensitivity)},
              {"points", points},
              {"amplitude_spread", num(r.amplitude_spread)}};
}

Json payload_json(const CarrierSuppressionResult& r) {
  return Json{{"sweep", to_json(r.sweep)},
              {"refine", pairs(r.refine_points, "field_t", "signed_v")},
              {"chosen_minimum_t", num(r.chosen_minimum)},
              {"refined_bias_t", num(r.refined_bias)},
              {"operating", to_json(r.operating)},
              {"suppressed", to_json(r.suppressed)},
              {"reference_carrier_v", num(r.reference_carrier)},
              {"carrier_reduction_v", num(r.carrier_reduction)},
              {"suppression_db", num(r.suppression_db)},
              {"ratio_change", num(r.ratio_change)}};
}

Payload payload_from_json(Protocol protocol, const Json& j) {
  switch (protocol) {
    case Protocol::BiasSweep: {
      BiasSweepResult r;
      r.up = pairs_from(j.at("up"), "field_t", "signed_v");
      r.down = pairs_from(j.at("down"), "field_t", "signed_v");
      r.hysteresis_opening = num(j, "hysteresis_opening_v");
      r.full_scale = num(j, "full_scale_v");
      r.opening_fraction = num(j, "opening_fraction");
      r.window_lo = num(j, "fit_window_lo_t");
      r.window_hi = num(j, "fit_window_hi_t");
      r.fit = line_fit_from_json(j.at("fit"));
      return r;
    }
    case Protocol::Staircase: {
      StaircaseResult r;
      r.bias = num(j, "bias_t");
      r.levels = numbers_from(j.at("levels_t"));
      r.lod = lod_dc_from_json(j.at("lod_dc"));
      return r;
    }
    case Protocol::AmplitudeSeries: {
      AmplitudeSeriesResult r;
      r.frequency = num(j, "tone_hz");
      r.bias = num(j, "bias_t");
      r.sensitivity = num(j, "sensitivity_v_per_t");
      for (const auto& e : j.at("points")) {
        AmplitudePoint p;
        p.amplitude = num(e, "amplitude_t");
        p.sideband = num(e, "sideband_v");
        p.thd = num(e, "thd");
        p.thd_noise_free = num(e, "thd_noise_free");
        for (const auto& h : e.at("harmonics")) p.harmonics.push_back(harmonic_from_json(h));
        r.points.push_back(p);
      }
      if (!j.at("linearity").is_null()) r.linearity = linearity_from_json(j.at("linearity"));
      r.linearity_error = j.at("linearity_error").get<std::string>();
      return r;
    }
    case Protocol::FrequencySeries: {
      FrequencySeriesResult r;
      r.bias = num(j, "bias_t");
      r.sensitivity = num(j, "sensitivity_v_per_t");
      r.amplitude_spread = num(j, "amplitude_spread");
      for (const auto& e : j.at("points")) {
        FrequencyPoint p;
        p.frequency = num(e, "frequency_hz");
        p.amplitude = num(e, "amplitude_t");
        p.sideband = num(e, "sideband_v");
        p.demod_amplitude = num(e, "demod_amplitude_v");
        p.filter_gain = num(e, "filter_gain");
        p.compensated_amplitude = num(e, "compensated_amplitude_v");
        p.lod = ac_point_from_json(e.at("lod_ac"));
        p.tone = harmonic_from_json(e.at("tone"));
        r.points.push_back(p);
      }
      return r;
    }
    case Protocol::CarrierSuppression: {
      CarrierSuppressionResult r;
      r.sweep = carrier_sweep_from_json(j.at("sweep"));
      r.refine_points = pairs_from(j.at("refine"), "field_t", "signed_v");
      r.chosen_minimum = num(j, "chosen_minimum_t");
      r.refined_bias = num(j, "refined_bias_t");
      r.operating = suppression_from_json(j.at("operating"));
      r.suppressed = suppression_from_json(j.at("suppressed"));
      r.reference_carrier = num(j, "reference_carrier_v");
      r.carrier_reduction = num(j, "carrier_reduction_v");
      r.suppression_db = num(j, "suppression_db");
      r.ratio_change = num(j, "ratio_change");
      return r;
    }
  }
  throw std::logic_error("unknown protocol");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

template <typename F>
void write_with(const std::filesystem::path& path, F&& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  f(out);
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

Json to_json(const LodDcReport& r) {
  Json plateaus = Json::array();
  for (const auto& p : r.plateaus)
    plateaus.push_back(Json{{"level_t", num(p.level)},
                            {"start_s", num(p.start)},
                            {"end_s", num(p.end)},
                            {"samples", p.samples},
                            {"mean_v", num(p.mean)},
                            {"sigma_v", num(p.sigma)},
                            {"n_asd_v_per_rthz", num(p.n_asd)},
                            {"lod_t_per_rthz", num(p.lod)},
                            {"excluded", p.excluded},
                            {"note", p.note}});
  return Json{{"plateaus", plateaus},
              {"lod_mean_t_per_rthz", num(r.lod_mean)},
              {"lod_std_t_per_rthz", num(r.lod_std)},
              {"included", r.included},
              {"sensitivity_v_per_t", num(r.sensitivity)},
              {"nep", num(r.nep)},
              {"b_3db_hz", num(r.b_3db)},
              {"enbw_hz", num(r.enbw)}};
}

LodDcReport lod_dc_from_json(const Json& j) {
  LodDcReport r;
  for (const auto& e : j.at("plateaus")) {
    PlateauRecord p;
    p.level = num(e, "level_t");
    p.start = num(e, "start_s");
    p.end = num(e, "end_s");
    p.samples = e.at("samples").get<Eigen::Index>();
    p.mean = num(e, "mean_v");
    p.sigma = num(e, "sigma_v");
    p.n_asd = num(e, "n_asd_v_per_rthz");
    p.lod = num(e, "lod_t_per_rthz");
    p.excluded = e.at("excluded").get<bool>();
    p.note = e.at("note").get<std::string>();
    r.plateaus.push_back(p);
  }
  r.lod_mean = num(j, "lod_mean_t_per_rthz");
  r.lod_std = num(j, "lod_std_t_per_rthz");
  r.included = j.at("included").get<Eigen::Index>();
  r.sensitivity = num(j, "sensitivity_v_per_t");
  r.nep = num(j, "nep");
  r.b_3db = num(j, "b_3db_hz");
  r.enbw = num(j, "enbw_hz");
  return r;
}

Json to_json(const LineFit& f) {
  return Json{{"slope_v_per_t", num(f.slope)},   {"intercept_v", num(f.intercept)},
              {"slope_stderr_v_per_t", num(f.slope_stderr)}, {"rss_v2", num(f.rss)},
              {"r_squared", num(f.r_squared)}, {"points", f.points}};
}

LineFit line_fit_from_json(const Json& j) {
  LineFit f;
  f.slope = num(j, "slope_v_per_t");
  f.intercept = num(j, "intercept_v");
  f.slope_stderr = num(j, "slope_stderr_v_per_t");
  f.rss = num(j, "rss_v2");
  f.r_squared = num(j, "r_squared");
  f.points = j.at("points").get<Eigen::Index>();
  return f;
}

Json to_json(const LinearityReport& r) {
  return Json{{"points", pairs(r.points, "amplitude_t", "sideband_v")},
              {"slope_v_per_t", num(r.slope)},
              {"intercept_v", num(r.intercept)},
              {"rss_v2", num(r.rss)},
              {"r_squared", num(r.r_squared)}};
}

LinearityReport linearity_from_json(const Json& j) {
  LinearityReport r;
  r.points = pairs_from(j.at("points"), "amplitude_t", "sideband_v");
  r.slope = num(j, "slope_v_per_t");
  r.intercept = num(j, "intercept_v");
  r.rss = num(j, "rss_v2");
  r.r_squared = num(j, "r_squared");
  return r;
}

Json to_json(const CarrierSweepReport& r) {
  Json minima = Json::array();
  for (const auto& m : r.minima)
    minima.push_back(Json{{"field_t", num(m.field)}, {"carrier_v", num(m.carrier)}, {"suppression_v", num(m.suppression)}});
  return Json{{"points", pairs(r.points, "field_t", "carrier_v")},
              {"minima", minima},
              {"reference_field_t", r.reference_field ? num(*r.reference_field) : Json(nullptr)},
              {"reference_carrier_v", num(r.reference_carrier)},
              {"flagged", r.flagged},
              {"note", r.note}};
}

CarrierSweepReport carrier_sweep_from_json(const Json& j) {
  CarrierSweepReport r;
  r.points = pairs_from(j.at("points"), "field_t", "carrier_v");
  for (const auto& e : j.at("minima"))
    r.minima.push_back({num(e, "field_t"), num(e, "carrier_v"), num(e, "suppression_v")});
  if (!j.at("reference_field_t").is_null()) r.reference_field = num(j, "reference_field_t");
  r.reference_carrier = num(j, "reference_carrier_v");
  r.flagged = j.at("flagged").get<bool>();
  r.note = j.at("note").get<std::string>();
  return r;
}

Json to_json(const std::vector<AcLodPoint>& points) {
  Json out = Json::array();
  for (const auto& p : points) out.push_back(to_json(p));
  return out;
}

std::vector<AcLodPoint> ac_lod_from_json(const Json& j) {
  std::vector<AcLodPoint> out;
  for (const auto& e : j) out.push_back(ac_point_from_json(e));
  return out;
}

Json to_json(const NoiseFit& fit) {
  std::vector<double> res(fit.residuals.data(), fit.residuals.data() + fit.residuals.size());
  std::vector<double> rel(fit.relative_residuals.data(), fit.relative_residuals.data() + fit.relative_residuals.size());
  return Json{{"floor_t_per_rthz", num(fit.floor_magnetic)},
              {"floor_v_per_rthz", num(fit.model.floor_asd)},
              {"flicker_corner_hz", num(fit.model.flicker_corner)},
              {"residuals_t_per_rthz", numbers(res)},
              {"relative_residuals", numbers(rel)},
              {"rss_t2_per_hz", num(fit.rss)},
              {"converged", fit.converged}};
}

Json to_json(const ExperimentReport& report) {
  Json j;
  j["schema"] = kSchema;
  j["provenance"] = Json{{"seed", report.provenance.seed},
                         {"version", report.provenance.version},
                         {"mode", report.provenance.mode}};
  j["scenario"] = scenario_to_json(report.scenario);
  j["protocol"] = protocol_name(report.scenario.protocol);
  j["payload"] = std::visit([](const auto& p) { return payload_json(p); }, report.payload);
  return j;
}

ExperimentReport report_from_json(const Json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSchema) throw DataError("report: unsupported schema");
    ExperimentReport report;
    report.scenario = scenario_from_json(j.at("scenario"));
    const auto& prov = j.at("provenance");
    report.provenance.seed = prov.at("seed").get<std::uint64_t>();
    report.provenance.version = prov.at("version").get<std::string>();
    report.provenance.mode = prov.at("mode").get<std::string>();
    const Protocol protocol = parse_protocol(j.at("protocol").get<std::string>());
    if (protocol != report.scenario.protocol) throw DataError("report: payload protocol differs from the scenario");
    report.payload = payload_from_json(protocol, j.at("payload"));
    return report;
  } catch (const Json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("report scenario: ") + e.what());
  }
}

ExperimentReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_run_directory(const std::filesystem::path& dir, const ExperimentResult& result) {
  std::filesystem::create_directories(dir / "plotdata");
  write_text(dir / "report.json", dump(to_json(result.report)));
  write_with(dir / "trace.csv", [&](std::ostream& out) { write_trace_csv(out, result.artifacts.trace); });
  if (result.artifacts.spectrum)
    write_with(dir / "spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, *result.artifacts.spectrum); });
  for (const auto& plot : result.artifacts.plots)
    write_with(dir / "plotdata" / (plot.name + ".csv"),
               [&](std::ostream& out) { csv::write(out, plot.header, plot.rows); });
}

}  // namespace mesim
