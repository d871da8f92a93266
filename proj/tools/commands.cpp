#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "mesim/config.hpp"
#include "mesim/csv.hpp"
#include "mesim/experiments.hpp"
#include "mesim/lockin.hpp"
#include "mesim/metrology.hpp"
#include "mesim/report_io.hpp"
#include "mesim/spectrum.hpp"
#include "mesim/synth.hpp"

namespace fs = std::filesystem;

namespace mesim::cli {
namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  return in;
}

// Prefixes data errors with the file name so line numbers stay meaningful.
template <typename F>
auto with_file(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

fs::path output_root(const std::string& out) {
  if (!out.empty()) return out;
  if (const char* env = std::getenv("MESIM_OUT_ROOT"); env && *env) return env;
  return "runs";
}

std::string headline(const ExperimentReport& report) {
  std::ostringstream s;
  s << std::setprecision(4);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BiasSweepResult>) {
          s << "sensitivity " << p.fit.slope * 1e-3 << " kV/T, hysteresis opening " << p.hysteresis_opening << " V";
        } else if constexpr (std::is_same_v<T, StaircaseResult>) {
          s << "DC LOD " << p.lod.lod_mean / units::pico << " +- " << p.lod.lod_std / units::pico
            << " pT/rtHz over " << p.lod.included << " plateaus";
        } else if constexpr (std::is_same_v<T, AmplitudeSeriesResult>) {
          if (p.linearity)
            s << "slope " << p.linearity->slope << " V/T, r2 " << std::setprecision(8) << p.linearity->r_squared;
          else
            s << "linearity: " << p.linearity_error;
        } else if constexpr (std::is_same_v<T, FrequencySeriesResult>) {
          s << "AC LOD";
          for (const auto& pt : p.points) s << ' ' << pt.frequency << " Hz: " << pt.lod.lod / units::pico;
          s << " pT/rtHz";
        } else {
          s << p.sweep.minima.size() << " carrier minima, suppression " << p.suppression_db << " dB";
        }
      },
      report.payload);
  return s.str();
}

std::vector<Plateau> staircase_schedule(const AnalyzeOptions& opt, const RawTrace& trace) {
  std::vector<Tesla> levels;
  for (double l : opt.levels_nt) levels.push_back(l * units::nano);
  if (levels.empty()) levels = alternating_levels();
  if (!(opt.dwell > 0.0)) throw ConfigError("analyze: --dwell-s must be > 0");
  const Seconds start = opt.start.value_or(trace.t0);
  const Seconds end = trace.time(trace.samples.size() - 1) + 1.0 / trace.fs;
  std::vector<Plateau> schedule;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Seconds a = start + static_cast<double>(i) * opt.dwell;
    schedule.push_back({a, a + opt.dwell, levels[i]});
  }
  if (schedule.back().end > end + 0.5 / trace.fs)
    throw DataError("analyze: trace ends at " + format_double(end) + " s but the schedule needs " +
                    format_double(schedule.back().end) + " s");
  return schedule;
}

Json analyze_staircase(const AnalyzeOptions& opt) {
  auto in = open_input(opt.input);
  const RawTrace trace = with_file(opt.input, [&] { return read_trace_csv(in); });
  if (!(opt.sensitivity > 0.0)) throw ConfigError("analyze: --sensitivity-v-per-t must be > 0");
  DemodConfig demod;
  demod.order = opt.order;
  demod.b_3db = opt.b_3db;
  const double nep = opt.nep ? *opt.nep : enbw(demod).nep_ratio;
  const Seconds settle = opt.settle ? *opt.settle : settling_time(demod);
  return to_json(lod_dc(trace.samples, trace.fs, trace.t0, staircase_schedule(opt, trace), opt.sensitivity, nep,
                        opt.b_3db, {settle, opt.min_settled}));
}

bool starts_with_header(const std::string& path, const std::string& prefix) {
  auto in = open_input(path);
  std::string line;
  std::getline(in, line);
  return line.rfind(prefix, 0) == 0;
}

Json analyze_spectrum(const AnalyzeOptions& opt) {
  if (!(opt.sensitivity > 0.0)) throw ConfigError("analyze: --sensitivity-v-per-t must be > 0");
  SpectrumReport spec;
  if (starts_with_header(opt.input, "freq_hz")) {
    auto in = open_input(opt.input);
    spec = with_file(opt.input, [&] { return read_spectrum_csv(in); });
  } else {
    auto in = open_input(opt.input);
    const RawTrace trace = with_file(opt.input, [&] { return read_trace_csv(in); });
    WindowConfig cfg;
    cfg.segment_length = std::min<Eigen::Index>(trace.samples.size(),
                                                static_cast<Eigen::Index>(std::llround(opt.segment_s * trace.fs)));
    cfg.overlap = opt.overlap;
    if (opt.window == "hann")
      cfg.window = WindowType::Hann;
    else if (opt.window == "rectangular")
      cfg.window = WindowType::Rectangular;
    else
      throw ConfigError("analyze: --window = " + opt.window + ": expected hann or rectangular");
    cfg.detrend = true;
    spec = spectrum(trace.samples, trace.fs, cfg);
  }

  AcLodOptions ac;
  ac.center = opt.center_hz;
  ac.neighborhood = opt.neighborhood;
  ac.guard_bins = opt.guard_bins;
  ac.tone_offsets = opt.tones_hz;
  if (opt.f_sig)
    for (int k = 1; k <= opt.harmonics; ++k) ac.tone_offsets.push_back(k * *opt.f_sig);

  Json j;
  j["kind"] = "spectrum";
  j["sensitivity_v_per_t"] = opt.sensitivity;
  j["resolution_hz"] = spec.resolution();
  j["lod_ac"] = to_json(lod_ac(spec, opt.sensitivity, opt.offsets_hz, ac));
  if (opt.f_sig) {
    const double a1 = sideband_amplitude(spec, opt.center_hz, *opt.f_sig);
    j["sideband_v"] = a1;
    j["field_amplitude_t"] = 2.0 * a1 / opt.sensitivity;
    const double d = thd(spec, *opt.f_sig, opt.harmonics, opt.center_hz);
    j["thd"] = std::isfinite(d) ? Json(d) : Json(nullptr);
  }
  return j;
}

Json analyze_sweep(const AnalyzeOptions& opt) {
  auto in = open_input(opt.input);
  const auto table = with_file(opt.input, [&] { return csv::read(in); });
  const Eigen::Index h = table.column("h_tesla");
  const Eigen::Index c = table.column("c_volt");
  if (h < 0 || c < 0) throw DataError(opt.input + ": line 1: expected columns h_tesla and c_volt");
  std::vector<std::pair<Tesla, Volt>> points;
  for (Eigen::Index r = 0; r < table.data.rows(); ++r) points.emplace_back(table.data(r, h), table.data(r, c));
  std::optional<Tesla> reference;
  if (opt.reference_ut) reference = *opt.reference_ut * units::micro;

  Json j;
  j["kind"] = "sweep";
  j["carrier_minima"] = to_json(carrier_minima(points, reference));
  if (opt.window_ut.size() != 2 || !(opt.window_ut[0] < opt.window_ut[1]))
    throw ConfigError("analyze: --window-ut expects two increasing values");
  try {
    j["sensitivity_fit"] =
        to_json(fit_sensitivity(points, {opt.window_ut[0] * units::micro, opt.window_ut[1] * units::micro}));
  } catch (const SizeError& e) {
    j["sensitivity_fit"] = nullptr;
    j["sensitivity_fit_error"] = e.what();
  }
  return j;
}

struct Row {
  std::string dir;
  std::string status = "ok";
  std::string preset;
  std::string protocol;
  double sensitivity = std::nan("");
  double dc_lod = std::nan("");
  double ac_lod_10 = std::nan("");
};

Row summarize(const std::string& dir) {
  Row row;
  row.dir = dir;
  const fs::path path = fs::path(dir) / "report.json";
  if (!fs::exists(path)) {
    row.status = "missing";
    return row;
  }
  ExperimentReport r;
  try {
    r = read_report(path);
  } catch (const std::exception& e) {
    row.status = std::string("corrupt: ") + e.what();
    return row;
  }
  row.preset = r.scenario.preset;
  row.protocol = protocol_name(r.scenario.protocol);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BiasSweepResult>) {
          row.sensitivity = p.fit.slope;
        } else if constexpr (std::is_same_v<T, StaircaseResult>) {
          row.sensitivity = p.lod.sensitivity;
          row.dc_lod = p.lod.lod_mean;
        } else if constexpr (std::is_same_v<T, AmplitudeSeriesResult>) {
          row.sensitivity = p.sensitivity;
        } else if constexpr (std::is_same_v<T, FrequencySeriesResult>) {
          row.sensitivity = p.sensitivity;
          for (const auto& pt : p.points)
            if (std::abs(pt.frequency - 10.0) < 1e-9) row.ac_lod_10 = pt.lod.lod;
        } else {
          row.sensitivity = p.operating.local_sensitivity;
        }
      },
      r.payload);
  row.sensitivity = std::abs(row.sensitivity);
  return row;
}

std::string cell(double v, double scale) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream s;
  s << std::setprecision(4) << v / scale;
  return s.str();
}

std::string ratio(double ref, double v) {
  if (!std::isfinite(ref) || !std::isfinite(v) || v == 0.0) return "-";
  std::ostringstream s;
  s << std::setprecision(3) << ref / v;
  return s.str();
}

}  // namespace

int simulate(const SimulateOptions& opt, std::ostream& out) {
  if (opt.jobs < 1) throw ConfigError("simulate: --jobs must be >= 1");
  std::vector<Scenario> scenarios;
  std::vector<fs::path> dirs;
  const fs::path root = output_root(opt.out);
  for (const auto& path : opt.configs) {
    Scenario sc = load_scenario(path);
    if (opt.seed) sc.seed = *opt.seed;
    if (!opt.mode.empty()) sc.mode = parse_mode(opt.mode);
    try {
      sc.validate();
    } catch (const std::exception& e) {
      throw ConfigError(path + ": " + e.what());
    }
    scenarios.push_back(sc);
    const std::string stem = fs::path(path).stem().string();
    dirs.push_back(opt.configs.size() == 1 && !opt.out.empty() ? root : root / stem);
  }

  std::vector<std::exception_ptr> errors(scenarios.size());
  std::vector<std::string> lines(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        const ExperimentResult result = run(scenarios[i]);
        write_run_directory(dirs[i], result);
        lines[i] = dirs[i].string() + ": " + headline(result.report);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::min<int>(opt.jobs, static_cast<int>(scenarios.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < scenarios.size(); ++i)
    if (!errors[i]) out << lines[i] << '\n';
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return 0;
}

int analyze(const AnalyzeOptions& opt, std::ostream& out) {
  Json j;
  if (opt.kind == "staircase")
    j = analyze_staircase(opt);
  else if (opt.kind == "spectrum")
    j = analyze_spectrum(opt);
  else if (opt.kind == "sweep")
    j = analyze_sweep(opt);
  else
    throw ConfigError("analyze: --kind = " + opt.kind + ": expected staircase, spectrum or sweep");
  out << dump(j);
  return 0;
}

int report(const ReportOptions& opt, std::ostream& out) {
  std::vector<Row> rows;
  for (const auto& d : opt.dirs) rows.push_back(summarize(d));
  const auto ref = std::find_if(rows.begin(), rows.end(), [](const Row& r) { return r.status == "ok"; });

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"run", "preset", "protocol", "S_kV_per_T", "dc_lod_pT_rtHz", "ac_lod_10Hz_pT_rtHz"};
  if (opt.compare) header.insert(header.end(), {"S_ref/S", "dc/dc_ref", "ac/ac_ref"});
  table.push_back(header);
  for (const auto& r : rows) {
    if (r.status != "ok") {
      table.push_back({r.dir, r.status});
      continue;
    }
    std::vector<std::string> line = {r.dir,
                                     r.preset,
                                     r.protocol,
                                     cell(r.sensitivity, 1e3),
                                     cell(r.dc_lod, units::pico),
                                     cell(r.ac_lod_10, units::pico)};
    if (opt.compare)
      line.insert(line.end(),
                  {ratio(ref->sensitivity, r.sensitivity), ratio(r.dc_lod, ref->dc_lod), ratio(r.ac_lod_10, ref->ac_lod_10)});
    table.push_back(line);
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table)
    if (line.size() == header.size())
      for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      out << (c ? "  " : "") << line[c];
      if (line.size() == header.size() && c + 1 < line.size()) out << std::string(width[c] - line[c].size(), ' ');
    }
    out << '\n';
  }
  if (ref == rows.end()) throw DataError("report: no valid report.json among the given directories");
  return 0;
}

int config_template(const std::string& protocol, const std::string& preset, std::ostream& out) {
  out << dump(mesim::config_template(parse_protocol(protocol), preset));
  return 0;
}

int config_reference(std::ostream& out) {
  out << mesim::config_reference();
  return 0;
}

}  // namespace mesim::cli
