#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mesim::cli {

struct SimulateOptions {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;   // empty: $MESIM_OUT_ROOT or ./runs
  std::string mode;  // empty: as configured
  int jobs = 1;
};

struct AnalyzeOptions {
  std::string input;
  std::string kind;

  // staircase
  double sensitivity = 0.0;  // V/T
  double dwell = 5.0;
  std::optional<double> start;
  std::optional<double> settle;
  double min_settled = 2.0;
  std::vector<double> levels_nt;
  int order = 4;
  double b_3db = 7.0;
  std::optional<double> nep;

  // spectrum
  std::vector<double> offsets_hz;
  std::vector<double> tones_hz;
  double center_hz = 0.0;
  std::optional<double> f_sig;
  int harmonics = 3;
  double segment_s = 10.0;
  double overlap = 0.5;
  std::string window = "hann";
  double neighborhood = 0.10;
  long guard_bins = 2;

  // sweep
  std::optional<double> reference_ut;
  std::vector<double> window_ut = {-8.0, 4.0};
};

struct ReportOptions {
  std::vector<std::string> dirs;
  bool compare = false;
};

int simulate(const SimulateOptions& opt, std::ostream& out);
int analyze(const AnalyzeOptions& opt, std::ostream& out);
int report(const ReportOptions& opt, std::ostream& out);
int config_template(const std::string& protocol, const std::string& preset, std::ostream& out);
int config_reference(std::ostream& out);

}  // namespace mesim::cli
