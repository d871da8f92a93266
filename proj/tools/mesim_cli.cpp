// mesim: simulate, analyze and compare magnetoelectric sensor experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal error.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "mesim/common.hpp"
#include "mesim/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

int fail(int code, const std::string& message) {
  std::cerr << "mesim: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mesim::cli;

  CLI::App app{"Magnetoelectric sensor readout simulator", "mesim"};
  app.set_version_flag("--version", mesim::kVersion);
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run experiment configs and write run directories");
  simulate_cmd->add_option("config", sim.configs, "Scenario config files (JSON)")->required()->check(CLI::ExistingFile);
  simulate_cmd->add_option("--seed", sim.seed, "Override the configured seed");
  simulate_cmd->add_option("--out", sim.out,
                           "Run directory (one config) or parent directory (several); default $MESIM_OUT_ROOT/<stem> "
                           "or runs/<stem>");
  simulate_cmd->add_option("--mode", sim.mode, "Synthesis mode override")
      ->check(CLI::IsMember({"baseband", "passband"}));
  simulate_cmd->add_option("--jobs,-j", sim.jobs, "Concurrent scenarios")->check(CLI::PositiveNumber);

  AnalyzeOptions an;
  auto* analyze_cmd = app.add_subcommand("analyze", "Apply the metrology pipeline to an external CSV");
  analyze_cmd->add_option("input", an.input, "t_s,v_volt trace, freq_hz spectrum or h_tesla,c_volt sweep")
      ->required();
  analyze_cmd->add_option("--kind", an.kind, "Analysis kind")
      ->required()
      ->check(CLI::IsMember({"staircase", "spectrum", "sweep"}));
  analyze_cmd->add_option("--sensitivity-v-per-t", an.sensitivity, "Sensitivity S in V/T");
  analyze_cmd->add_option("--dwell-s", an.dwell, "Plateau duration")->capture_default_str();
  analyze_cmd->add_option("--start-s", an.start, "Start of the first plateau (default: first sample)");
  analyze_cmd->add_option("--settle-s", an.settle, "Skipped at each plateau start (default: filter settling time)");
  analyze_cmd->add_option("--min-settled-s", an.min_settled, "Shorter plateaus are excluded")->capture_default_str();
  analyze_cmd->add_option("--levels-nt", an.levels_nt, "Plateau levels in order (default: +-0.5 ... +-4.5 nT)");
  analyze_cmd->add_option("--order", an.order, "Lock-in filter order")->capture_default_str();
  analyze_cmd->add_option("--b3db-hz", an.b_3db, "Lock-in -3 dB bandwidth")->capture_default_str();
  analyze_cmd->add_option("--nep", an.nep, "ENBW / b_3db ratio (default: computed from the filter)");
  analyze_cmd->add_option("--offsets-hz", an.offsets_hz, "Offsets for the AC LOD");
  analyze_cmd->add_option("--tones-hz", an.tones_hz, "Tone offsets excluded from the noise estimate");
  analyze_cmd->add_option("--center-hz", an.center_hz, "Carrier frequency in the spectrum")->capture_default_str();
  analyze_cmd->add_option("--f-sig", an.f_sig, "Signal tone offset for sideband and THD");
  analyze_cmd->add_option("--harmonics", an.harmonics, "Highest harmonic in the THD")->capture_default_str();
  analyze_cmd->add_option("--segment-s", an.segment_s, "Welch segment for trace input")->capture_default_str();
  analyze_cmd->add_option("--overlap", an.overlap, "Welch overlap")->capture_default_str();
  analyze_cmd->add_option("--window", an.window, "hann or rectangular")->capture_default_str();
  analyze_cmd->add_option("--neighborhood", an.neighborhood, "AC LOD neighborhood fraction")->capture_default_str();
  analyze_cmd->add_option("--guard-bins", an.guard_bins, "Bins excluded around tones")->capture_default_str();
  analyze_cmd->add_option("--reference-ut", an.reference_ut, "Reference field for the carrier suppression");
  analyze_cmd->add_option("--window-ut", an.window_ut, "Sensitivity fit window")->expected(2)->capture_default_str();

  ReportOptions rep;
  auto* report_cmd = app.add_subcommand("report", "Summarize run directories");
  report_cmd->add_option("dirs", rep.dirs, "Run directories")->required();
  report_cmd->add_flag("--compare", rep.compare, "Add columns giving how many times better the first valid run is");

  std::string protocol = "staircase";
  std::string preset = "ml-paper";
  auto* template_cmd = app.add_subcommand("config-template", "Print a complete default config");
  template_cmd->add_option("--protocol", protocol)->capture_default_str();
  template_cmd->add_option("--preset", preset)->capture_default_str();

  auto* reference_cmd = app.add_subcommand("config-reference", "Print every config key with unit and default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate_cmd) return simulate(sim, std::cout);
    if (*analyze_cmd) return analyze(an, std::cout);
    if (*report_cmd) return report(rep, std::cout);
    if (*template_cmd) return config_template(protocol, preset, std::cout);
    if (*reference_cmd) return config_reference(std::cout);
  } catch (const mesim::ConfigError& e) {
    return fail(kExitConfig, e.what());
  } catch (const mesim::RangeError& e) {
    return fail(kExitConfig, e.what());
  } catch (const mesim::DataError& e) {
    return fail(kExitData, e.what());
  } catch (const mesim::SizeError& e) {
    return fail(kExitData, e.what());
  } catch (const std::exception& e) {
    return fail(kExitInternal, std::string("internal error: ") + e.what());
  }
  return kExitInternal;
}
