#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mesim/common.hpp"
#include "mesim/lockin.hpp"
#include "mesim/metrology.hpp"
#include "mesim/spectrum.hpp"
#include "mesim/synth.hpp"
#include "mesim/transduction.hpp"

namespace mesim {

inline constexpr const char* kVersion = "0.1.0";

enum class Protocol { BiasSweep, Staircase, AmplitudeSeries, FrequencySeries, CarrierSuppression };
enum class SynthMode { Baseband, Passband };

std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);
std::string mode_name(SynthMode m);
SynthMode parse_mode(const std::string& name);

/// Passband runs hold the raw trace and its noise in memory; longer runs are
/// rejected instead of exhausting RAM.
inline constexpr Eigen::Index kMaxPassbandSamples = Eigen::Index(1) << 25;

struct AnalysisConfig {
  Seconds segment = 10.0;
  double overlap = 0.5;
  WindowType window = WindowType::Hann;
  Eigen::Index guard_bins = 2;
  double neighborhood = 0.10;
  double detection_sigma = 5.0;  // harmonic/tone detection threshold
};

struct BiasSweepParams {
  Tesla range = 18e-6;  // sweep covers [-range, range], up then down
  Tesla step = 0.5e-6;
  Seconds dwell = 1.0;
  Tesla window_lo = -8e-6;
  Tesla window_hi = 4e-6;
};

/// Half-integer levels -4.5 ... 4.5 nT in the order +0.5, -0.5, +1.5, -1.5, ...
std::vector<Tesla> alternating_levels(Tesla max_level = 4.5e-9, Tesla spacing = 1e-9);

struct StaircaseParams {
  Tesla bias = -3.1e-6;
  std::vector<Tesla> levels = alternating_levels();
  Seconds dwell = 5.0;
  Seconds settle = 0.0;    // 0 selects the filter settling time
  Seconds min_settled = 2.0;
  double sensitivity = 0;  // V/T; 0 selects the local slope of the curve at the bias
};

struct AmplitudeSeriesParams {
  Tesla bias = -3.1e-6;
  Hertz frequency = 10.0;
  std::vector<Tesla> amplitudes = {50e-12, 100e-12, 200e-12, 500e-12, 1e-9, 2e-9,
                                   5e-9,   10e-9,   20e-9,   50e-9,   100e-9};
  Seconds duration = 60.0;
  int harmonics = 3;
  bool noise_free_thd = true;
};

struct FrequencySeriesParams {
  Tesla bias = -3.1e-6;
  std::vector<Hertz> frequencies = {10.0, 33.0, 70.0};
  Tesla amplitude = 1e-9;
  Seconds duration = 60.0;
};

struct CarrierSuppressionParams {
  Tesla range = 125e-6;
  Tesla step = 0.5e-6;
  Seconds dwell = 0.5;
  Tesla reference_field = 0.0;  // "bias off" carrier used for the suppression figure
  Tesla target_minimum = -70.4e-6;
  Tesla refine_halfwidth = 1e-6;
  Tesla refine_step = 0.02e-6;
  Tesla bias = -3.1e-6;  // operating bias of the comparison run
  Hertz tone_frequency = 10.0;
  Tesla tone_amplitude = 1e-9;
  Seconds duration = 20.0;
};

struct Scenario {
  std::string preset = std::string(kPresetMlPaper);
  std::string curve_csv;  // optional measured curve replacing the preset knots
  SensorParams sensor = mesim::preset(kPresetMlPaper);
  ChainConfig chain;
  Hertz envelope_rate = 2000.0;
  DemodConfig demod;
  AnalysisConfig analysis;
  SynthMode mode = SynthMode::Baseband;
  Protocol protocol = Protocol::Staircase;
  std::uint64_t seed = 1;

  BiasSweepParams bias_sweep;
  StaircaseParams staircase;
  AmplitudeSeriesParams amplitude_series;
  FrequencySeriesParams frequency_series;
  CarrierSuppressionParams carrier_suppression;

  /// Throws ConfigError naming the offending parameter.
  void validate() const;
};

/// Defaults for a preset: passband rate from f_res, ADC full scale from the
/// unsuppressed carrier, protocol biases at the preset's operating point.
Scenario default_scenario(Protocol protocol, const std::string& preset_name = std::string(kPresetMlPaper));

// ---- Payloads --------------------------------------------------------------

struct BiasSweepResult {
  std::vector<std::pair<Tesla, Volt>> up;
  std::vector<std::pair<Tesla, Volt>> down;
  Volt hysteresis_opening = 0.0;  // max |up - down| at common fields
  Volt full_scale = 0.0;          // max |signed output| over the sweep
  double opening_fraction = 0.0;
  LineFit fit;
  Tesla window_lo = 0.0;
  Tesla window_hi = 0.0;
};

struct StaircaseResult {
  LodDcReport lod;
  std::vector<Tesla> levels;
  Tesla bias = 0.0;
};

struct HarmonicCheck {
  int order = 0;
  Hertz frequency = 0.0;
  Volt amplitude = 0.0;    // RMS-combined sideband amplitude
  Volt noise = 0.0;        // RMS amplitude of the neighboring bins
  double excess_sigma = 0.0;
  bool detected = false;
};

struct AmplitudePoint {
  Tesla amplitude = 0.0;
  Volt sideband = 0.0;
  double thd = 0.0;
  double thd_noise_free = 0.0;  // NaN when not computed
  std::vector<HarmonicCheck> harmonics;
};

struct AmplitudeSeriesResult {
  Hertz frequency = 0.0;
  Tesla bias = 0.0;
  double sensitivity = 0.0;  // local slope at the bias
  std::vector<AmplitudePoint> points;
  std::optional<LinearityReport> linearity;
  std::string linearity_error;
};

struct FrequencyPoint {
  Hertz frequency = 0.0;
  Tesla amplitude = 0.0;
  Volt sideband = 0.0;            // RMS-combined, coil spectrum
  Volt demod_amplitude = 0.0;     // envelope amplitude in the lock-in output
  double filter_gain = 1.0;       // |H(f)| of the lock-in low-pass
  Volt compensated_amplitude = 0.0;
  AcLodPoint lod;
  HarmonicCheck tone;             // detection of the fundamental above local noise
};

struct FrequencySeriesResult {
  Tesla bias = 0.0;
  double sensitivity = 0.0;
  std::vector<FrequencyPoint> points;
  double amplitude_spread = 0.0;  // (max - min) / mean of compensated amplitudes
};

struct SuppressionRun {
  Tesla bias = 0.0;
  Volt carrier = 0.0;
  Volt sideband = 0.0;
  double local_sensitivity = 0.0;
  double sideband_per_sensitivity = 0.0;  // T, equals h/2 for an ideal AM sideband
  double noise_asd = 0.0;                 // V/sqrt(Hz) near the tone
};

struct CarrierSuppressionResult {
  CarrierSweepReport sweep;
  std::vector<std::pair<Tesla, Volt>> refine_points;  // signed
  Tesla chosen_minimum = 0.0;
  Tesla refined_bias = 0.0;
  SuppressionRun operating;
  SuppressionRun suppressed;
  Volt reference_carrier = 0.0;
  Volt carrier_reduction = 0.0;
  double suppression_db = 0.0;
  double ratio_change = 0.0;  // suppressed / operating sideband-per-sensitivity - 1
};

using Payload =
    std::variant<BiasSweepResult, StaircaseResult, AmplitudeSeriesResult, FrequencySeriesResult, CarrierSuppressionResult>;

struct Provenance {
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::string mode;
};

struct ExperimentReport {
  Scenario scenario;
  Provenance provenance;
  Payload payload;
};

struct PlotTable {
  std::string name;  // file stem under plotdata/
  std::vector<std::string> header;
  Eigen::MatrixXd rows;
};

struct RunArtifacts {
  RawTrace trace;  // signed, coil-referred lock-in output
  std::optional<SpectrumReport> spectrum;
  std::vector<PlotTable> plots;
};

struct ExperimentResult {
  ExperimentReport report;
  RunArtifacts artifacts;
};

ExperimentResult run_bias_sweep(const Scenario& scenario);
ExperimentResult run_staircase(const Scenario& scenario);
ExperimentResult run_amplitude_series(const Scenario& scenario);
ExperimentResult run_frequency_series(const Scenario& scenario);
ExperimentResult run_carrier_suppression(const Scenario& scenario);
/// Dispatches on scenario.protocol.
ExperimentResult run(const Scenario& scenario);

// ---- Building blocks shared by the drivers ---------------------------------

/// One synthesized run: lock-in output and the wideband envelope used for
/// spectra, both coil-referred (divided by the chain gain).
struct Acquisition {
  DemodTrace demod;
  Hertz demod_input_rate = 0.0;    // rate the lock-in ran at
  Eigen::VectorXcd envelope;       // RMS-referred complex envelope
  Hertz envelope_rate = 0.0;
  DemodConfig envelope_filter;     // passband only: filter used to form the envelope
  bool envelope_filtered = false;
};

Acquisition acquire(const Scenario& scenario, const FieldProgram& program, Seconds duration, std::uint64_t run_index);

/// Two-sided spectrum of the envelope, corrected for the envelope filter.
SpectrumReport envelope_spectrum(const Scenario& scenario, const Acquisition& acq, bool detrend);

/// Amplitude of the +-offset sidebands against the mean power of the
/// neighboring bins; `exclude` lists further offsets to keep out of the
/// noise estimate.
HarmonicCheck detect_sideband(const SpectrumReport& spec, Hertz offset, const AnalysisConfig& cfg,
                              const std::vector<Hertz>& exclude);

/// Mixes a run index into the scenario seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run_index);

/// Writes report.json, trace.csv, spectrum.csv and plotdata/*.csv.
void write_run_directory(const std::filesystem::path& dir, const ExperimentResult& result);

}  // namespace mesim
