#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mesim/common.hpp"
#include "mesim/spectrum.hpp"
#include "mesim/transduction.hpp"

namespace mesim {

// ---- DC limit of detection -------------------------------------------------

/// Noise density inside the filter bandwidth, N = sigma / sqrt(nep * b_3db).
double noise_density_from_sigma(Volt sigma, double nep, Hertz b_3db);
/// LOD = N / S in T/sqrt(Hz).
double lod_from_density(double density, double sensitivity);

/// Ratio of the sigma-based density of the signed lock-in output to the
/// two-sided density of complex white noise on the envelope. The in-phase
/// projection keeps half the complex power and the filter passes ENBW of it,
/// which gives exactly one.
inline constexpr double kDemodNoiseGain = 1.0;

struct Plateau {
  Seconds start = 0.0;
  Seconds end = 0.0;
  Tesla level = 0.0;
};

struct PlateauRecord {
  Tesla level = 0.0;
  Seconds start = 0.0;
  Seconds end = 0.0;
  Eigen::Index samples = 0;
  Volt mean = 0.0;
  Volt sigma = 0.0;
  double n_asd = 0.0;  // V/sqrt(Hz)
  double lod = 0.0;    // T/sqrt(Hz)
  bool excluded = false;
  std::string note;
};

struct LodDcReport {
  std::vector<PlateauRecord> plateaus;
  double lod_mean = 0.0;  // over included plateaus
  double lod_std = 0.0;   // sample standard deviation
  Eigen::Index included = 0;
  double sensitivity = 0.0;
  double nep = 0.0;
  Hertz b_3db = 0.0;
  Hertz enbw = 0.0;
};

struct LodDcOptions {
  Seconds settle = 0.0;           // skipped at the start of every plateau
  Seconds min_settled = 2.0;      // shorter plateaus are flagged and excluded
};

/// Per-plateau sigma, N and LOD of a signed, uniformly sampled trace.
/// Plateau boundaries come from the schedule, not from edge detection.
LodDcReport lod_dc(const Eigen::VectorXd& signed_trace, Hertz fs, Seconds t0, const std::vector<Plateau>& schedule,
                   double sensitivity, double nep, Hertz b_3db, const LodDcOptions& options = {});

// ---- AC limit of detection -------------------------------------------------

struct AcLodPoint {
  Hertz offset = 0.0;
  double asd = 0.0;  // V/sqrt(Hz), median of the neighborhood
  double lod = 0.0;  // T/sqrt(Hz)
  Eigen::Index bins_used = 0;
  bool flagged = false;
};

struct AcLodOptions {
  Hertz center = 0.0;                  // carrier frequency in the spectrum (0 for envelopes)
  std::vector<Hertz> tone_offsets;     // offsets from center to exclude (carrier is always excluded)
  double neighborhood = 0.10;          // +-10 % of the offset
  Eigen::Index guard_bins = 2;
};

/// Equivalent magnetic noise density asd(offset) / S at each offset. Both
/// sidebands are pooled when the spectrum has them.
std::vector<AcLodPoint> lod_ac(const SpectrumReport& spec, double sensitivity, const std::vector<Hertz>& offsets,
                               const AcLodOptions& options = {});

// ---- Regression ------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rss = 0.0;
  double r_squared = 0.0;
  Eigen::Index points = 0;
};

/// Ordinary least squares y = slope x + intercept. Needs >= 3 points with
/// distinct x.
LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// OLS slope of the signed curve inside [window.first, window.second].
LineFit fit_sensitivity(const std::vector<std::pair<Tesla, Volt>>& sweep, std::pair<Tesla, Tesla> window);

struct LinearityReport {
  std::vector<std::pair<Tesla, Volt>> points;  // (field amplitude, sideband amplitude)
  double slope = 0.0;
  Volt intercept = 0.0;
  double rss = 0.0;  // V^2
  double r_squared = 0.0;
};

LinearityReport linearity(const std::vector<std::pair<Tesla, Volt>>& points);

// ---- Distortion ------------------------------------------------------------

/// sqrt(sum_{k=2..n} A_k^2) / A_1 with A_k the sideband amplitude at k f_sig
/// from `center` (both sidebands combined in quadrature when present).
double thd(const SpectrumReport& spec, Hertz f_sig, int n_harm, Hertz center = 0.0);

/// RMS-combined amplitude of the sidebands at center +- offset that exist in
/// the spectrum, searched within +-guard bins.
double sideband_amplitude(const SpectrumReport& spec, Hertz center, Hertz offset, Eigen::Index guard = 1);

// ---- Carrier minima --------------------------------------------------------

struct CarrierMinimum {
  Tesla field = 0.0;
  Volt carrier = 0.0;      // |carrier| at the refined minimum
  Volt suppression = 0.0;  // reference carrier minus carrier at the minimum
};

struct CarrierSweepReport {
  std::vector<std::pair<Tesla, Volt>> points;
  std::vector<CarrierMinimum> minima;
  std::optional<Tesla> reference_field;
  Volt reference_carrier = 0.0;
  bool flagged = false;
  std::string note;
};

/// Local minima of |carrier| by a strict three-point test, refined with a
/// parabola through the neighbors. The reference carrier (for suppression) is
/// interpolated at `reference_field`, or taken as max |carrier| if absent.
CarrierSweepReport carrier_minima(const std::vector<std::pair<Tesla, Volt>>& sweep,
                                  std::optional<Tesla> reference_field = std::nullopt);

// ---- Noise model fit -------------------------------------------------------

struct NoiseFit {
  NoiseModel model;           // voltage units
  double floor_magnetic = 0;  // T/sqrt(Hz)
  Eigen::VectorXd residuals;  // fitted - measured, T/sqrt(Hz)
  Eigen::VectorXd relative_residuals;
  double rss = 0.0;
  bool converged = false;
};

/// Least-squares fit of floor * sqrt(1 + fc / f) to (frequency, T/sqrt(Hz))
/// points; floor is converted to volts with S. With `fixed_corner` the corner
/// is held and only the floor is fitted.
NoiseFit fit_noise_model(const std::vector<std::pair<Hertz, double>>& points, double sensitivity,
                         std::optional<Hertz> fixed_corner = std::nullopt);

}  // namespace mesim
