#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>

#include "mesim/common.hpp"

namespace mesim {

enum class WindowType { Hann, Rectangular };

struct WindowConfig {
  Eigen::Index segment_length = 0;
  double overlap = 0.5;  // fraction of a segment shared with the next
  WindowType window = WindowType::Hann;
  bool detrend = false;  // subtract each segment's mean before windowing
};

/// Welch-averaged spectrum.
///
/// Real input gives a single-sided spectrum on [0, fs/2]; complex input gives
/// a two-sided spectrum on [-fs/2, fs/2) in ascending frequency order. The
/// amplitude column is coherent-gain corrected (a real tone of peak A, or a
/// complex exponential of magnitude A, reads A at its bin). The asd column is
/// normalized by the window's incoherent gain so white noise of density n
/// reads n (one-sided for real input, two-sided for complex input).
struct SpectrumReport {
  Eigen::VectorXd frequency;
  Eigen::VectorXd amplitude;
  Eigen::VectorXd asd;

  bool two_sided = false;
  std::string window;
  Eigen::Index segment_length = 0;
  double overlap = 0.0;
  Eigen::Index averages = 0;
  Hertz fs = 0.0;
  double coherent_gain = 1.0;  // mean of the window
  double enbw_bins = 1.0;      // N sum(w^2) / sum(w)^2
  Hertz enbw_hz = 0.0;

  Hertz resolution() const { return fs / static_cast<double>(segment_length); }
  /// Index of the bin nearest to f; throws RangeError outside the span.
  Eigen::Index bin(Hertz f) const;
  /// Largest amplitude within +-guard bins of f (tolerates scalloping).
  double peak_amplitude(Hertz f, Eigen::Index guard = 1) const;
  /// Sum of psd * resolution over all bins.
  double total_power() const;
};

SpectrumReport spectrum(const Eigen::VectorXd& samples, Hertz fs, const WindowConfig& cfg);
SpectrumReport spectrum(const Eigen::VectorXcd& samples, Hertz fs, const WindowConfig& cfg);

Eigen::VectorXd window_coefficients(WindowType type, Eigen::Index n);
std::string window_name(WindowType type);

// CSV `freq_hz,amplitude_v,asd_v_per_sqrthz`.
void write_spectrum_csv(std::ostream& out, const SpectrumReport& report);
SpectrumReport read_spectrum_csv(std::istream& in);

}  // namespace mesim
