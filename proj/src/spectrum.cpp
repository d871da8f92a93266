#include "mesim/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mesim/csv.hpp"

namespace mesim {
namespace {

struct WelchPlan {
  Eigen::Index n;
  Eigen::Index step;
  Eigen::Index segments;
  Eigen::VectorXd window;
  double sum_w;
  double sum_w2;
};

WelchPlan plan(Eigen::Index length, const WindowConfig& cfg) {
  if (cfg.segment_length < 2) throw SizeError("spectrum: segment length must be >= 2");
  if (!(cfg.overlap >= 0.0 && cfg.overlap < 1.0)) throw ConfigError("spectrum: overlap must lie in [0, 1)");
  if (length < cfg.segment_length)
    throw SizeError("spectrum: trace of " + std::to_string(length) + " samples is shorter than one segment (" +
                    std::to_string(cfg.segment_length) + ")");
  WelchPlan p;
  p.n = cfg.segment_length;
  p.step = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(static_cast<double>(p.n) * (1.0 - cfg.overlap))));
  p.segments = 1 + (length - p.n) / p.step;
  p.window = window_coefficients(cfg.window, p.n);
  p.sum_w = p.window.sum();
  p.sum_w2 = p.window.squaredNorm();
  return p;
}

void fill_metadata(SpectrumReport& r, const WelchPlan& p, const WindowConfig& cfg, Hertz fs, bool two_sided) {
  r.two_sided = two_sided;
  r.window = window_name(cfg.window);
  r.segment_length = p.n;
  r.overlap = cfg.overlap;
  r.averages = p.segments;
  r.fs = fs;
  r.coherent_gain = p.sum_w / static_cast<double>(p.n);
  r.enbw_bins = static_cast<double>(p.n) * p.sum_w2 / (p.sum_w * p.sum_w);
  r.enbw_hz = r.enbw_bins * fs / static_cast<double>(p.n);
}

}  // namespace

Eigen::VectorXd window_coefficients(WindowType type, Eigen::Index n) {
  if (type == WindowType::Rectangular) return Eigen::VectorXd::Ones(n);
  // Periodic Hann: coherent gain exactly 1/2, ENBW exactly 1.5 bins.
  Eigen::VectorXd w(n);
  for (Eigen::Index k = 0; k < n; ++k)
    w(k) = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
  return w;
}

std::string window_name(WindowType type) { return type == WindowType::Hann ? "hann" : "rectangular"; }

SpectrumReport spectrum(const Eigen::VectorXd& samples, Hertz fs, const WindowConfig& cfg) {
  const WelchPlan p = plan(samples.size(), cfg);
  const Eigen::Index bins = p.n / 2 + 1;
  Eigen::VectorXd power = Eigen::VectorXd::Zero(bins);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> segment(static_cast<std::size_t>(p.n));
  std::vector<Complex> out;
  for (Eigen::Index s = 0; s < p.segments; ++s) {
    const Eigen::Index start = s * p.step;
    const double mean = cfg.detrend ? samples.segment(start, p.n).mean() : 0.0;
    for (Eigen::Index k = 0; k < p.n; ++k)
      segment[static_cast<std::size_t>(k)] = (samples(start + k) - mean) * p.window(k);
    fft.fwd(out, segment);
    for (Eigen::Index k = 0; k < bins; ++k) power(k) += std::norm(out[static_cast<std::size_t>(k)]);
  }
  power /= static_cast<double>(p.segments);

  SpectrumReport r;
  fill_metadata(r, p, cfg, fs, false);
  r.frequency = Eigen::VectorXd::LinSpaced(bins, 0.0, static_cast<double>(bins - 1)) * (fs / static_cast<double>(p.n));
  r.amplitude.resize(bins);
  r.asd.resize(bins);
  for (Eigen::Index k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (p.n % 2 == 0 && k == bins - 1);
    const double fold = edge ? 1.0 : 2.0;
    r.amplitude(k) = fold * std::sqrt(power(k)) / p.sum_w;
    r.asd(k) = std::sqrt(fold * power(k) / (fs * p.sum_w2));
  }
  return r;
}

SpectrumReport spectrum(const Eigen::VectorXcd& samples, Hertz fs, const WindowConfig& cfg) {
  const WelchPlan p = plan(samples.size(), cfg);
  Eigen::VectorXd power = Eigen::VectorXd::Zero(p.n);

  Eigen::FFT<double> fft;
  std::vector<Complex> segment(static_cast<std::size_t>(p.n));
  std::vector<Complex> out;
  for (Eigen::Index s = 0; s < p.segments; ++s) {
    const Eigen::Index start = s * p.step;
    const Complex mean = cfg.detrend ? samples.segment(start, p.n).mean() : Complex(0.0);
    for (Eigen::Index k = 0; k < p.n; ++k)
      segment[static_cast<std::size_t>(k)] = (samples(start + k) - mean) * p.window(k);
    fft.fwd(out, segment);
    for (Eigen::Index k = 0; k < p.n; ++k) power(k) += std::norm(out[static_cast<std::size_t>(k)]);
  }
  power /= static_cast<double>(p.segments);

  SpectrumReport r;
  fill_metadata(r, p, cfg, fs, true);
  r.frequency.resize(p.n);
  r.amplitude.resize(p.n);
  r.asd.resize(p.n);
  const Eigen::Index lowest = -(p.n / 2);
  for (Eigen::Index i = 0; i < p.n; ++i) {
    const Eigen::Index signed_k = lowest + i;
    const Eigen::Index k = signed_k < 0 ? signed_k + p.n : signed_k;
    r.frequency(i) = static_cast<double>(signed_k) * fs / static_cast<double>(p.n);
    r.amplitude(i) = std::sqrt(power(k)) / p.sum_w;
    r.asd(i) = std::sqrt(power(k) / (fs * p.sum_w2));
  }
  return r;
}

Eigen::Index SpectrumReport::bin(Hertz f) const {
  if (frequency.size() == 0) throw RangeError("spectrum: empty report");
  const double res = frequency.size() > 1 ? frequency(1) - frequency(0) : 1.0;
  const double lo = frequency(0) - 0.5 * res;
  const double hi = frequency(frequency.size() - 1) + 0.5 * res;
  if (f < lo || f > hi)
    throw RangeError("spectrum: " + format_double(f) + " Hz outside [" + format_double(frequency(0)) + ", " +
                     format_double(frequency(frequency.size() - 1)) + "] Hz");
  const auto k = static_cast<Eigen::Index>(std::llround((f - frequency(0)) / res));
  return std::clamp<Eigen::Index>(k, 0, frequency.size() - 1);
}

double SpectrumReport::peak_amplitude(Hertz f, Eigen::Index guard) const {
  const Eigen::Index k = bin(f);
  const Eigen::Index lo = std::max<Eigen::Index>(0, k - guard);
  const Eigen::Index hi = std::min<Eigen::Index>(amplitude.size() - 1, k + guard);
  return amplitude.segment(lo, hi - lo + 1).maxCoeff();
}

double SpectrumReport::total_power() const {
  const double res = frequency.size() > 1 ? frequency(1) - frequency(0) : 0.0;
  return asd.squaredNorm() * res;
}

void write_spectrum_csv(std::ostream& out, const SpectrumReport& report) {
  Eigen::MatrixXd rows(report.frequency.size(), 3);
  rows.col(0) = report.frequency;
  rows.col(1) = report.amplitude;
  rows.col(2) = report.asd;
  csv::write(out, {"freq_hz", "amplitude_v", "asd_v_per_sqrthz"}, rows);
}

SpectrumReport read_spectrum_csv(std::istream& in) {
  const auto table = csv::read(in, {"freq_hz", "amplitude_v", "asd_v_per_sqrthz"});
  SpectrumReport r;
  r.frequency = table.data.col(0);
  r.amplitude = table.data.col(1);
  r.asd = table.data.col(2);
  const Eigen::Index n = r.frequency.size();
  if (n < 2) throw DataError("spectrum CSV: need at least two bins");
  const double res = r.frequency(1) - r.frequency(0);
  if (!(res > 0.0)) throw DataError("spectrum CSV: frequencies must be increasing");
  for (Eigen::Index k = 1; k < n; ++k)
    if (std::abs(r.frequency(k) - r.frequency(k - 1) - res) > 1e-6 * res)
      throw DataError("line " + std::to_string(k + 2) + ": non-uniform frequency spacing");
  r.two_sided = r.frequency(0) < 0.0;
  r.segment_length = r.two_sided ? n : 2 * (n - 1);
  r.fs = res * static_cast<double>(r.segment_length);
  r.window = "unknown";
  r.averages = 1;
  r.coherent_gain = 0.5;
  r.enbw_bins = 1.5;
  r.enbw_hz = 1.5 * res;
  return r;
}

}  // namespace mesim
