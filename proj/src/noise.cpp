#include <cmath>
#include <random>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "mesim/synth.hpp"

namespace mesim {
namespace {

// Smallest 2^a 3^b 5^c >= n; kissfft is fastest on these radices.
Eigen::Index fast_length(Eigen::Index n) {
  Eigen::Index best = 1;
  while (best < n) best *= 2;
  for (Eigen::Index p5 = 1; p5 < 2 * n; p5 *= 5)
    for (Eigen::Index p35 = p5; p35 < 2 * n; p35 *= 3) {
      Eigen::Index v = p35;
      while (v < n) v *= 2;
      if (v < best) best = v;
    }
  return best;
}

}  // namespace

Eigen::VectorXcd carrier_noise(const NoiseModel& model, Hertz fs, Eigen::Index n, Hertz band_limit) {
  if (n <= 0) return Eigen::VectorXcd();
  if (!model.enabled()) return Eigen::VectorXcd::Zero(n);
  if (!(fs > 0.0)) throw ConfigError("carrier_noise: fs must be > 0");

  // Shape complex white noise directly in the frequency domain: bin k gets
  // variance M * fs * density^2 so the inverse transform (scaled by 1/M) has
  // two-sided PSD density(f)^2.
  const Eigen::Index m = fast_length(n);
  const double df = fs / static_cast<double>(m);
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));

  std::vector<Complex> spectrum(static_cast<std::size_t>(m));
  const double scale = std::sqrt(static_cast<double>(m) * fs);
  const double lowest = model.density(df);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index signed_k = k <= m / 2 ? k : k - m;
    const double f = static_cast<double>(signed_k) * df;
    const double re = normal(rng);
    const double im = normal(rng);
    double g = 0.0;
    if (std::abs(f) <= band_limit) g = signed_k == 0 ? lowest : model.density(f);
    spectrum[static_cast<std::size_t>(k)] = Complex(re, im) * (g * scale);
  }

  std::vector<Complex> time;
  Eigen::FFT<double> fft;
  fft.inv(time, spectrum);
  spectrum.clear();
  spectrum.shrink_to_fit();

  Eigen::VectorXcd out(n);
  for (Eigen::Index k = 0; k < n; ++k) out(k) = time[static_cast<std::size_t>(k)];
  return out;
}

}  // namespace mesim
