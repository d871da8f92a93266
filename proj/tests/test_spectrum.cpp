#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "mesim/spectrum.hpp"

using namespace mesim;

TEST_SUITE("spectrum") {

TEST_CASE("white noise reads its one-sided density") {
  std::mt19937_64 rng(5);
  const double fs = 1000.0, sigma = 0.1;
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::VectorXd x(1 << 18);
  for (auto& v : x) v = normal(rng);
  for (WindowType w : {WindowType::Hann, WindowType::Rectangular}) {
    WindowConfig cfg;
    cfg.segment_length = 1024;
    cfg.window = w;
    const SpectrumReport s = spectrum(x, fs, cfg);
    const double expected = sigma * std::sqrt(2.0 / fs);
    CHECK(s.asd.segment(5, 500).mean() == doctest::Approx(expected).epsilon(0.02));
    CHECK(s.total_power() == doctest::Approx(sigma * sigma).epsilon(0.02));
  }
}

TEST_CASE("complex white noise reads its two-sided density") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double fs = 500.0;
  Eigen::VectorXcd z(1 << 17);
  for (auto& v : z) v = Complex(normal(rng), normal(rng));
  WindowConfig cfg;
  cfg.segment_length = 512;
  const SpectrumReport s = spectrum(z, fs, cfg);
  CHECK(s.two_sided);
  CHECK(s.frequency(0) == doctest::Approx(-fs / 2));
  CHECK(s.asd.mean() == doctest::Approx(std::sqrt(2.0 / fs)).epsilon(0.02));
}

TEST_CASE("tone amplitude is coherent-gain corrected") {
  const double fs = 1000.0;
  Eigen::VectorXd x(8192);
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = 0.25 * std::sin(2 * kPi * 62.5 * static_cast<double>(k) / fs);
  WindowConfig cfg;
  cfg.segment_length = 2048;
  const SpectrumReport s = spectrum(x, fs, cfg);
  CHECK(s.peak_amplitude(62.5, 0) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(s.enbw_bins == doctest::Approx(1.5).epsilon(1e-3));
  CHECK(s.averages == 7);
}

TEST_CASE("detrend removes the segment mean") {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(4096, 3.0);
  WindowConfig cfg;
  cfg.segment_length = 1024;
  cfg.detrend = true;
  CHECK(spectrum(x, 100.0, cfg).amplitude.maxCoeff() < 1e-12);
}

TEST_CASE("segment longer than the data is rejected") {
  WindowConfig cfg;
  cfg.segment_length = 100;
  CHECK_THROWS(spectrum(Eigen::VectorXd(Eigen::VectorXd::Zero(50)), 10.0, cfg));
}

TEST_CASE("spectrum CSV round trip") {
  WindowConfig cfg;
  cfg.segment_length = 64;
  const SpectrumReport s = spectrum(Eigen::VectorXd(Eigen::VectorXd::LinSpaced(256, 0, 1)), 10.0, cfg);
  std::stringstream io;
  write_spectrum_csv(io, s);
  const SpectrumReport back = read_spectrum_csv(io);
  CHECK((back.asd - s.asd).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.resolution() == doctest::Approx(s.resolution()).epsilon(1e-9));
}

}
