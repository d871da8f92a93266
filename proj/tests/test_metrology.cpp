#include <cmath>
#include <random>

#include "doctest.h"

#include "mesim/lockin.hpp"
#include "mesim/metrology.hpp"

using namespace mesim;

namespace {

// Plateau with mean `level` and sample standard deviation exactly `sigma`.
Eigen::VectorXd alternating(Eigen::Index n, double level, double sigma) {
  Eigen::VectorXd x(n);
  for (Eigen::Index k = 0; k < n; ++k) x(k) = (k % 2 ? 1.0 : -1.0);
  x *= sigma * std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
  return x.array() + level;
}

}  // namespace

TEST_SUITE("metrology") {

TEST_CASE("LOD arithmetic") {
  const double n = noise_density_from_sigma(7.5e-6, 1.13, 7.0);
  CHECK(n == doctest::Approx(2.667e-6).epsilon(1e-3));
  CHECK(lod_from_density(n, 171e3) == doctest::Approx(15.6e-12).epsilon(2e-3));
}

TEST_CASE("lod_dc on plateaus of known sigma") {
  const double fs = 1000.0;
  Eigen::VectorXd trace(4000);
  trace << alternating(2000, 1e-3, 7.5e-6), alternating(2000, -1e-3, 7.5e-6);
  const LodDcReport r = lod_dc(trace, fs, 0.0, {{0.0, 2.0, 1e-9}, {2.0, 4.0, -1e-9}}, 171e3, 1.13, 7.0, {0.0, 1.0});
  REQUIRE(r.included == 2);
  CHECK(r.plateaus[0].sigma == doctest::Approx(7.5e-6).epsilon(1e-9));
  CHECK(r.plateaus[1].mean == doctest::Approx(-1e-3));
  CHECK(r.lod_mean == doctest::Approx(15.6e-12).epsilon(2e-3));
  CHECK(r.lod_std == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("lod_dc excludes plateaus shorter than the settled minimum") {
  const Eigen::VectorXd trace = alternating(3000, 0.0, 1e-6);
  const LodDcReport r = lod_dc(trace, 1000.0, 0.0, {{0.0, 0.5, 0.0}, {0.5, 3.0, 0.0}}, 1e5, 1.13, 7.0, {0.3, 2.0});
  CHECK(r.plateaus[0].excluded);
  CHECK_FALSE(r.plateaus[0].note.empty());
  CHECK_FALSE(r.plateaus[1].excluded);
  CHECK(r.included == 1);
}

TEST_CASE("white noise gives a flat AC LOD") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double fs = 1000.0;
  Eigen::VectorXd x(1 << 17);
  for (auto& v : x) v = normal(rng);
  WindowConfig cfg;
  cfg.segment_length = 4096;
  const SpectrumReport spec = spectrum(x, fs, cfg);
  const auto pts = lod_ac(spec, 2.0, {10.0, 100.0, 300.0});
  for (const auto& p : pts) {
    CHECK_FALSE(p.flagged);
    // median of a chi-square(2 dof, many averages) sits just below the mean
    CHECK(p.lod == doctest::Approx(std::sqrt(2.0 / fs) / 2.0).epsilon(0.06));
  }
}

TEST_CASE("AC LOD flags offsets with no usable neighborhood") {
  WindowConfig cfg;
  cfg.segment_length = 64;
  const SpectrumReport spec = spectrum(Eigen::VectorXd(Eigen::VectorXd::Ones(256)), 64.0, cfg);
  const auto pts = lod_ac(spec, 1.0, {1.0});
  CHECK(pts[0].flagged);
  CHECK(std::isnan(pts[0].lod));
}

TEST_CASE("line fit recovers an exact line") {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(10, -1, 1);
  Eigen::VectorXd y = 3.0 * x.array() + 0.5;
  const LineFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(3.0));
  CHECK(f.intercept == doctest::Approx(0.5));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.rss == doctest::Approx(0.0).epsilon(1e-20));
  CHECK_THROWS_AS(fit_line(x.head(2), y.head(2)), SizeError);
  CHECK_THROWS_AS(fit_line(Eigen::VectorXd::Ones(4), y.head(4)), DataError);
}

TEST_CASE("linearity needs three points") {
  CHECK_THROWS_AS(linearity({{1e-9, 1e-4}}), SizeError);
  const auto r = linearity({{1e-9, 1e-4}, {2e-9, 2e-4}, {4e-9, 4e-4}});
  CHECK(r.slope == doctest::Approx(1e5));
}

TEST_CASE("sensitivity fit uses only the window") {
  std::vector<std::pair<Tesla, Volt>> sweep;
  for (int i = -20; i <= 20; ++i) {
    const double h = i * 1e-6;
    sweep.emplace_back(h, std::abs(h) < 5e-6 ? 1e5 * h : 0.5 * (h > 0 ? 1 : -1));
  }
  CHECK(fit_sensitivity(sweep, {-4e-6, 4e-6}).slope == doctest::Approx(1e5));
}

TEST_CASE("THD of a spectrum with known harmonics") {
  const double fs = 1000.0;
  Eigen::VectorXd x(10000);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double t = static_cast<double>(k) / fs;
    x(k) = std::sin(2 * kPi * 10 * t) + 0.03 * std::sin(2 * kPi * 20 * t) + 0.04 * std::sin(2 * kPi * 30 * t);
  }
  WindowConfig cfg;
  cfg.segment_length = 10000;
  const SpectrumReport spec = spectrum(x, fs, cfg);
  CHECK(thd(spec, 10.0, 3) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(sideband_amplitude(spec, 0.0, 20.0) == doctest::Approx(0.03).epsilon(1e-3));
}

TEST_CASE("carrier minima of |cos|") {
  std::vector<std::pair<Tesla, Volt>> sweep;
  for (int i = 0; i <= 400; ++i) {
    const double h = -60e-6 + i * 0.4e-6;
    sweep.emplace_back(h, std::cos(h / 20e-6));
  }
  const CarrierSweepReport r = carrier_minima(sweep, 0.0);
  REQUIRE(r.minima.size() == 3);
  CHECK(r.minima[1].field == doctest::Approx(kPi / 2 * 20e-6).epsilon(1e-3));
  CHECK(r.reference_carrier == doctest::Approx(1.0));
  CHECK(r.minima[0].suppression == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("two-point sweep is flagged without minima") {
  const CarrierSweepReport r = carrier_minima({{0.0, 1.0}, {1e-6, 0.5}});
  CHECK(r.flagged);
  CHECK(r.minima.empty());
}

TEST_CASE("noise model fit recovers floor and corner") {
  NoiseModel truth{2e-6, 40.0, 0};
  std::vector<std::pair<Hertz, double>> pts;
  for (double f : {5.0, 10.0, 33.0, 70.0, 150.0}) pts.emplace_back(f, truth.density(f) / 1e5);
  const NoiseFit fit = fit_noise_model(pts, 1e5);
  CHECK(fit.converged);
  CHECK(fit.model.floor_asd == doctest::Approx(2e-6).epsilon(1e-4));
  CHECK(fit.model.flicker_corner == doctest::Approx(40.0).epsilon(1e-3));

  const NoiseFit fixed = fit_noise_model({{10.0, truth.density(10.0) / 1e5}}, 1e5, 40.0);
  CHECK(fixed.model.floor_asd == doctest::Approx(2e-6).epsilon(1e-9));
}

}
