#include <cmath>

#include "doctest.h"

#include "mesim/lockin.hpp"
#include "mesim/synth.hpp"

using namespace mesim;

TEST_SUITE("lockin") {

TEST_CASE("single pole ENBW is pi/2 times the cutoff") {
  DemodConfig cfg;
  cfg.order = 1;
  cfg.b_3db = 7.0;
  CHECK(enbw(cfg).nep_ratio == doctest::Approx(kPi / 2).epsilon(1e-6));
}

TEST_CASE("fourth-order cascade has NEP 1.13") {
  DemodConfig cfg;
  const EnbwResult r = enbw(cfg);
  CHECK(r.nep_ratio == doctest::Approx(1.13).epsilon(0.005));
  CHECK(r.enbw == doctest::Approx(r.nep_ratio * 7.0));
}

TEST_CASE("cascade is -3 dB at b_3db") {
  for (int order : {1, 2, 4, 8}) {
    DemodConfig cfg;
    cfg.order = order;
    CHECK(analog_response(cfg, cfg.b_3db) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
  }
  DemodConfig cfg;
  CHECK(stage_cutoff(cfg) == doctest::Approx(16.1).epsilon(0.002));
  CHECK(settling_time(cfg) == doctest::Approx(7 * 4 / (2 * kPi * stage_cutoff(cfg))));
  CHECK(std::abs(discrete_response(cfg, 2000.0, 7.0)) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("passband lock-in reads the RMS carrier") {
  RawTrace raw;
  raw.fs = 100e3;
  const double f = 12.5e3;
  raw.samples.resize(100000);
  for (Eigen::Index k = 0; k < raw.samples.size(); ++k)
    raw.samples(k) = 2.0 * std::cos(2 * kPi * f * static_cast<double>(k) / raw.fs + 0.3);
  DemodConfig cfg;
  cfg.f_ref = f;
  const DemodTrace d = demodulate(raw, cfg);
  CHECK(d.fs_out == doctest::Approx(1000.0));
  const Complex last = d.samples(d.samples.size() - 1);
  CHECK(std::abs(last) == doctest::Approx(kSqrt2).epsilon(1e-4));
  CHECK(std::arg(last) == doctest::Approx(0.3).epsilon(1e-3));
  CHECK(d.time(1) == doctest::Approx(1e-3));
}

TEST_CASE("streaming in chunks equals one-shot processing") {
  BasebandTrace env;
  env.fs = 2000.0;
  env.samples = Eigen::VectorXcd::Zero(4000);
  for (Eigen::Index k = 0; k < env.samples.size(); ++k) env.samples(k) = Complex(std::sin(0.01 * k), 0.5);
  DemodConfig cfg;
  const DemodTrace one = demodulate(env, cfg);
  LockIn lock(cfg, env.fs, LockIn::Input::Envelope);
  lock.process(std::span<const Complex>(env.samples.data(), 1234));
  lock.process(std::span<const Complex>(env.samples.data() + 1234, env.samples.size() - 1234));
  const DemodTrace chunked = lock.take();
  REQUIRE(chunked.samples.size() == one.samples.size());
  CHECK((chunked.samples - one.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("signed output flips across the carrier zero") {
  DemodTrace d;
  d.samples.resize(4);
  d.samples << Complex(1, 0), Complex(0.5, 0.1), Complex(-0.5, 0.1), Complex(-1, 0);
  const Eigen::VectorXd s = unwrap_phase(d);
  CHECK(s(0) > 0);
  CHECK(s(1) > 0);
  CHECK(s(2) < 0);
  CHECK(s(3) == doctest::Approx(-1.0));
}

TEST_CASE("invalid filter settings are rejected") {
  DemodConfig cfg;
  cfg.order = 0;
  CHECK_THROWS_AS(cfg.validate(2000.0), ConfigError);
  cfg = DemodConfig{};
  cfg.decimate_to = 3000.0;
  CHECK_THROWS_AS(cfg.validate(2000.0), ConfigError);
}

}
