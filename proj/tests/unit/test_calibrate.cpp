#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tem/calibrate.hpp"
#include "tem/calibration_io.hpp"
#include "tem/suite.hpp"

using namespace tem;

namespace {

const CalibratedModel& dw() {
  static const CalibratedModel cm = [] {
    const auto s = builtin_model("double_well");
    return calibrate_with_distance(s.model, s.diss, s.growth);
  }();
  return cm;
}

}  // namespace

TEST_CASE("calibrate: growth bound and inverse") {
  const GrowthConstants g{1.5, 2.0};
  CHECK(growth_bound(0.0, g) == 1.5);
  CHECK(growth_bound(1.0, g) == 4.5);
  for (double u : {0.5, 1.0, 2.0}) CHECK(growth_bound_inverse(growth_bound(u, g), g) == doctest::Approx(u).epsilon(1e-14));
}

TEST_CASE("calibrate: truncation radius and projection") {
  TruncationParams t;
  t.M = 3.0;
  t.growth = {1.5, 2.0};
  const double want = std::sqrt((3.0 * std::sqrt(10.0) - 1.5) / 3.0);
  CHECK(truncation_radius(0.01, t) == doctest::Approx(want).epsilon(1e-14));
  double prev = truncation_radius(1.0, t);
  for (double h = 0.5; h > 1e-8; h /= 3.0) {
    const double r = truncation_radius(h, t);
    CHECK(r >= prev);
    prev = r;
  }
  Vec x{3.0, 4.0};
  CHECK(project_to_ball(x, 1.0));
  CHECK(x[0] == doctest::Approx(0.6));
  CHECK(x[1] == doctest::Approx(0.8));
  Vec y{0.1, -0.2};
  CHECK_FALSE(project_to_ball(y, 1.0));
  CHECK(y == Vec{0.1, -0.2});
  const Vec once = truncate(Vec{50.0, -20.0}, 0.01, t);
  CHECK(truncate(once, 0.01, t) == once);
  CHECK(std::hypot(once[0], once[1]) <= truncation_radius(0.01, t) + 1e-12);
}

TEST_CASE("calibrate: hbar example") {
  TruncationParams t;
  t.M = 2.0;
  t.growth = {1.0, 2.0};
  CHECK(hbar_ceiling({1.0, 2.0, 3.0}, t).value() == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("calibrate: M") {
  CHECK(choose_M(0.0, {1.0, 2.0, 3.0}, {1.5, 2.0}, 1.0) == 4.5);
  CHECK(choose_M(7.0, {1.0, 2.0, 3.0}, {1.5, 2.0}, 1.0) == 7.0);
  CHECK(choose_M(0.0, {1.0, 100.0, 3.0}, {0.1, 2.0}, 1.0) == 10.0);
  CHECK(choose_M(0.0, {1.0, 2.0, 1e-6}, {0.1, 2.0}, 1.0) == doctest::Approx(1.0 / 512e-6));
  // R = 0 drops the 1/(512 R sigma) term
  CHECK(choose_M(0.0, {1.0, 2.0, 0.0}, {0.1, 2.0}, 1.0) == std::sqrt(2.0));
}

TEST_CASE("calibrate: Gaussian constants against independent quadrature") {
  // mpmath at 40 digits
  const GaussianConstants gc = gaussian_constants(1.0);
  CHECK(gc.c2 == doctest::Approx(0.014507357935872473).epsilon(1e-12));
  CHECK(gc.c3 == doctest::Approx(0.00034856883314342408).epsilon(1e-12));
  CHECK(std::isfinite(gc.c1.log()));
  CHECK(gc.c1.log() < 0.0);
}

TEST_CASE("calibrate: double well constants") {
  const Calibration& c = dw().calib;
  REQUIRE(c.coupling);
  const CouplingConstants& cc = *c.coupling;
  CHECK(c.trunc.M == 4.5);
  CHECK(cc.H == 6.0);
  CHECK(cc.r1 == 2.0 * 3.0 + 2.0 * cc.m);
  CHECK(cc.m_source == "minimum");
  CHECK(cc.m == 8.0);
  // (K M^-2)^(1/(1-2 theta_bar)) with theta_bar = 1/4, then ^(2/K) = ^1
  CHECK(c.hbar.value() == doctest::Approx(std::pow(2.0 / (4.5 * 4.5), 2.0)).epsilon(1e-13));
  for (LogReal h : {c.hbar, cc.h1, cc.h2, cc.h3}) {
    CHECK(std::isfinite(h.log()));
    CHECK(h.log() <= 0.0);
  }
  // 4R^2 = 36 never binds
  CHECK(cc.h3.value() < 36.0);
  CHECK(cc.Phi1 == doctest::Approx(1.161761157250492565e-4).epsilon(1e-10));
  CHECK(cc.cstar.log() == doctest::Approx(-2272136.157513092463).epsilon(1e-12));
}

TEST_CASE("calibrate: R = 0 leaves coupling undefined") {
  const auto p = polynomial_model("ou", 1.0, {{0.0, -1.0}});
  const Calibration c = calibrate_full(p, {0.5, 1.0, 0.0}, {1.0, 1.0});
  CHECK_FALSE(c.coupling);
  CHECK_THROWS_AS(c.require_coupling(), CalibrationError);
  CHECK(c.trunc.M == 3.0);
}

TEST_CASE("calibrate: invalid theta_bar") {
  const auto s = builtin_model("double_well");
  CalibrationOptions o;
  o.theta_bar = 0.5;
  CHECK_THROWS(calibrate_full(s.model, s.diss, s.growth, o));
}

TEST_CASE("calibration io: text round trip") {
  const Calibration& c = dw().calib;
  const std::string text = calibration_text(c);
  std::istringstream in(text);
  const Calibration back = read_calibration(in);
  CHECK(calibration_text(back) == text);
  CHECK(back.coupling->cstar.log() == c.coupling->cstar.log());
  CHECK(back.coupling->m_trace == c.coupling->m_trace);
  CHECK(back.hbar.log() == c.hbar.log());
  std::istringstream bad("model=double_well\nsigma=abc\n");
  CHECK_THROWS(read_calibration(bad));
}
