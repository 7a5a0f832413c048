#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tem/calibrate.hpp"
#include "tem/distfn.hpp"

using namespace tem;

namespace {

// Phi(u) = int_0^u exp(-a(v^2 + 2v)) dv in closed form
double Phi_exact(double u, double a) {
  return std::exp(a) * std::sqrt(std::numbers::pi / (4.0 * a)) *
         (std::erfc(std::sqrt(a)) - std::erfc(std::sqrt(a) * (u + 1.0)));
}

const DistanceFunction& moderate() {
  static const DistanceFunction df = DistanceFunction::build({0.25, 0.5, 3.0});
  return df;
}

const DistanceFunction& double_well_df() {
  static const DistanceFunction df = DistanceFunction::build({1.0, gaussian_constants(1.0).c3, 22.0});
  return df;
}

}  // namespace

TEST_CASE("distfn: concave weight") {
  const DistanceParams p{1.0, gaussian_constants(1.0).c3, 22.0};
  CHECK(concave_weight(0.0, p) == 1.0);
  CHECK(log_concave_weight(30.0, p) == log_concave_weight(22.0, p));
  CHECK(log_concave_weight(1.0, p) == doctest::Approx(-(3.0 / (2.0 * p.c3)) * 3.0).epsilon(1e-14));
  const DistanceParams q{0.25, 0.5, 3.0};
  CHECK(concave_weight(1.0, q) == doctest::Approx(std::exp(-1.5 * 3.0)).epsilon(1e-14));
}

TEST_CASE("distfn: Phi against the closed form") {
  const auto& df = moderate();
  CHECK(df.rate() == 1.5);
  for (double u : {1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 3.0}) CHECK(df.Phi(u) == doctest::Approx(Phi_exact(u, 1.5)).epsilon(1e-10));
  // linear beyond r1
  CHECK(df.Phi(4.0) - df.Phi(3.0) == doctest::Approx(std::exp(-1.5 * 15.0)).epsilon(1e-10));
}

TEST_CASE("distfn: double well Phi and c* against 40-digit values") {
  const auto& df = double_well_df();
  CHECK(df.Phi(1.0) == doctest::Approx(1.161761157250492565e-4).epsilon(1e-10));
  CHECK(df.Phi(1e-3) == doctest::Approx(1.161549805542046374e-4).epsilon(1e-10));
  CHECK(df.Phi(1e-6) == doctest::Approx(9.957090069818034430e-7).epsilon(1e-10));
  CHECK(df.cstar().log() == doctest::Approx(-2272136.157513092463).epsilon(1e-12));
}

TEST_CASE("distfn: rho and f invariants") {
  for (const DistanceFunction* df : {&moderate(), &double_well_df()}) {
    CHECK(df->rho(df->r1()) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(df->f(0.0) == 0.0);
    CHECK_THROWS(df->f(-1.0));
    const double slope = df->slope_beyond().value();
    CHECK(df->f(df->r1() + 1.0) == doctest::Approx(df->f(df->r1()) + slope).epsilon(1e-12));
    const auto& g = df->grid();
    const auto& fv = df->f_vals();
    for (std::size_t i = 0; i < g.size(); i += 97) CHECK(df->f(g[i]) == fv[i]);
    bool le_u = true, ge_lower = true;
    for (std::size_t i = 0; i < g.size(); ++i) {
      le_u = le_u && fv[i] <= g[i] * (1.0 + 1e-12);
      ge_lower = ge_lower && fv[i] >= slope * g[i] * (1.0 - 1e-9);
    }
    CHECK(le_u);
    CHECK(ge_lower);
  }
}

TEST_CASE("distfn: f is concave and increasing on the moderate case") {
  const auto& df = moderate();
  double prev_slope = 1e300;
  double prev = df.f(0.0);
  bool ok = true;
  for (int i = 1; i <= 4000; ++i) {
    const double u = 4.0 * i / 4000.0;
    const double v = df.f(u);
    const double s = (v - prev) / 1e-3;
    ok = ok && v > prev && s <= prev_slope + 1e-9;
    prev_slope = s;
    prev = v;
  }
  CHECK(ok);
}
