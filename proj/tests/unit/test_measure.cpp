#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tem/calibrate.hpp"
#include "tem/measure.hpp"
#include "tem/rng.hpp"

using namespace tem;

namespace {

double brute_force_w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += distance(a.point(i), b.point(perm[i]));
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("measure: 1-D W1") {
  const auto m = [](std::vector<double> v) { return EmpiricalMeasure::from_1d(std::move(v)); };
  CHECK(w1_1d(m({0.3, 1.0, -2.0}), m({1.0, -2.0, 0.3})) == 0.0);
  CHECK(w1_1d(m({0.0}), m({1.0})) == 1.0);
  CHECK(w1_1d(m({0.0, 2.0}), m({1.0, 3.0})) == 1.0);
  CHECK(brute_force_w1(m({0.0, 2.0}), m({1.0, 3.0})) == 1.0);
  // unequal sizes: int |F_a - F_b| by hand
  CHECK(w1_1d(m({0.0}), m({0.0, 1.0})) == doctest::Approx(0.5));
  // 1/6 + 1/12 + 1/12 + 1/6 over the four half-unit cells
  CHECK(w1_1d(m({0.0, 1.0, 2.0}), m({0.5, 1.5})) == doctest::Approx(0.5));
}

TEST_CASE("measure: assignment W1") {
  const EmpiricalMeasure a(2, {0.0, 0.0});
  const EmpiricalMeasure b(2, {3.0, 4.0});
  CHECK(w1_assignment(a, b) == 5.0);
  const EmpiricalMeasure c(2, {0.0, 0.0, 1.0, 0.0, 0.0, 2.0, -1.0, 1.0});
  const EmpiricalMeasure d(2, {1.0, 1.0, 0.5, -1.0, 2.0, 2.0, -1.0, -1.0});
  CHECK(w1_assignment(c, c) == 0.0);
  CHECK(w1_assignment(c, d) == doctest::Approx(brute_force_w1(c, d)).epsilon(1e-14));
  RandomStream r(3, 0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> u(14), v(14);
    for (auto& x : u) x = r.normal();
    for (auto& x : v) x = r.normal() + 0.5;
    const EmpiricalMeasure p(2, u), q(2, v);
    CHECK(w1_assignment(p, q) == doctest::Approx(brute_force_w1(p, q)).epsilon(1e-13));
  }
  std::vector<double> xs{0.1, -0.5, 2.0, 0.7}, ys{1.0, 0.0, -0.3, 0.4};
  CHECK(w1_assignment(EmpiricalMeasure::from_1d(xs), EmpiricalMeasure::from_1d(ys)) ==
        doctest::Approx(w1_1d(EmpiricalMeasure::from_1d(xs), EmpiricalMeasure::from_1d(ys))).epsilon(1e-14));
}

TEST_CASE("measure: Gaussian CDF and Kolmogorov tail") {
  for (double u : {-3.0, -1.0, 0.0, 0.5, 2.0}) CHECK(normal_cdf(u) == doctest::Approx(0.5 * std::erfc(-u / std::sqrt(2.0))).epsilon(1e-15));
  CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_q(1.6276) == doctest::Approx(0.01).epsilon(2e-3));
}

TEST_CASE("measure: KS statistic") {
  const std::size_t n = 999;
  std::vector<double> q(n);
  // normal quantiles by bisection on erfc, independent of the library
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (i + 1.0) / (n + 1.0);
    double lo = -10, hi = 10;
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    q[i] = 0.5 * (lo + hi);
  }
  CHECK(ks_statistic(q, normal_cdf) <= 1.0 / (n + 1.0) + 1e-12);
  CHECK(ks_statistic(std::vector<double>{50.0, 50.0}, normal_cdf) == doctest::Approx(1.0));
  RandomStream r(8, 0);
  std::vector<double> z(100000);
  for (auto& v : z) v = r.normal();
  CHECK(ks_statistic(z, normal_cdf) < 1.63 / std::sqrt(1e5));
}

TEST_CASE("measure: stationary densities") {
  const auto ou = stationary_density_1d([](double u) { return -u; }, 1.0);
  for (double u : {-2.0, -0.5, 0.0, 0.3, 1.1}) CHECK(ou.cdf(u) == doctest::Approx(0.5 * std::erfc(-u)).epsilon(1e-9));
  CHECK(ou.moment(2) == doctest::Approx(0.5).epsilon(1e-9));

  const auto check = [](const ScalarDrift& b, double (*logp)(double)) {
    const auto d = stationary_density_1d(b, 1.0);
    double z = 0.0, m2 = 0.0, below = 0.0;
    for (int i = -80000; i <= 80000; ++i) {
      const double u = i * 1e-4;
      const double w = std::exp(logp(u));
      z += w;
      m2 += u * u * w;
      if (u <= 0.4) below += w;
    }
    CHECK(d.moment(2) == doctest::Approx(m2 / z).epsilon(1e-6));
    CHECK(d.cdf(0.4) == doctest::Approx(below / z).epsilon(1e-4));
  };
  check([](double u) { return std::sin(2 * u) - u; }, [](double u) { return -u * u - std::cos(2 * u); });
  check([](double u) { return u - u * u * u; }, [](double u) { return u * u - 0.5 * u * u * u * u; });
}

TEST_CASE("measure: W1 to a tabulated density") {
  const auto ou = stationary_density_1d([](double u) { return -u; }, 1.0);
  CHECK(w1_to_density(std::vector<double>{0.0}, ou) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-6));
}

TEST_CASE("measure: least squares") {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const LineFit f = least_squares(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
}

TEST_CASE("measure: OU invariant error and determinism") {
  const auto ou = polynomial_model("ou", 1.0, {{0.0, -1.0}});
  TruncationParams t;
  t.M = 3.0;
  t.growth = {1.0, 1.0};
  const auto e = invariant_measure_error(ou, t, {0x1p-10}, 20.0, Vec{0.0}, 8000, 5, 0);
  CHECK(e.points.at(0).error < 0.03);
  const auto a = invariant_measure_error(ou, t, {0x1p-3}, 2.0, Vec{1.0}, 500, 6, 20);
  const auto b = invariant_measure_error(ou, t, {0x1p-3}, 2.0, Vec{1.0}, 500, 6, 20);
  CHECK(a.points[0].error == b.points[0].error);
  CHECK(a.points[0].se == b.points[0].se);
}

TEST_CASE("measure: strong error vanishes at the reference step") {
  const auto dw = builtin_model("double_well").model;
  TruncationParams t;
  t.M = 4.5;
  t.growth = {1.5, 2.0};
  const auto c = strong_error_curve(dw, t, {0x1p-6, 0x1p-8}, 0x1p-8, 1.0, Vec{1.0}, 200, 2);
  CHECK(c.points.back().error == 0.0);
  CHECK(c.points.front().error > 0.0);
}
