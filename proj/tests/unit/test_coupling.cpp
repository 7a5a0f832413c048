#include <doctest.h>

#include <cmath>

#include "tem/calibrate.hpp"
#include "tem/coupling.hpp"
#include "tem/measure.hpp"

using namespace tem;

namespace {

TruncationParams dw_trunc() {
  TruncationParams t;
  t.M = 4.5;
  t.growth = {1.5, 2.0};
  return t;
}

const DriftModel& dw() {
  static const DriftModel m = builtin_model("double_well").model;
  return m;
}

}  // namespace

TEST_CASE("coupling: drifted point") {
  const auto t = dw_trunc();
  CHECK(drifted_point(Vec{1.0}, dw(), 0.3, t)[0] == 1.0);
  CHECK(drifted_point(Vec{0.5}, dw(), 0.1, t)[0] == doctest::Approx(0.5375).epsilon(1e-15));
  const auto zero = polynomial_model("zero", 1.0, {{0.0}, {0.0}});
  CHECK(drifted_point(Vec{100.0, 0.0}, zero, 0.01, t) == truncate(Vec{100.0, 0.0}, 0.01, t));
}

TEST_CASE("coupling: reflection") {
  CHECK(reflect(Vec{1.0, 0.0}, Vec{0.3, -2.0}) == Vec{-0.3, -2.0});
  RandomStream r(5, 0);
  for (int i = 0; i < 50; ++i) {
    const Vec e{r.normal(), r.normal(), r.normal()};
    const Vec z{r.normal(), r.normal(), r.normal()};
    const Vec w = reflect(e, z);
    const Vec back = reflect(e, w);
    for (int k = 0; k < 3; ++k) CHECK(back[k] == doctest::Approx(z[k]).epsilon(1e-13));
    CHECK(norm(w) == doctest::Approx(norm(z)).epsilon(1e-13));
  }
}

TEST_CASE("coupling: acceptance values") {
  const double h = 0.01, sigma = 1.0, m = 8.0;
  const Vec rv{0.2, 0.0};
  // projection -r/2: exponent vanishes, both slabs pass
  CHECK(acceptance(rv, Vec{-0.1, 0.7}, h, sigma, m) == 1.0);
  // orthogonal noise
  CHECK(acceptance(rv, Vec{0.0, 0.3}, h, sigma, m) == doctest::Approx(std::exp(-0.04 / (2 * h))).epsilon(1e-14));
  // outside the slab
  CHECK(acceptance(rv, Vec{8.5, 0.0}, h, sigma, m) == 0.0);
  CHECK(acceptance(Vec{0.0, 0.0}, Vec{0.1, 0.0}, h, sigma, m) == 1.0);
}

TEST_CASE("coupling: gate logic") {
  const auto t = dw_trunc();
  const OneStepCoupling c(dw(), t, 0.01, 6.0, 8.0);
  const CoupleOutcome same = c.step_with(Vec{0.4}, Vec{0.4}, Vec{0.05}, 0.3);
  CHECK(same.branch == Branch::Stick);
  CHECK(same.R_hat == 0.0);
  CHECK(same.x_next == same.y_next);
  // r_hat is about 3 here
  const OneStepCoupling narrow(dw(), t, 0.01, 1.0, 8.0);
  for (double z : {-0.3, 0.0, 0.2})
    for (double zeta : {0.01, 0.99}) CHECK(narrow.step_with(Vec{1.5}, Vec{-1.5}, Vec{z}, zeta).branch == Branch::Sync);
}

TEST_CASE("coupling: branch frequencies match quadrature") {
  // small m so that both gates have visible probability
  const double h = 0.01, m = 0.05, s = std::sqrt(h);
  const auto t = dw_trunc();
  const OneStepCoupling c(dw(), t, h, 6.0, m);
  const Vec x{0.03}, y{-0.03};
  const double rh = std::abs(drifted_point(x, dw(), h, t)[0] - drifted_point(y, dw(), h, t)[0]);
  // P(Stick) = E[v(p)], p ~ N(0, h), by midpoint rule on [-m, m]
  double stick = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double p = -m + (i + 0.5) * 2.0 * m / N;
    if (std::abs(rh + p) > m) continue;
    const double v = std::exp(std::min(0.0, -(rh / (2.0 * h)) * (2.0 * p + rh)));
    stick += v * std::exp(-0.5 * p * p / h) / (s * std::sqrt(2.0 * std::numbers::pi)) * (2.0 * m / N);
  }
  const double sync = std::erfc(m / (s * std::sqrt(2.0)));
  const std::size_t n = 100000;
  std::size_t n_stick = 0, n_sync = 0;
  RandomStream rng(17, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Branch b = c.step(x, y, rng).branch;
    n_stick += b == Branch::Stick;
    n_sync += b == Branch::Sync;
  }
  const double ps = static_cast<double>(n_stick) / n, py = static_cast<double>(n_sync) / n;
  CHECK(std::abs(ps - stick) < 4.0 * std::sqrt(stick * (1 - stick) / n));
  CHECK(std::abs(py - sync) < 4.0 * std::sqrt(sync * (1 - sync) / n));
}

TEST_CASE("coupling: marginal and mean-distance verifiers") {
  const auto t = dw_trunc();
  const OneStepCoupling c(dw(), t, 0x1p-8, 6.0, 8.0);
  CHECK(verify_marginal(c, Vec{1.0}, Vec{-1.0}, 100000, 1).pass);
  CHECK(verify_marginal(c, Vec{0.2}, Vec{0.2}, 20000, 7).pass);
  CHECK(verify_mean_distance(c, Vec{0.5}, Vec{-0.5}, 1000000, 3).pass);
  const auto s2 = builtin_model("sin2").model;
  const OneStepCoupling c2(s2, t, 0x1p-8, 8.0, 8.0);
  CHECK(verify_mean_distance(c2, Vec{0.3, -0.2}, Vec{-0.1, 0.4}, 200000, 4).pass);
  CHECK(verify_marginal(c2, Vec{0.3, -0.2}, Vec{-0.1, 0.4}, 50000, 5).pass);
}

TEST_CASE("coupling: marginal p-values are calibrated") {
  // x = y is exactly Gaussian, so about 5% of seeds reject at alpha = 0.05
  const auto t = dw_trunc();
  const OneStepCoupling c(dw(), t, 0x1p-8, 6.0, 8.0);
  int rejected = 0;
  for (std::uint64_t s = 0; s < 200; ++s) rejected += !verify_marginal(c, Vec{0.2}, Vec{0.2}, 5000, 1000 + s, 0.05).pass;
  CHECK(rejected >= 2);
  CHECK(rejected <= 22);
}

TEST_CASE("coupling: corrupted acceptance breaks the marginal") {
  const auto t = dw_trunc();
  const AcceptanceFn always = [](std::span<const double>, std::span<const double>, double, double, double) {
    return 1.0;
  };
  const OneStepCoupling bad(dw(), t, 0x1p-8, 6.0, 8.0, always);
  CHECK_FALSE(verify_marginal(bad, Vec{0.05}, Vec{-0.05}, 50000, 1).pass);
}

TEST_CASE("coupling: contraction and lower-bound regimes") {
  const auto t = dw_trunc();
  const OneStepCoupling c(dw(), t, 0x1p-8, 6.0, 8.0);
  const DistanceFunction df = DistanceFunction::build({0.25, 0.5, 3.0});
  std::vector<ContractionRow> rows;
  const TestReport rep = verify_contraction(c, LogReal::from_value(1e-3), df, {{Vec{0.2}, Vec{0.2}}}, 1000, 1, &rows);
  CHECK(rep.pass);
  CHECK(rows.at(0).mean_f == 0.0);
  const LowerBoundRow lb =
      verify_second_moment_lower_bound(c, gaussian_constants(1.0), LowerBoundLemma::Window, Vec{0.1}, Vec{0.1}, 1000, 1);
  CHECK_FALSE(lb.in_regime);
}
