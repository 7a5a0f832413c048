#include <doctest.h>

#include <cmath>

#include "tem/calibrate.hpp"
#include "tem/errors.hpp"
#include "tem/scheme.hpp"

using namespace tem;

namespace {

TruncationParams dw_trunc() {
  TruncationParams t;
  t.M = 4.5;
  t.growth = {1.5, 2.0};
  return t;
}

}  // namespace

TEST_CASE("scheme: single steps") {
  const auto dw = builtin_model("double_well").model;
  const auto t = dw_trunc();
  const auto zero = polynomial_model("zero", 1.0, {{0.0}, {0.0}});
  TemState s = initial_state(Vec{0.3, -0.4}, 0.01, t);
  const TemState n = tem_step(s, zero, 0.01, t, Vec{0.0, 0.0});
  CHECK(n.k == 1);
  CHECK(n.x == s.x);

  CHECK(tem_step(initial_state(Vec{1.0}, 0.01, t), dw, 0.01, t, Vec{0.0}).x_hat[0] == 1.0);
  const TemState a = tem_step(initial_state(Vec{0.5}, 0.1, t), dw, 0.1, t, Vec{0.2});
  CHECK(truncation_radius(0.1, t) > 0.7375);
  CHECK(a.x_hat[0] == doctest::Approx(0.7375).epsilon(1e-15));
  CHECK(a.x[0] == a.x_hat[0]);
}

TEST_CASE("scheme: overflow guard") {
  const DriftModel wild("wild", 1, 1.0, [](std::span<const double>, std::span<double> out) { out[0] = 1e12; });
  const TemStepper st(wild, 0.01, dw_trunc());
  Vec x{0.0}, scratch(1);
  CHECK_THROWS_AS(st.step(x, Vec{0.0}, scratch, 4), NumericalError);
}

TEST_CASE("scheme: ensembles") {
  const auto dw = builtin_model("double_well").model;
  const auto t = dw_trunc();
  EnsembleSpec spec;
  spec.n_paths = 5;
  spec.n_steps = 0;
  spec.initial = {Vec{1e4}};
  const PathEnsemble still = simulate_ensemble(dw, t, 0.01, spec);
  for (std::size_t p = 0; p < 5; ++p) CHECK(still.state(0, p)[0] == truncate(Vec{1e4}, 0.01, t)[0]);
  const auto m = moment_estimate(still, 2.0);
  CHECK(m.back().mean == doctest::Approx(std::pow(truncation_radius(0.01, t), 2)).epsilon(1e-14));

  spec.n_paths = 200;
  spec.n_steps = 300;
  spec.initial = {Vec{0.7}};
  spec.seed = 9;
  spec.checkpoints = checkpoint_grid(300, 100);
  CHECK(spec.checkpoints == std::vector<std::int64_t>{0, 100, 200, 300});
  const PathEnsemble a = simulate_ensemble(dw, t, 0x1p-8, spec);
  const PathEnsemble b = simulate_ensemble(dw, t, 0x1p-8, spec);
  CHECK(a.states == b.states);
  spec.seed = 10;
  CHECK(simulate_ensemble(dw, t, 0x1p-8, spec).states != a.states);
}

TEST_CASE("scheme: second moment near the stationary value") {
  // int u^2 exp(u^2 - u^4/2) / int exp(u^2 - u^4/2), trapezoid on a fine grid
  double num = 0.0, den = 0.0;
  for (int i = -60000; i <= 60000; ++i) {
    const double u = i * 1e-4;
    const double w = std::exp(u * u - 0.5 * u * u * u * u);
    num += u * u * w;
    den += w;
  }
  const double m2 = num / den;
  const auto dw = builtin_model("double_well").model;
  EnsembleSpec spec;
  spec.n_paths = 4000;
  spec.n_steps = 20 * 256;
  spec.initial = {Vec{0.0}};
  spec.seed = 3;
  spec.checkpoints = checkpoint_grid(spec.n_steps, 256 * 5);
  const auto pts = moment_estimate(simulate_ensemble(dw, dw_trunc(), 0x1p-8, spec), 2.0);
  for (std::size_t i = 2; i < pts.size(); ++i) CHECK(std::abs(pts[i].mean - m2) < 4.0 * pts[i].se + 0.01);
}

TEST_CASE("scheme: mean and standard error") {
  const MeanSe m = mean_se(std::vector<double>{1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  NeumaierSum s;
  s.add(1.0);
  s.add(1e100);
  s.add(1.0);
  s.add(-1e100);
  CHECK(s.value() == 2.0);
}
