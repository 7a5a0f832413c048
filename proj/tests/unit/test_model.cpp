#include <doctest.h>

#include <cmath>
#include <limits>

#include "tem/errors.hpp"
#include "tem/model.hpp"

using namespace tem;

TEST_CASE("model: drift values") {
  const auto dw = builtin_model("double_well");
  const auto s2 = builtin_model("sin2");
  CHECK(eval_drift(dw.model, Vec{0.0})[0] == 0.0);
  CHECK(eval_drift(dw.model, Vec{2.0})[0] == -6.0);
  CHECK(eval_drift(s2.model, Vec{0.0, 0.0}) == Vec{0.0, 0.0});
  const Vec b = eval_drift(s2.model, Vec{0.3, -0.7});
  CHECK(b[0] == doctest::Approx(std::sin(0.6) - 0.3).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(dw.model.drift_at_origin_norm() == 0.0);
  CHECK_THROWS_AS(eval_drift(dw.model, Vec{std::numeric_limits<double>::quiet_NaN()}), InputError);
  CHECK_THROWS_AS(builtin_model("nope"), InputError);
}

TEST_CASE("model: polynomial model matches the double well") {
  const auto p = polynomial_model("p", 1.0, {{0.0, 1.0, 0.0, -1.0}});
  const auto dw = builtin_model("double_well");
  for (double x : {-2.5, -1.0, 0.0, 0.3, 1.7})
    CHECK(eval_drift(p, Vec{x})[0] == doctest::Approx(eval_drift(dw.model, Vec{x})[0]).epsilon(1e-14));
  const auto q = polynomial_model("q", 1.0, {{1.0, 0.0}, {-2.0}});
  CHECK(q.drift_at_origin_norm() == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("model: growth check on the built-in models") {
  CHECK(check_polynomial_lipschitz(builtin_model("double_well").model, {1.5, 2.0}, 100000, 10.0, 1).pass);
  CHECK(check_polynomial_lipschitz(builtin_model("sin2").model, {3.0, 1.0}, 100000, 10.0, 2).pass);
  // too small L* fails
  CHECK_FALSE(check_polynomial_lipschitz(builtin_model("double_well").model, {0.5, 2.0}, 10000, 10.0, 3).pass);
}

TEST_CASE("model: contractivity check") {
  CHECK(check_contractivity_at_infinity(builtin_model("sin2").model, {1.0, 0.5, 4.0}, 100000, 10.0, 4).pass);
  const auto dw = builtin_model("double_well");
  const CheckReport rep = check_contractivity_at_infinity(dw.model, {1.0, 2.0, 0.0}, 20000, 10.0, 5);
  REQUIRE_FALSE(rep.pass);
  REQUIRE(rep.witness);
  // the witness really violates <x-y, b(x)-b(y)> <= -K|x-y|^2
  const auto& [x, y] = *rep.witness;
  const double dx = x[0] - y[0];
  const double lhs = dx * (eval_drift(dw.model, x)[0] - eval_drift(dw.model, y)[0]);
  CHECK(lhs > -2.0 * dx * dx);
  // hand pair x=0.5, y=0: 0.5 * 0.375 > 0 > -K * 0.25
  CHECK(0.5 * eval_drift(dw.model, Vec{0.5})[0] > 0.0);
}

TEST_CASE("model: constants validation") {
  CHECK_THROWS_AS((DissipativityConstants{0.0, 1.0, 1.0}.validate()), InputError);
  CHECK_THROWS_AS((DissipativityConstants{1.0, 1.0, -1.0}.validate()), InputError);
  CHECK_THROWS_AS((GrowthConstants{1.0, -1.0}.validate()), InputError);
  CHECK_NOTHROW((DissipativityConstants{1.0, 2.0, 0.0}.validate()));
}
