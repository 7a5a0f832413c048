#include "tem/model.hpp"

#include <cmath>
#include <limits>

#include "tem/errors.hpp"
#include "tem/parallel.hpp"
#include "tem/rng.hpp"

namespace tem {

void DissipativityConstants::validate() const {
  if (!(L > 0.0) || !(K > 0.0) || !(R >= 0.0) || !std::isfinite(L) || !std::isfinite(K) || !std::isfinite(R))
    throw InputError("dissipativity constants need L > 0, K > 0, R >= 0");
}

void GrowthConstants::validate() const {
  if (!(Lstar > 0.0) || !(ell > 0.0) || !std::isfinite(Lstar) || !std::isfinite(ell))
    throw InputError("growth constants need L* > 0 and ell > 0");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) {
  if (a.size() == 1) return std::abs(a[0]);
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::abs(a[0] - b[0]);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

DriftModel::DriftModel(std::string name, std::size_t dim, double sigma, DriftFn drift)
    : name_(std::move(name)), dim_(dim), sigma_(sigma), drift_(std::move(drift)) {
  if (dim_ == 0) throw InputError("model dimension must be positive");
  if (sigma_ == 0.0 || !std::isfinite(sigma_)) throw InputError("sigma must be a nonzero finite number");
  if (!drift_) throw InputError("missing drift evaluator");
  Vec zero(dim_, 0.0), b0(dim_, 0.0);
  drift_(zero, b0);
  for (double v : b0)
    if (!std::isfinite(v)) throw InputError("drift is not finite at the origin");
  b0_norm_ = norm(b0);
}

DriftModel DriftModel::coordinatewise(std::string name, double sigma, std::vector<ScalarDrift> coords) {
  if (coords.empty()) throw InputError("coordinatewise model needs at least one coordinate");
  auto shared = coords;
  DriftModel model(std::move(name), coords.size(), sigma,
                   [shared](std::span<const double> x, std::span<double> out) {
                     for (std::size_t i = 0; i < shared.size(); ++i) out[i] = shared[i](x[i]);
                   });
  model.coords_ = std::move(coords);
  return model;
}

const ScalarDrift& DriftModel::coordinate(std::size_t i) const {
  if (coords_.empty()) throw InputError("model '" + name_ + "' is not coordinatewise");
  if (i >= coords_.size()) throw InputError("coordinate index out of range");
  return coords_[i];
}

Vec eval_drift(const DriftModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) throw InputError("point dimension does not match the model");
  for (double v : x)
    if (!std::isfinite(v)) throw InputError("eval_drift: non-finite input");
  Vec out(model.dim());
  model.eval(x, out);
  return out;
}

DriftModel polynomial_model(std::string name, double sigma, std::vector<std::vector<double>> coeffs) {
  std::vector<ScalarDrift> coords;
  for (auto& c : coeffs) {
    if (c.empty()) throw InputError("empty coefficient list");
    for (double v : c)
      if (!std::isfinite(v)) throw InputError("non-finite polynomial coefficient");
    coords.emplace_back([c](double u) {
      double acc = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
      return acc;
    });
  }
  return DriftModel::coordinatewise(std::move(name), sigma, std::move(coords));
}

ModelSpec builtin_model(const std::string& name, double sigma) {
  if (name == "double_well") {
    auto model = DriftModel::coordinatewise("double_well", sigma, {[](double u) { return u - u * u * u; }});
    return {std::move(model), {1.0, 2.0, 3.0}, {1.5, 2.0}};
  }
  if (name == "sin2") {
    auto model = DriftModel::coordinatewise(
        "sin2", sigma, {[](double u) { return std::sin(2.0 * u) - u; }, [](double u) { return -u; }});
    return {std::move(model), {1.0, 0.5, 4.0}, {3.0, 1.0}};
  }
  throw InputError("unknown model '" + name + "' (known: double_well, sin2; --model polynomial takes --poly)");
}

std::vector<std::string> builtin_model_names() { return {"double_well", "sin2"}; }

namespace {

constexpr std::size_t kPairBlock = 4096;

void uniform_in_ball(RandomStream& rng, double radius, std::span<double> out) {
  for (;;) {
    double s = 0.0;
    for (double& v : out) {
      v = radius * (2.0 * rng.uniform() - 1.0);
      s += v * v;
    }
    if (s <= radius * radius) return;
  }
}

struct Worst {
  double violation = -std::numeric_limits<double>::infinity();
  std::size_t index = 0;
  std::size_t count = 0;
  Vec x, y;
};

// violation(x, y, bx, by) -> (lhs - rhs) / scale
template <class Violation>
CheckReport run_pair_check(const DriftModel& model, std::size_t n_pairs, double radius, std::uint64_t seed,
                           Violation violation) {
  if (n_pairs == 0) throw InputError("n_pairs must be at least 1");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("radius must be positive");
  const std::size_t d = model.dim();
  const std::size_t blocks = block_count(n_pairs, kPairBlock);
  std::vector<Worst> worst(blocks);
  parallel_for(blocks, [&](std::size_t blk) {
    Vec x(d), y(d), bx(d), by(d);
    Worst& w = worst[blk];
    const std::size_t end = std::min(n_pairs, (blk + 1) * kPairBlock);
    for (std::size_t i = blk * kPairBlock; i < end; ++i) {
      RandomStream rng(seed, i);
      uniform_in_ball(rng, radius, x);
      uniform_in_ball(rng, radius, y);
      model.eval(x, bx);
      model.eval(y, by);
      const double v = violation(x, y, bx, by);
      if (v > kCheckTolerance) ++w.count;
      if (v > w.violation) {
        w.violation = v;
        w.index = i;
        w.x = x;
        w.y = y;
      }
    }
  });
  CheckReport report;
  report.n_pairs = n_pairs;
  const Worst* best = &worst[0];
  for (const auto& w : worst) {
    report.n_violations += w.count;
    if (w.violation > best->violation) best = &w;
  }
  report.max_violation = best->violation;
  report.pass = report.n_violations == 0;
  if (!report.pass) report.witness = std::make_pair(best->x, best->y);
  return report;
}

}  // namespace

CheckReport check_contractivity_at_infinity(const DriftModel& model, const DissipativityConstants& consts,
                                            std::size_t n_pairs, double radius, std::uint64_t seed) {
  consts.validate();
  return run_pair_check(model, n_pairs, radius, seed,
                        [&](std::span<const double> x, std::span<const double> y, std::span<const double> bx,
                            std::span<const double> by) {
                          double lhs = 0.0, r2 = 0.0;
                          for (std::size_t i = 0; i < x.size(); ++i) {
                            lhs += (x[i] - y[i]) * (bx[i] - by[i]);
                            r2 += (x[i] - y[i]) * (x[i] - y[i]);
                          }
                          if (r2 == 0.0) return 0.0;
                          const double rate = std::sqrt(r2) <= consts.R ? consts.L : -consts.K;
                          return lhs / r2 - rate;
                        });
}

CheckReport check_polynomial_lipschitz(const DriftModel& model, const GrowthConstants& growth,
                                       std::size_t n_pairs, double radius, std::uint64_t seed) {
  growth.validate();
  return run_pair_check(model, n_pairs, radius, seed,
                        [&](std::span<const double> x, std::span<const double> y, std::span<const double> bx,
                            std::span<const double> by) {
                          const double lhs = distance(bx, by);
                          const double rhs = growth.Lstar *
                                             (1.0 + std::pow(norm(x), growth.ell) + std::pow(norm(y), growth.ell)) *
                                             distance(x, y);
                          if (rhs == 0.0) return lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
                          return (lhs - rhs) / rhs;
                        });
}

}  // namespace tem
