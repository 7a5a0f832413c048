#include "tem/scheme.hpp"

#include <cmath>

#include "tem/errors.hpp"
#include "tem/parallel.hpp"

namespace tem {

TemState initial_state(std::span<const double> x0, double h, const TruncationParams& trunc) {
  for (double v : x0)
    if (!std::isfinite(v)) throw InputError("initial state must be finite");
  TemState s;
  s.x = truncate(x0, h, trunc);
  return s;
}

TemStepper::TemStepper(const DriftModel& model, double h, const TruncationParams& trunc)
    : model_(&model), h_(h), sqrt_h_(std::sqrt(h)), radius_(truncation_radius(h, trunc)) {}

bool TemStepper::step(std::span<double> x, std::span<const double> z, std::span<double> scratch,
                      std::int64_t k) const {
  model_->eval(x, scratch);
  const double sigma = model_->sigma();
  double n2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] += h_ * scratch[i] + sigma * z[i];
    n2 += x[i] * x[i];
  }
  if (!std::isfinite(n2)) throw NumericalError("non-finite TEM state", k + 1);
  const double n = std::sqrt(n2);
  if (n > kOverflowGuard) throw NumericalError("TEM state exceeded the overflow guard", k + 1);
  if (n <= radius_) return false;
  const double scale = radius_ / n;
  for (double& v : x) v *= scale;
  return true;
}

bool TemStepper::step(std::span<double> x, RandomStream& rng, std::span<double> scratch, std::int64_t k) const {
  // stack buffer for the usual small d
  double zbuf[8];
  std::vector<double> zheap;
  double* z = zbuf;
  if (x.size() > 8) {
    zheap.resize(x.size());
    z = zheap.data();
  }
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = sqrt_h_ * rng.normal();
  return step(x, std::span<const double>(z, x.size()), scratch, k);
}

TemState tem_step(const TemState& state, const DriftModel& model, double h, const TruncationParams& trunc,
                  std::span<const double> z) {
  if (z.size() != state.x.size() || state.x.size() != model.dim())
    throw InputError("tem_step: dimension mismatch");
  TemState next;
  next.k = state.k + 1;
  next.x_hat = state.x;
  Vec b(model.dim());
  model.eval(state.x, b);
  for (std::size_t i = 0; i < b.size(); ++i) next.x_hat[i] += h * b[i] + model.sigma() * z[i];
  const double n = norm(next.x_hat);
  if (!std::isfinite(n)) throw NumericalError("non-finite TEM state", next.k);
  if (n > kOverflowGuard) throw NumericalError("TEM state exceeded the overflow guard", next.k);
  next.x = next.x_hat;
  project_to_ball(next.x, truncation_radius(h, trunc));
  return next;
}

std::vector<double> PathEnsemble::coordinate(std::size_t c, std::size_t i) const {
  std::vector<double> out(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) out[p] = states[c][p * dim + i];
  return out;
}

std::vector<std::int64_t> checkpoint_grid(std::int64_t n_steps, std::int64_t every) {
  if (every <= 0) throw InputError("checkpoint spacing must be positive");
  std::vector<std::int64_t> out;
  for (std::int64_t k = 0; k < n_steps; k += every) out.push_back(k);
  out.push_back(n_steps);
  return out;
}

PathEnsemble simulate_ensemble(const DriftModel& model, const TruncationParams& trunc, double h,
                               const EnsembleSpec& spec) {
  if (spec.n_paths == 0) throw InputError("n_paths must be positive");
  if (spec.n_steps < 0) throw InputError("n_steps must be nonnegative");
  if (spec.initial.size() != 1 && spec.initial.size() != spec.n_paths)
    throw InputError("initial must hold one point or one point per path");
  const std::size_t d = model.dim();
  for (const auto& x0 : spec.initial)
    if (x0.size() != d) throw InputError("initial point has wrong dimension");
  std::vector<std::int64_t> cps = spec.checkpoints.empty() ? std::vector<std::int64_t>{spec.n_steps} : spec.checkpoints;
  for (std::size_t c = 0; c < cps.size(); ++c) {
    if (cps[c] < 0 || cps[c] > spec.n_steps) throw InputError("checkpoint outside [0, n_steps]");
    if (c > 0 && cps[c] <= cps[c - 1]) throw InputError("checkpoints must be increasing");
  }

  const TemStepper stepper(model, h, trunc);
  PathEnsemble ens;
  ens.n_paths = spec.n_paths;
  ens.dim = d;
  ens.h = h;
  ens.seed = spec.seed;
  ens.checkpoints = cps;
  ens.states.assign(cps.size(), std::vector<double>(spec.n_paths * d));

  std::vector<std::uint64_t> trunc_count(spec.n_paths, 0);
  parallel_for(spec.n_paths, [&](std::size_t p) {
    RandomStream rng(spec.seed, p);
    Vec x = spec.initial.size() == 1 ? spec.initial[0] : spec.initial[p];
    Vec scratch(d);
    std::uint64_t hits = project_to_ball(x, stepper.radius()) ? 1 : 0;
    std::size_t c = 0;
    for (std::int64_t k = 0;; ++k) {
      while (c < cps.size() && cps[c] == k) {
        std::copy(x.begin(), x.end(), ens.states[c].begin() + static_cast<std::ptrdiff_t>(p * d));
        ++c;
      }
      if (k == spec.n_steps) break;
      hits += stepper.step(x, rng, scratch, k) ? 1 : 0;
    }
    trunc_count[p] = hits;
  });
  for (auto t : trunc_count) {
    ens.truncations += t;
    ens.paths_truncated += t > 0 ? 1 : 0;
  }
  return ens;
}

MeanSe mean_se(std::span<const double> xs) {
  if (xs.empty()) throw InputError("mean of an empty sample");
  NeumaierSum s;
  for (double v : xs) s.add(v);
  const double n = static_cast<double>(xs.size());
  const double mean = s.value() / n;
  if (xs.size() == 1) return {mean, 0.0};
  NeumaierSum ss;
  for (double v : xs) ss.add((v - mean) * (v - mean));
  return {mean, std::sqrt(ss.value() / (n - 1.0) / n)};
}

std::vector<MomentPoint> moment_estimate(const PathEnsemble& ens, double q) {
  if (!(q > 0.0)) throw InputError("moment order must be positive");
  std::vector<MomentPoint> out;
  std::vector<double> vals(ens.n_paths);
  for (std::size_t c = 0; c < ens.checkpoints.size(); ++c) {
    for (std::size_t p = 0; p < ens.n_paths; ++p) vals[p] = std::pow(norm(ens.state(c, p)), q);
    const MeanSe ms = mean_se(vals);
    out.push_back({ens.checkpoints[c], ms.mean, ms.se});
  }
  return out;
}

}  // namespace tem
