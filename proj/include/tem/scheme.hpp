#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tem/calibrate.hpp"
#include "tem/model.hpp"
#include "tem/rng.hpp"

namespace tem {

/// |x_hat| beyond this is treated as a blow-up, not truncated away.
inline constexpr double kOverflowGuard = 1e8;

struct TemState {
  std::int64_t k = 0;
  Vec x;      // truncated state X_k
  Vec x_hat;  // pre-truncation state; empty at k = 0
};

/// X_0 = pi_h(x0).
TemState initial_state(std::span<const double> x0, double h, const TruncationParams& trunc);

/// One TEM step: x_hat' = x + h b(x) + sigma z, x' = pi_h(x_hat').
/// z is the N(0, hI) increment.
TemState tem_step(const TemState& state, const DriftModel& model, double h, const TruncationParams& trunc,
                  std::span<const double> z);

/// Hot-loop form of tem_step with the radius computed once.
class TemStepper {
 public:
  TemStepper(const DriftModel& model, double h, const TruncationParams& trunc);

  double h() const { return h_; }
  double radius() const { return radius_; }
  const DriftModel& model() const { return *model_; }

  /// Advances x in place. scratch must have x.size() entries. Returns true
  /// when the post-step state was projected. k is only used in errors.
  bool step(std::span<double> x, std::span<const double> z, std::span<double> scratch, std::int64_t k) const;

  /// Same, drawing z ~ N(0, hI) from rng.
  bool step(std::span<double> x, RandomStream& rng, std::span<double> scratch, std::int64_t k) const;

 private:
  const DriftModel* model_;
  double h_;
  double sqrt_h_;
  double radius_;
};

struct EnsembleSpec {
  std::size_t n_paths = 0;
  std::int64_t n_steps = 0;
  /// Increasing step indices in [0, n_steps]; empty means {n_steps}.
  std::vector<std::int64_t> checkpoints;
  /// One point shared by all paths, or one per path.
  std::vector<Vec> initial;
  std::uint64_t seed = 0;
};

struct PathEnsemble {
  std::size_t n_paths = 0;
  std::size_t dim = 0;
  double h = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> checkpoints;
  /// states[c][p*dim + i]: coordinate i of path p at checkpoints[c].
  std::vector<std::vector<double>> states;
  /// Number of projections applied (initial states included).
  std::uint64_t truncations = 0;
  std::size_t paths_truncated = 0;

  std::span<const double> state(std::size_t c, std::size_t p) const {
    return {states[c].data() + p * dim, dim};
  }
  /// Coordinate i of every path at checkpoint c.
  std::vector<double> coordinate(std::size_t c, std::size_t i) const;
};

/// Independent paths; path p draws from RandomStream(seed, p).
PathEnsemble simulate_ensemble(const DriftModel& model, const TruncationParams& trunc, double h,
                               const EnsembleSpec& spec);

/// Every `every` steps, plus n_steps.
std::vector<std::int64_t> checkpoint_grid(std::int64_t n_steps, std::int64_t every);

struct MomentPoint {
  std::int64_t k = 0;
  double mean = 0.0;
  double se = 0.0;
};

/// E|X_k|^q per checkpoint with Monte Carlo standard errors.
std::vector<MomentPoint> moment_estimate(const PathEnsemble& ens, double q);

/// Compensated sum accumulator.
class NeumaierSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Mean and standard error of a sample, with compensated sums.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> xs);

}  // namespace tem
