#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tem {

using Vec = std::vector<double>;

/// Drift evaluator: writes b(x) into out (out.size() == x.size()).
using DriftFn = std::function<void(std::span<const double> x, std::span<double> out)>;
using ScalarDrift = std::function<double(double)>;

/// (L, K, R) of the contractivity-at-infinity condition.
struct DissipativityConstants {
  double L = 0.0;
  double K = 0.0;
  double R = 0.0;
  void validate() const;
};

/// (L*, ell) of the polynomial-growth Lipschitz condition.
struct GrowthConstants {
  double Lstar = 0.0;
  double ell = 0.0;
  void validate() const;
};

/// dx = b(x) dt + sigma dB in R^d. Immutable; copies share the evaluator.
class DriftModel {
 public:
  DriftModel(std::string name, std::size_t dim, double sigma, DriftFn drift);

  /// b_i(x) = g_i(x_i). Coordinate drifts stay available for 1-D analytics.
  static DriftModel coordinatewise(std::string name, double sigma, std::vector<ScalarDrift> coords);

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  double sigma() const { return sigma_; }
  double drift_at_origin_norm() const { return b0_norm_; }

  /// Unchecked hot-path evaluation.
  void eval(std::span<const double> x, std::span<double> out) const { drift_(x, out); }

  bool is_coordinatewise() const { return !coords_.empty(); }
  const ScalarDrift& coordinate(std::size_t i) const;

 private:
  std::string name_;
  std::size_t dim_;
  double sigma_;
  DriftFn drift_;
  std::vector<ScalarDrift> coords_;
  double b0_norm_ = 0.0;
};

/// b(x), rejecting non-finite input.
Vec eval_drift(const DriftModel& model, std::span<const double> x);

/// b_i(u) = sum_k coeffs[i][k] u^k.
DriftModel polynomial_model(std::string name, double sigma, std::vector<std::vector<double>> coeffs);

/// A model together with the constants it is claimed to satisfy.
struct ModelSpec {
  DriftModel model;
  DissipativityConstants diss;
  GrowthConstants growth;
};

/// "double_well" (1-D, b = x - x^3) or "sin2" (2-D, b = (sin 2x - x, -y)).
ModelSpec builtin_model(const std::string& name, double sigma = 1.0);
std::vector<std::string> builtin_model_names();

struct CheckReport {
  bool pass = true;
  std::size_t n_pairs = 0;
  std::size_t n_violations = 0;
  /// Largest (lhs - rhs) / scale over all pairs; <= 1e-9 passes.
  double max_violation = 0.0;
  /// Worst pair, present when the check fails.
  std::optional<std::pair<Vec, Vec>> witness;
};

inline constexpr double kCheckTolerance = 1e-9;

/// <x-y, b(x)-b(y)> <= L|x-y|^2 for |x-y| <= R and <= -K|x-y|^2 beyond,
/// on pairs drawn uniformly from the ball of the given radius. Violations are
/// measured relative to |x-y|^2.
CheckReport check_contractivity_at_infinity(const DriftModel& model, const DissipativityConstants& consts,
                                            std::size_t n_pairs, double radius, std::uint64_t seed);

/// |b(x)-b(y)| <= L*(1+|x|^ell+|y|^ell)|x-y|, relative to the right side.
CheckReport check_polynomial_lipschitz(const DriftModel& model, const GrowthConstants& growth,
                                       std::size_t n_pairs, double radius, std::uint64_t seed);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double distance(std::span<const double> a, std::span<const double> b);

}  // namespace tem
