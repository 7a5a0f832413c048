#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tem/calibrate.hpp"
#include "tem/distfn.hpp"
#include "tem/model.hpp"
#include "tem/rng.hpp"

namespace tem {

enum class Branch { Stick, Reflect, Sync };
const char* branch_name(Branch b);

struct CoupleOutcome {
  Vec x_next;
  Vec y_next;
  Branch branch = Branch::Stick;
  double r_hat = 0.0;  // |u_h(x) - u_h(y)|
  double R_hat = 0.0;  // |x_next - y_next|, from the branch's closed form
};

/// u_h(x) = pi_h(x) + h b(pi_h(x)).
Vec drifted_point(std::span<const double> x, const DriftModel& model, double h, const TruncationParams& trunc);

/// z - 2<e,z>e with e = axis/|axis|.
Vec reflect(std::span<const double> axis, std::span<const double> z);

/// v^m(z) for the drifted difference r_hat_vec = u_h(x) - u_h(y): the ratio of
/// Gaussian densities, cut to 0 outside both slabs |<e, sigma z>| <= m and
/// |<e, r_hat_vec + sigma z>| <= m, capped at 1. Returns 1 when r_hat_vec = 0.
double acceptance(std::span<const double> r_hat_vec, std::span<const double> z, double h, double sigma, double m);

using AcceptanceFn =
    std::function<double(std::span<const double> r_hat_vec, std::span<const double> z, double h, double sigma, double m)>;

/// One draw as consumed by the coupling; kept in test mode for replay.
struct CoupleDraw {
  Vec z;
  double zeta = 0.0;
  Branch branch = Branch::Stick;
};

/// The mixed stick / reflect / synchronous coupling of one TEM step.
class OneStepCoupling {
 public:
  /// H and m come from the calibration; pass acc to substitute the acceptance
  /// function (used by mutation tests).
  OneStepCoupling(const DriftModel& model, const Calibration& calib, double h, AcceptanceFn acc = acceptance);
  OneStepCoupling(const DriftModel& model, const TruncationParams& trunc, double h, double H, double m,
                  AcceptanceFn acc = acceptance);

  double h() const { return h_; }
  double H() const { return H_; }
  double m() const { return m_; }
  const DriftModel& model() const { return *model_; }
  const TruncationParams& trunc() const { return trunc_; }

  /// Draws z ~ N(0, hI) (d normals) and then zeta ~ U(0,1) from rng.
  CoupleOutcome step(std::span<const double> x, std::span<const double> y, RandomStream& rng,
                     CoupleDraw* record = nullptr) const;
  /// Deterministic form; step() is this with drawn (z, zeta).
  CoupleOutcome step_with(std::span<const double> x, std::span<const double> y, std::span<const double> z,
                          double zeta) const;

 private:
  const DriftModel* model_;
  TruncationParams trunc_;
  double h_, H_, m_;
  AcceptanceFn acc_;
};

struct TestReport {
  std::string name;
  bool pass = false;
  /// Pass, but only at a weakened resolution-limited threshold.
  bool resolution_limited = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// KS of y_next against N(u_h(y), h sigma^2 I), per coordinate and on the
/// projection onto e; Bonferroni over those tests at level alpha.
TestReport verify_marginal(const OneStepCoupling& cpl, std::span<const double> x, std::span<const double> y,
                           std::size_t n, std::uint64_t seed, double alpha = 0.01);

/// |mean R_hat - r_hat| <= 3 SE + a roundoff allowance of 64 eps (1 + r_hat).
TestReport verify_mean_distance(const OneStepCoupling& cpl, std::span<const double> x, std::span<const double> y,
                                std::size_t n, std::uint64_t seed);

struct ContractionRow {
  double r = 0.0;
  double r_hat = 0.0;
  double mean_f = 0.0;
  double se = 0.0;
  double f_r = 0.0;
  double bound = 0.0;
  bool pass = false;
  bool resolution_limited = false;
};

/// E f(R_hat) <= (1 - c h) f(r) + 3 SE per pair. When c h f(r) is below the SE
/// the pair is checked at E f(R_hat) <= f(r) + 3 SE and flagged instead.
/// Both comparisons allow 64 eps f(r) of roundoff.
TestReport verify_contraction(const OneStepCoupling& cpl, LogReal c, const DistanceFunction& df,
                              const std::vector<std::pair<Vec, Vec>>& pairs, std::size_t n, std::uint64_t seed,
                              std::vector<ContractionRow>* rows = nullptr);

enum class LowerBoundLemma { NearZero, SmallDrifted, Window };
const char* lemma_name(LowerBoundLemma l);

struct LowerBoundRow {
  LowerBoundLemma lemma = LowerBoundLemma::NearZero;
  double r = 0.0;
  double r_hat = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool in_regime = false;
  bool pass = false;
};

/// Restricted second moments of the coupled distance against the lemma's lower
/// bound: E[(R-r)^2; R in (r+sqrt h, r+18 sqrt h)] >= c1 r_hat sqrt h,
/// E[(R-r_hat)^2; R in (0, r_hat+sqrt h)] >= c2 r_hat sqrt h,
/// E[(R-r)^2; R in (r-sqrt h, r)] >= c3 h, each minus 3 SE. Fails when the
/// pair is outside the lemma's regime.
LowerBoundRow verify_second_moment_lower_bound(const OneStepCoupling& cpl, const GaussianConstants& gc,
                                               LowerBoundLemma lemma, std::span<const double> x,
                                               std::span<const double> y, std::size_t n, std::uint64_t seed);

}  // namespace tem
