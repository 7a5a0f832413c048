#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tem/distfn.hpp"
#include "tem/errors.hpp"
#include "tem/log_real.hpp"
#include "tem/model.hpp"

namespace tem {

/// phi(u) = L*(1 + 2u^ell), the growth envelope of the drift's local Lipschitz constant.
double growth_bound(double u, const GrowthConstants& growth);
/// ((v - L*)/(2L*))^(1/ell); v must exceed L*.
double growth_bound_inverse(double v, const GrowthConstants& growth);

struct TruncationParams {
  double M = 0.0;
  double theta = 0.25;
  double theta_bar = 0.25;
  GrowthConstants growth;
  /// 0 < theta <= theta_bar < 1/2 and M > L* so the radius is positive.
  void validate() const;
};

/// phi^{-1}(M h^{-theta}).
double truncation_radius(double h, const TruncationParams& trunc);

/// Radial projection onto the ball of the given radius, in place.
/// Returns true when x was moved.
bool project_to_ball(std::span<double> x, double radius);

Vec truncate(std::span<const double> x, double h, const TruncationParams& trunc);

/// Constants from the Gaussian lower-bound lemmas; c1 can underflow for small
/// sigma, so it is kept in log form.
struct GaussianConstants {
  LogReal c1;
  double c2 = 0.0;
  double c3 = 0.0;
};
GaussianConstants gaussian_constants(double sigma);

/// (K M^-2)^(1/(1-2 theta_bar)) ^ (2/K), clamped to 1.
LogReal hbar_ceiling(const DissipativityConstants& consts, const TruncationParams& trunc);

struct StepCeilings {
  LogReal hbar, h1, h2, h3;
  LogReal coupling_max() const { return min(min(h1, h2), h3); }
};

/// All four ceilings; the coupling ones need c1, c3, c*, Phi(1) and r1.
StepCeilings step_ceilings(const DissipativityConstants& consts, const TruncationParams& trunc,
                           const GaussianConstants& gc, LogReal cstar, double Phi1, double r1);

/// How m was settled. The recipe for m depends on c*, Phi(1) through r1 = 2R + 2m.
enum class MPolicy {
  /// Iterate from m = 8; if the iteration diverges, use m = 8 and verify
  /// the contraction theorem's hypotheses on M and m directly.
  FixedPointOrMinimum,
  /// Iterate; divergence or non-convergence is an error.
  FixedPointStrict,
};

struct CouplingConstants {
  double H = 0.0;
  double m = 0.0;
  double r1 = 0.0;
  GaussianConstants gauss;
  LogReal cstar;
  LogReal c;
  LogReal phi_r1;
  double Phi1 = 0.0;
  LogReal h1, h2, h3;
  /// "fixed-point" or "minimum"; the latter when the iteration diverged.
  std::string m_source;
  std::vector<double> m_trace;
  LogReal coupling_h_max() const { return min(min(h1, h2), h3); }
};

struct Calibration {
  std::string model;
  double sigma = 1.0;
  DissipativityConstants consts;
  GrowthConstants growth;
  double drift_at_origin_norm = 0.0;
  TruncationParams trunc;
  LogReal hbar;
  /// Absent when R = 0: the coupling degenerates and only plain TEM applies.
  std::optional<CouplingConstants> coupling;

  const CouplingConstants& require_coupling() const;
};

struct CalibrationOptions {
  double theta_bar = 0.25;
  MPolicy m_policy = MPolicy::FixedPointOrMinimum;
  int max_iterations = 100;
  double m_tol = 1e-9;
  DistanceOptions distance;
};

/// M = max{|b(0)|, 3L*, 1, sqrt K, 1/(512 R |sigma|)}.
double choose_M(double drift_at_origin_norm, const DissipativityConstants& consts,
                const GrowthConstants& growth, double sigma);

struct CalibratedModel {
  Calibration calib;
  std::optional<DistanceFunction> df;
};

CalibratedModel calibrate_with_distance(const DriftModel& model, const DissipativityConstants& consts,
                                        const GrowthConstants& growth, const CalibrationOptions& opts = {});

Calibration calibrate_full(const DriftModel& model, const DissipativityConstants& consts,
                           const GrowthConstants& growth, const CalibrationOptions& opts = {});

/// Rebuild the distance function a calibration was derived with.
DistanceFunction distance_function_for(const Calibration& calib, const DistanceOptions& opts = {});

/// Error carrying the m iterates when the fixed point fails.
class MFixedPointError : public CalibrationError {
 public:
  MFixedPointError(const std::string& what, std::vector<double> trace)
      : CalibrationError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace tem
