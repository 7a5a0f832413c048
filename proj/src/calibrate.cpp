#include "tem/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/quadrature.hpp"

namespace tem {

double growth_bound(double u, const GrowthConstants& growth) {
  if (!(u >= 0.0)) throw InputError("growth_bound: u must be nonnegative");
  return growth.Lstar * (1.0 + 2.0 * std::pow(u, growth.ell));
}

double growth_bound_inverse(double v, const GrowthConstants& growth) {
  if (!(v > growth.Lstar)) throw InputError("growth_bound_inverse: argument must exceed L*");
  return std::pow((v - growth.Lstar) / (2.0 * growth.Lstar), 1.0 / growth.ell);
}

void TruncationParams::validate() const {
  growth.validate();
  if (!(theta_bar > 0.0 && theta_bar < 0.5)) throw InputError("theta_bar must lie in (0, 1/2)");
  if (!(theta > 0.0 && theta <= theta_bar)) throw InputError("theta must lie in (0, theta_bar]");
  if (!(M > growth.Lstar) || !std::isfinite(M)) throw InputError("truncation level M must exceed L*");
}

double truncation_radius(double h, const TruncationParams& trunc) {
  if (!(h > 0.0 && h <= 1.0)) throw InputError("step size must lie in (0, 1]");
  return growth_bound_inverse(trunc.M * std::pow(h, -trunc.theta), trunc.growth);
}

bool project_to_ball(std::span<double> x, double radius) {
  const double n = norm(x);
  if (n <= radius) return false;
  const double scale = radius / n;
  for (double& v : x) v *= scale;
  return true;
}

Vec truncate(std::span<const double> x, double h, const TruncationParams& trunc) {
  Vec out(x.begin(), x.end());
  project_to_ball(out, truncation_radius(h, trunc));
  return out;
}

namespace {

constexpr double kQuadTol = 1e-12;

double std_normal_pdf(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

double log_min(std::initializer_list<double> terms) { return std::min(terms); }

}  // namespace

GaussianConstants gaussian_constants(double sigma) {
  const double s = std::abs(sigma);
  if (!(s > 0.0) || !std::isfinite(s)) throw CalibrationError("sigma must be nonzero and finite");
  GaussianConstants gc;
  gc.c1 = LogReal::from_log(std::log(5.0) - 3.0 * std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi) +
                            std::min(-1.0 / (2.0 * s * s), std::log(8.0) - 32.0 / (s * s)));
  const double m3 = adaptive_simpson([](double u) { return u * u * u * std_normal_pdf(u); }, 0.0, 1.0 / (2.0 * s),
                                     kQuadTol);
  gc.c2 = 4.0 * s * s * s * -std::expm1(-1.0 / (s * s)) * m3;
  const double mass = adaptive_simpson(std_normal_pdf, 1.0 / (4.0 * s), 3.0 / (8.0 * s), kQuadTol);
  gc.c3 = -std::expm1(-1.0 / (8.0 * s * s)) / 16.0 * mass;
  if (!(gc.c2 > 0.0) || !std::isnormal(gc.c2) || !(gc.c3 > 0.0) || !std::isnormal(gc.c3))
    throw CalibrationError("c2 or c3 is not a positive normal number for sigma = " + fmt_double(sigma));
  return gc;
}

LogReal hbar_ceiling(const DissipativityConstants& consts, const TruncationParams& trunc) {
  consts.validate();
  trunc.validate();
  const double tb = trunc.theta_bar;
  const double l = log_min({(std::log(consts.K) - 2.0 * std::log(trunc.M)) / (1.0 - 2.0 * tb),
                            std::log(2.0 / consts.K), 0.0});
  return LogReal::from_log(l);
}

StepCeilings step_ceilings(const DissipativityConstants& consts, const TruncationParams& trunc,
                           const GaussianConstants& gc, LogReal cstar, double Phi1, double r1) {
  consts.validate();
  trunc.validate();
  if (!(consts.R > 0.0)) throw CalibrationError("step ceilings for the coupling need R > 0");
  if (!(Phi1 > 0.0) || !(r1 > 0.0) || !(gc.c3 > 0.0) || !std::isfinite(cstar.log()) || !std::isfinite(gc.c1.log()))
    throw CalibrationError("nonpositive intermediate in step ceilings");
  const double tb = trunc.theta_bar;
  const double lM = std::log(trunc.M);
  const double lR = std::log(consts.R);
  const double t_KM = (std::log(consts.K) - 2.0 * lM) / (1.0 - 2.0 * tb);
  const double t_K = -std::log(consts.K);
  const double t_L = -std::log(consts.L);
  const double t_2M = std::log(2.0 * trunc.M) / (tb - 1.0);
  const double t_R2 = 2.0 * lR;
  const double t_c1 = 2.0 / (1.0 - 2.0 * tb) *
                      (gc.c1.log() + cstar.log() + std::log(Phi1) - std::log(4.0) - lM - std::log(gc.c3));
  const double t_r1 = 2.0 * std::log(r1) - std::log(361.0);
  StepCeilings out;
  out.hbar = hbar_ceiling(consts, trunc);
  out.h1 = LogReal::from_log(log_min({t_KM, t_K, t_L, t_2M, t_R2, t_c1, t_r1, 0.0}));
  out.h2 = LogReal::from_log(log_min({t_KM, t_K, t_L, t_2M, t_R2, 0.0}));
  out.h3 = LogReal::from_log(log_min({std::log(4.0 * trunc.M) / (tb - 1.0), std::log(4.0) + t_R2,
                                      2.0 / (2.0 * tb - 1.0) * std::log(4.0 * trunc.M * r1),
                                      lM / (2.0 * tb - 1.0), 0.0}));
  for (LogReal h : {out.h1, out.h2, out.h3})
    if (std::isnan(h.log()) || h.log() == -std::numeric_limits<double>::infinity())
      throw CalibrationError("nonpositive step ceiling");
  return out;
}

double choose_M(double drift_at_origin_norm, const DissipativityConstants& consts, const GrowthConstants& growth,
                double sigma) {
  double M = std::max({drift_at_origin_norm, 3.0 * growth.Lstar, 1.0, std::sqrt(consts.K)});
  if (consts.R > 0.0) M = std::max(M, 1.0 / (512.0 * consts.R * std::abs(sigma)));
  return M;
}

const CouplingConstants& Calibration::require_coupling() const {
  if (!coupling) throw CalibrationError("coupling constants are undefined for R = 0");
  return *coupling;
}

CalibratedModel calibrate_with_distance(const DriftModel& model, const DissipativityConstants& consts,
                                        const GrowthConstants& growth, const CalibrationOptions& opts) {
  consts.validate();
  growth.validate();
  CalibratedModel out;
  Calibration& cal = out.calib;
  cal.model = model.name();
  cal.sigma = model.sigma();
  cal.consts = consts;
  cal.growth = growth;
  cal.drift_at_origin_norm = model.drift_at_origin_norm();
  cal.trunc = {choose_M(cal.drift_at_origin_norm, consts, growth, cal.sigma), opts.theta_bar, opts.theta_bar, growth};
  cal.trunc.validate();
  cal.hbar = hbar_ceiling(consts, cal.trunc);
  if (consts.R == 0.0) return out;

  CouplingConstants cc;
  cc.gauss = gaussian_constants(cal.sigma);
  const auto& gc = cc.gauss;
  const double R = consts.R;

  double m = 8.0;
  cc.m_trace.push_back(m);
  DistanceFunction df = DistanceFunction::build({consts.L, gc.c3, 2.0 * R + 2.0 * m}, opts.distance);
  std::optional<DistanceFunction> first;
  bool converged = false;
  bool diverged = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double log_t = 2.0 * std::log(gc.c3) - std::log(8.0) - 2.0 * std::log(df.Phi(1.0)) - df.cstar().log() -
                         std::log(gc.c2);
    const double next = std::max(8.0, std::exp(log_t) - R);
    cc.m_trace.push_back(next);
    if (!std::isfinite(next)) {
      diverged = true;
      break;
    }
    if (std::abs(next - m) < opts.m_tol) {
      converged = true;
      break;
    }
    if (!first) first = df;
    m = next;
    df = DistanceFunction::build({consts.L, gc.c3, 2.0 * R + 2.0 * m}, opts.distance);
  }
  if (diverged) {
    std::string trace;
    for (double v : cc.m_trace) trace += (trace.empty() ? "" : ", ") + fmt_double(v);
    if (opts.m_policy == MPolicy::FixedPointStrict)
      throw MFixedPointError("m fixed point diverged: " + trace, cc.m_trace);
    m = 8.0;
    if (first) df = std::move(*first);
    cc.m_source = "minimum";
  } else if (!converged) {
    throw MFixedPointError("m fixed point did not converge in " + std::to_string(opts.max_iterations) +
                               " iterations",
                           cc.m_trace);
  } else {
    cc.m_source = "fixed-point";
  }

  cc.m = m;
  cc.H = 2.0 * R;
  cc.r1 = 2.0 * R + 2.0 * m;
  cc.cstar = df.cstar();
  cc.phi_r1 = df.phi_r1();
  cc.Phi1 = df.Phi(1.0);
  const StepCeilings ceil = step_ceilings(consts, cal.trunc, gc, cc.cstar, cc.Phi1, cc.r1);
  cc.h1 = ceil.h1;
  cc.h2 = ceil.h2;
  cc.h3 = ceil.h3;
  const double lM = std::log(cal.trunc.M);
  const double log_c_far = cc.phi_r1.log() + std::log(consts.K * R / (4.0 * cc.r1));
  const double log_c_mid = std::log(gc.c2) + cc.cstar.log() + std::log(cc.Phi1) - std::log(2.0 * gc.c3);
  cc.c = LogReal::from_log(std::min({cc.cstar.log(), log_c_far, log_c_mid, lM}));

  auto fail = [](const std::string& what) { throw CalibrationError("calibration invariant violated: " + what); };
  if (cc.r1 != 2.0 * R + 2.0 * m) fail("r1 = 2R + 2m");
  if (cc.cstar.log() > std::log(gc.c3 / (4.0 * cc.r1 * cc.Phi1)) + 1e-9) fail("c* <= c3/(4 r1 Phi(1))");
  if (cc.cstar.log() < std::log(gc.c3 / (4.0 * cc.r1 * (cc.r1 + 1.0))) + cc.phi_r1.log() - 1e-9)
    fail("c* >= c3 phi(r1)/(4 r1 (r1+1))");
  if (!(cc.c.log() + cc.coupling_h_max().log() < 0.0)) fail("c h < 1");
  if (cal.trunc.M < cal.drift_at_origin_norm || cal.trunc.M < 3.0 * growth.Lstar) fail("M >= |b(0)|, 3L*");
  // Hypotheses of the contraction theorem on M and m.
  const double lM_need = std::max({0.5 * std::log(consts.K),
                                   std::log(gc.c2) + cc.cstar.log() + std::log(cc.Phi1) - std::log(4.0 * gc.c3),
                                   std::log(gc.c3 / (16.0 * cc.r1 * cc.Phi1)), 0.0});
  if (lM < lM_need - 1e-12) fail("M below the contraction theorem's lower bound");
  const double h_big = std::max({std::log(256.0) + cc.h1.log(), cc.h2.log(), cc.h3.log()});
  if (std::log(m) < std::log(0.5) + 0.5 * h_big) fail("m below (1/2) sqrt(256 h1 v h2 v h3)");

  cal.coupling = std::move(cc);
  out.df = std::move(df);
  return out;
}

Calibration calibrate_full(const DriftModel& model, const DissipativityConstants& consts,
                           const GrowthConstants& growth, const CalibrationOptions& opts) {
  return calibrate_with_distance(model, consts, growth, opts).calib;
}

DistanceFunction distance_function_for(const Calibration& calib, const DistanceOptions& opts) {
  const auto& cc = calib.require_coupling();
  return DistanceFunction::build({calib.consts.L, cc.gauss.c3, cc.r1}, opts);
}

}  // namespace tem
