#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tem/log_real.hpp"

namespace tem {

/// Inputs of the distance function: phi decays at rate a = (2L+1)/(2 c3).
struct DistanceParams {
  double L = 0.0;
  double c3 = 0.0;
  double r1 = 0.0;
};

/// log phi(u) = -a((u^r1)^2 + 2(u^r1)); exact.
double log_concave_weight(double u, const DistanceParams& p);
/// phi(u) in (0,1]; underflows to 0 for large a*u.
double concave_weight(double u, const DistanceParams& p);

struct DistanceOptions {
  /// Points per grid family; doubled until two successive builds agree.
  std::size_t base_points = 4096;
  std::size_t max_points = 1u << 17;
  double refine_tol = 1e-8;
  double concavity_tol = 1e-10;
};

/// Tabulated phi, Phi, rho and f on [0, r1], linear beyond r1.
///
/// The grid is the union of three families: uniform on [0, r1], a family
/// equispaced in a*(u^2+2u) for the layer near 0 where phi falls off, and a
/// family equispaced in log I(u) for the layer near r1 where rho leaves 1.
/// Increments of Phi, I and f are integrated in log space, so the table stays
/// meaningful when phi(r1) and c* underflow.
class DistanceFunction {
 public:
  static DistanceFunction build(const DistanceParams& params, const DistanceOptions& opts = {});

  const DistanceParams& params() const { return params_; }
  double r1() const { return params_.r1; }
  double rate() const { return a_; }
  LogReal cstar() const { return cstar_; }
  LogReal phi_r1() const { return LogReal::from_log(log_phi_r1_); }
  /// phi(r1) rho(r1) = phi(r1)/2.
  LogReal slope_beyond() const { return LogReal::from_log(log_phi_r1_ - std::log(2.0)); }

  /// Phi(u) = int_0^u phi; linear in u beyond r1 since phi is clamped there.
  double Phi(double u) const;
  double rho(double u) const;
  /// Interpolated f; f(r1) + slope*(u-r1) beyond r1. Throws on u < 0.
  double f(double u) const;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& log_phi_vals() const { return log_phi_; }
  const std::vector<double>& Phi_vals() const { return Phi_; }
  const std::vector<double>& rho_vals() const { return rho_; }
  const std::vector<double>& f_vals() const { return f_; }
  /// log of int_{u_i}^{u_{i+1}} phi rho.
  const std::vector<double>& log_f_increments() const { return log_df_; }
  std::size_t family_points() const { return family_points_; }

  /// CSV table u,phi,Phi,rho,f on the grid plus [r1, r1+1].
  void write_table(const std::string& path) const;

 private:
  DistanceParams params_;
  double a_ = 0.0;
  double log_phi_r1_ = 0.0;
  LogReal cstar_;
  std::size_t family_points_ = 0;
  std::vector<double> grid_, log_phi_, Phi_, log_I_, rho_, f_, log_df_;

  friend DistanceFunction build_once(const DistanceParams&, std::size_t, const DistanceOptions&);
};

/// Convenience wrapper matching the free-function form.
double eval_f(const DistanceFunction& df, double u);

}  // namespace tem
