#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tem/calibrate.hpp"
#include "tem/model.hpp"
#include "tem/scheme.hpp"

namespace tem {

/// Uniformly weighted point cloud, stored row-major.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(std::size_t dim, std::vector<double> flat);
  static EmpiricalMeasure from_1d(std::vector<double> xs) { return EmpiricalMeasure(1, std::move(xs)); }
  /// All paths of an ensemble at checkpoint c.
  static EmpiricalMeasure from_ensemble(const PathEnsemble& ens, std::size_t c);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return data_.size() / dim_; }
  std::span<const double> point(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& flat() const { return data_; }

 private:
  std::size_t dim_;
  std::vector<double> data_;
};

/// Exact 1-D W1 as the integral of |F_a - F_b|. With equal sizes this is the
/// mean gap between sorted samples.
double w1_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

inline constexpr std::size_t kAssignmentCap = 4096;

/// Minimum-cost perfect matching on a square cost matrix (row-major).
/// Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

/// Exact W1 between equal-size clouds via assignment on Euclidean costs.
double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

/// 1-D exact or assignment, by dimension.
double w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b);

using Cdf = std::function<double(double)>;

double normal_cdf(double u);

/// sup |F_n - F|.
double ks_statistic(std::span<const double> xs, const Cdf& cdf);
/// Asymptotic Kolmogorov tail with Stephens' small-sample correction.
double ks_pvalue(double D, std::size_t n);
/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// p(u) proportional to exp((2/sigma^2) int_0^u b) on a grid, normalized.
class StationaryDensity1D {
 public:
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& density() const { return density_; }
  const std::vector<double>& cdf_vals() const { return cdf_; }

  /// Linear interpolation in the CDF table; 0 and 1 outside.
  double cdf(double u) const;
  double quantile(double p) const;
  /// Integral of u^k p(u) over the table.
  double moment(int k) const;
  /// CSV u,density,cdf.
  void write_table(const std::string& path) const;

 private:
  std::vector<double> grid_, density_, cdf_;
  friend StationaryDensity1D stationary_density_1d(const ScalarDrift&, double, double);
};

/// The table spans [-A, A] with log p at least 40 below its maximum at both
/// ends, so the tail mass outside is far below 1e-10.
StationaryDensity1D stationary_density_1d(const ScalarDrift& drift, double sigma, double step = 1e-4);

/// Exact int |F_n - F| against a tabulated CDF.
double w1_to_density(std::span<const double> xs, const StationaryDensity1D& ref);

/// Standard error of w1_to_density by bootstrap over the samples.
double w1_bootstrap_se(std::span<const double> xs, const StationaryDensity1D& ref, std::size_t B, std::uint64_t seed);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit least_squares(std::span<const double> x, std::span<const double> y);

struct DecayCurve {
  std::vector<double> t;
  std::vector<double> w1;
  double noise_floor = 0.0;
  /// Exponential rate from a log-linear fit over points above 3x the floor.
  double rate = 0.0;
  std::size_t fit_points = 0;
};

/// W1 between two independently driven ensembles started at a and b.
DecayCurve ergodicity_decay(const DriftModel& model, const TruncationParams& trunc, double h, const Vec& a,
                            const Vec& b, double T, std::size_t n_paths, std::uint64_t seed, std::int64_t every);

struct ErrorPoint {
  double h = 0.0;
  double error = 0.0;
  double se = 0.0;
};

struct StrongErrorCurve {
  std::vector<ErrorPoint> points;
  double slope = 0.0;
};

/// Mean |X^h_T - X^ref_T| with every coarse path driven by the aggregated
/// increments of the same fine Brownian path.
StrongErrorCurve strong_error_curve(const DriftModel& model, const TruncationParams& trunc,
                                    const std::vector<double>& h_list, double h_ref, double T, const Vec& x0,
                                    std::size_t n_paths, std::uint64_t seed);

/// Terminal ensembles at each h from the same fine Brownian paths, plus the
/// fine reference ensemble itself (last entry).
std::vector<EmpiricalMeasure> coupled_terminal_laws(const DriftModel& model, const TruncationParams& trunc,
                                                    const std::vector<double>& h_list, double h_ref, double T,
                                                    const Vec& x0, std::size_t n_paths, std::uint64_t seed);

struct InvariantError {
  std::vector<ErrorPoint> points;
  double slope = 0.0;
};

/// W1 of the time-T ensemble at each h against the stationary law: the
/// tabulated density in 1-D, otherwise the ensemble at the smallest h (which
/// then has no point of its own).
InvariantError invariant_measure_error(const DriftModel& model, const TruncationParams& trunc,
                                       const std::vector<double>& h_list, double T, const Vec& x0,
                                       std::size_t n_samples, std::uint64_t seed, std::size_t bootstrap = 200);

}  // namespace tem
