#include "tem/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "tem/calibrate.hpp"
#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/measure.hpp"
#include "tem/model.hpp"
#include "tem/rng.hpp"

namespace tem {

namespace {

struct Calibrated {
  ModelSpec spec;
  CalibratedModel cm;
};

const Calibrated& double_well() {
  static const Calibrated cal = [] {
    Calibrated c{builtin_model("double_well"), {}};
    c.cm = calibrate_with_distance(c.spec.model, c.spec.diss, c.spec.growth);
    return c;
  }();
  return cal;
}

std::string fmt(double v) { return fmt_double(v); }

OneStepCoupling make_coupling(const Calibrated& c, double h, const SuiteOptions& opts) {
  return OneStepCoupling(c.spec.model, c.cm.calib, h, opts.acceptance_override ? opts.acceptance_override : acceptance);
}

void c1_marginal(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  const double h = std::ldexp(1.0, -8);
  const auto cpl = make_coupling(c, h, opts);
  const double xs[5] = {-1.6, -0.5, 0.0, 0.45, 1.7};
  const double ys[5] = {-1.55, -0.52, 0.06, 0.5, 1.2};
  const double alpha = 0.01 / 25.0;
  res.pass = true;
  double worst = 0.0;
  int k = 0;
  for (double x : xs) {
    for (double y : ys) {
      const TestReport r = verify_marginal(cpl, Vec{x}, Vec{y}, 100000, derive_seed(opts.seed, 100 + k++), alpha);
      worst = std::max(worst, r.statistic);
      res.pass = res.pass && r.pass;
      res.notes.push_back("pair (" + fmt(x) + "," + fmt(y) + ") " + (r.pass ? "pass " : "FAIL ") + r.detail);
    }
  }
  res.detail = "25 pairs, h=2^-8, n=1e5, alpha=0.01/25, max KS D=" + fmt(worst);
}

void c2_mean_distance(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  // below h2 ^ h3 so the pairs sit inside the coupling's step range
  const double h = std::ldexp(1.0, -36);
  const auto cpl = make_coupling(c, h, opts);
  const double r1 = c.cm.calib.require_coupling().r1;
  const std::vector<double> rs = {5e-7, 1e-5, 1e-3, 0.05, 0.5, 2.0, 5.9, 10.0, r1, 2.0 * r1};
  res.pass = true;
  for (std::size_t k = 0; k < rs.size(); ++k) {
    const double r = rs[k];
    const TestReport t = verify_mean_distance(cpl, Vec{0.5 * r}, Vec{-0.5 * r}, 1000000, derive_seed(opts.seed, 200 + k));
    res.pass = res.pass && t.pass;
    res.notes.push_back("r=" + fmt(r) + (t.pass ? " pass " : " FAIL ") + "|mean-r_hat|=" + fmt(t.statistic) +
                        " allowed=" + fmt(t.threshold) + " " + t.detail);
  }
  res.detail = "10 pairs r in (0, 2 r1], h=2^-36, n=1e6";
}

void c3_contraction(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  const auto& cc = c.cm.calib.require_coupling();
  const LogReal h_req = cc.coupling_h_max() * LogReal::from_value(0.5);
  res.pass = false;
  if (h_req.representable()) {
    const double h = h_req.value();
    const auto cpl = make_coupling(c, h, opts);
    const double sh = std::sqrt(h);
    const std::vector<double> rs = {0.25 * sh, sh, 4.0 * sh, 0.5, 5.0, 0.9 * cc.r1, 1.1 * cc.r1};
    std::vector<std::pair<Vec, Vec>> pairs;
    for (double r : rs) pairs.push_back({Vec{0.5 * r}, Vec{-0.5 * r}});
    std::vector<ContractionRow> rows;
    const TestReport t = verify_contraction(cpl, cc.c, *c.cm.df, pairs, 1000000, derive_seed(opts.seed, 300), &rows);
    res.pass = t.pass;
    res.detail = t.detail;
    return;
  }
  res.detail = "h = min(h1,h2,h3)/2 = exp(" + fmt(h_req.log()) +
               ") is below the smallest positive double; the criterion cannot be run as stated";

  // informational run at the representable part of the ceiling; does not change the verdict
  const double h = (min(cc.h2, cc.h3) * LogReal::from_value(0.5)).value();
  const auto cpl = make_coupling(c, h, opts);
  const double sh = std::sqrt(h);
  const double radius = truncation_radius(h, c.cm.calib.trunc);
  const std::vector<double> rs = {0.25 * sh, sh, 4.0 * sh, 1e-3, 0.5, 5.0, 0.9 * cc.r1,
                                  std::min(1.2 * cc.r1, 1.9 * radius)};
  std::vector<std::pair<Vec, Vec>> pairs;
  for (double r : rs) pairs.push_back({Vec{0.5 * r}, Vec{-0.5 * r}});
  std::vector<ContractionRow> rows;
  const TestReport t = verify_contraction(cpl, cc.c, *c.cm.df, pairs, 1000000, derive_seed(opts.seed, 301), &rows);
  res.notes.push_back("diagnostic at h = min(h2,h3)/2 = " + fmt(h) + ": " + (t.pass ? "weak bound holds" : "FAILS") +
                      ", " + t.detail);
  for (const auto& row : rows)
    res.notes.push_back("  r=" + fmt(row.r) + " E f(R)=" + fmt(row.mean_f) + " f(r)=" + fmt(row.f_r) +
                        " se=" + fmt(row.se) + (row.resolution_limited ? " resolution-limited" : "") +
                        (row.pass ? " ok" : " VIOLATED"));
}

void c4_lower_bounds(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  const double h = std::ldexp(1.0, -10);
  const auto cpl = make_coupling(c, h, opts);
  const auto& gc = c.cm.calib.require_coupling().gauss;
  struct Case {
    LowerBoundLemma lemma;
    double x, y;
  };
  const Case cases[3] = {{LowerBoundLemma::NearZero, 0.01, -0.01},
                         {LowerBoundLemma::SmallDrifted, 0.3, 0.28},
                         {LowerBoundLemma::Window, 0.1, -0.1}};
  res.pass = true;
  int k = 0;
  for (const auto& cs : cases) {
    const LowerBoundRow row =
        verify_second_moment_lower_bound(cpl, gc, cs.lemma, Vec{cs.x}, Vec{cs.y}, 1000000, derive_seed(opts.seed, 400 + k++));
    res.pass = res.pass && row.pass;
    res.notes.push_back(std::string(lemma_name(cs.lemma)) + " r=" + fmt(row.r) + " r_hat=" + fmt(row.r_hat) +
                        " estimate=" + fmt(row.estimate) + " se=" + fmt(row.se) + " bound=" + fmt(row.bound) +
                        (row.in_regime ? "" : " OUT-OF-REGIME") + (row.pass ? " pass" : " FAIL"));
  }
  res.detail = "sigma=1, h=2^-10, n=1e6 per lemma";
}

void c5_strong_error(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  std::vector<double> hs;
  for (int e = 7; e <= 11; ++e) hs.push_back(std::ldexp(1.0, -e));
  const StrongErrorCurve sc =
      strong_error_curve(c.spec.model, c.cm.calib.trunc, hs, std::ldexp(1.0, -14), 4.0, Vec{1.0}, 2000, derive_seed(opts.seed, 500));
  bool decreasing = true;
  for (std::size_t j = 1; j < sc.points.size(); ++j) decreasing = decreasing && sc.points[j].error < sc.points[j - 1].error;
  for (const auto& p : sc.points)
    res.notes.push_back("h=" + fmt(p.h) + " error=" + fmt(p.error) + " se=" + fmt(p.se));
  res.pass = decreasing && sc.slope >= 0.4 && sc.slope <= 1.1;
  res.detail = "slope=" + fmt(sc.slope) + (decreasing ? ", strictly decreasing" : ", NOT strictly decreasing") +
               " (T=4, h_ref=2^-14, n=2000; desk scale)";
}

void c6_invariant(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  std::vector<double> hs;
  for (int e = 4; e <= 7; ++e) hs.push_back(std::ldexp(1.0, -e));
  const InvariantError ie =
      invariant_measure_error(c.spec.model, c.cm.calib.trunc, hs, 20.0, Vec{1.0}, 8000, derive_seed(opts.seed, 600), 200);
  bool monotone = true;
  for (std::size_t j = 1; j < ie.points.size(); ++j) {
    const auto& a = ie.points[j - 1];
    const auto& b = ie.points[j];
    monotone = monotone && b.error <= a.error + 2.0 * std::hypot(a.se, b.se);
  }
  for (const auto& p : ie.points) res.notes.push_back("h=" + fmt(p.h) + " W1=" + fmt(p.error) + " se=" + fmt(p.se));
  const double last = ie.points.back().error;
  res.pass = monotone && last < 0.05;
  res.detail = std::string(monotone ? "monotone within 2 SE" : "NOT monotone") + ", W1(h=2^-7)=" + fmt(last) +
               ", slope=" + fmt(ie.slope);
}

void c7_ergodicity(CriterionResult& res, const SuiteOptions& opts) {
  const auto& c = double_well();
  const double h = std::ldexp(1.0, -10);
  const DecayCurve dc =
      ergodicity_decay(c.spec.model, c.cm.calib.trunc, h, Vec{1.0}, Vec{-1.5}, 20.0, 5000, derive_seed(opts.seed, 700), 256);
  double first_below = -1.0;
  for (std::size_t i = 0; i < dc.t.size(); ++i)
    if (first_below < 0.0 && dc.w1[i] < 0.05) first_below = dc.t[i];
  for (std::size_t i = 0; i < dc.t.size(); i += 8) res.notes.push_back("t=" + fmt(dc.t[i]) + " W1=" + fmt(dc.w1[i]));
  const bool below = dc.w1.back() < 0.05 && first_below >= 0.0;
  res.pass = below && dc.rate > 0.0 && dc.fit_points >= 2;
  res.detail = "W1(T=20)=" + fmt(dc.w1.back()) + ", first below 0.05 at t=" + fmt(first_below) +
               ", rate=" + fmt(dc.rate) + " over " + std::to_string(dc.fit_points) + " points, floor=" + fmt(dc.noise_floor);
}

void c8_distance(CriterionResult& res, const SuiteOptions&) {
  const auto& c = double_well();
  const auto& cc = c.cm.calib.require_coupling();
  const DistanceParams p{c.cm.calib.consts.L, cc.gauss.c3, cc.r1};
  DistanceOptions coarse_opts;
  const DistanceFunction coarse = DistanceFunction::build(p, coarse_opts);
  DistanceOptions fine_opts;
  fine_opts.base_points = 2 * coarse.family_points();
  const DistanceFunction fine = DistanceFunction::build(p, fine_opts);

  const auto& u = coarse.grid();
  const auto& f = coarse.f_vals();
  const auto& rho = coarse.rho_vals();
  const double log_lower_slope = coarse.slope_beyond().log();
  std::size_t bad_bounds = 0, bad_rho = 0, bad_concave = 0;
  double worst_refine = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (f[i] > u[i]) ++bad_bounds;
    if (u[i] > 0.0 && std::log(f[i]) < log_lower_slope + std::log(u[i]) - 1e-12) ++bad_bounds;
    if (u[i] == 0.0 && f[i] != 0.0) ++bad_bounds;
    if (!(rho[i] >= 0.5 && rho[i] <= 1.0)) ++bad_rho;
    if (i > 0 && i + 1 < u.size()) {
      const double w = (u[i] - u[i - 1]) / (u[i + 1] - u[i - 1]);
      const double chord = (1.0 - w) * f[i - 1] + w * f[i + 1];
      if (f[i] < chord - 1e-10) ++bad_concave;
    }
    if (u[i] > 0.0) worst_refine = std::max(worst_refine, std::abs(fine.f(u[i]) - f[i]) / f[i]);
  }
  res.pass = bad_bounds == 0 && bad_rho == 0 && bad_concave == 0 && worst_refine < 1e-8;
  res.detail = std::to_string(u.size()) + " grid points; bound violations=" + std::to_string(bad_bounds) +
               ", rho violations=" + std::to_string(bad_rho) + ", concavity violations=" + std::to_string(bad_concave) +
               ", max refinement change=" + fmt(worst_refine);
}

void c9_oracles(CriterionResult& res, const SuiteOptions& opts) {
  RandomStream rng(derive_seed(opts.seed, 900), 0);
  double worst_w1 = 0.0;
  for (std::size_t n : {1u, 2u, 7u, 64u, 200u, 512u}) {
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = 0.5 + 2.0 * rng.normal();
    const auto A = EmpiricalMeasure::from_1d(a), B = EmpiricalMeasure::from_1d(b);
    worst_w1 = std::max(worst_w1, std::abs(w1_1d(A, B) - w1_assignment(A, B)));
  }
  // n = 4 in 2-D against all 24 pairings
  std::vector<double> a(8), b(8);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  const auto A = EmpiricalMeasure(2, a), B = EmpiricalMeasure(2, b);
  std::vector<int> perm = {0, 1, 2, 3};
  double brute = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += distance(A.point(i), B.point(perm[i]));
    brute = std::min(brute, s / 4.0);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double brute_gap = std::abs(w1_assignment(A, B) - brute);

  const StationaryDensity1D ou = stationary_density_1d([](double x) { return -x; }, 1.0);
  double worst_cdf = 0.0;
  const auto& g = ou.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    worst_cdf = std::max(worst_cdf, std::abs(ou.cdf_vals()[i] - normal_cdf(g[i] * std::sqrt(2.0))));
    if (i + 1 < g.size()) {
      const double mid = 0.5 * (g[i] + g[i + 1]);
      worst_cdf = std::max(worst_cdf, std::abs(ou.cdf(mid) - normal_cdf(mid * std::sqrt(2.0))));
    }
  }
  worst_cdf = std::max({worst_cdf, normal_cdf(g.front() * std::sqrt(2.0)), 1.0 - normal_cdf(g.back() * std::sqrt(2.0))});
  res.pass = worst_w1 <= 1e-10 && brute_gap <= 1e-12 && worst_cdf <= 1e-8;
  res.detail = "max |w1_1d - w1_assignment|=" + fmt(worst_w1) + ", |assignment - brute force|=" + fmt(brute_gap) +
               ", OU CDF sup error=" + fmt(worst_cdf);
}

void c10_checkers(CriterionResult& res, const SuiteOptions& opts) {
  const ModelSpec dw = builtin_model("double_well");
  const ModelSpec s2 = builtin_model("sin2");
  const std::uint64_t seed = derive_seed(opts.seed, 1000);
  const CheckReport a = check_contractivity_at_infinity(dw.model, {1.0, 2.0, 3.0}, 100000, 10.0, seed);
  const CheckReport b = check_polynomial_lipschitz(dw.model, {1.5, 2.0}, 100000, 10.0, seed);
  const CheckReport d = check_contractivity_at_infinity(s2.model, {1.0, 0.5, 4.0}, 100000, 10.0, seed);
  auto line = [](const std::string& what, const CheckReport& r) {
    std::string s = what + (r.pass ? " pass" : " FAIL") + " violations=" + std::to_string(r.n_violations) + "/" +
                    std::to_string(r.n_pairs) + " max=" + fmt_double(r.max_violation);
    if (r.witness) {
      s += " witness x=(";
      for (double v : r.witness->first) s += fmt_double(v) + " ";
      s += ") y=(";
      for (double v : r.witness->second) s += fmt_double(v) + " ";
      s += ")";
    }
    return s;
  };
  res.notes.push_back(line("double_well contractivity (1,2,3):", a));
  res.notes.push_back(line("double_well growth (2,3/2):", b));
  res.notes.push_back(line("sin2 contractivity (1,1/2,4):", d));
  res.pass = a.pass && b.pass && d.pass;
  res.detail = std::string("double_well (1,2,3) ") + (a.pass ? "pass" : "FAIL") + ", double_well (2,3/2) " +
               (b.pass ? "pass" : "FAIL") + ", sin2 (1,1/2,4) " + (d.pass ? "pass" : "FAIL");
}

struct Entry {
  const char* name;
  double budget;
  void (*fn)(CriterionResult&, const SuiteOptions&);
};

const Entry kEntries[kCriterionCount] = {
    {"coupling_marginal", 60.0, c1_marginal},
    {"mean_distance_identity", 120.0, c2_mean_distance},
    {"contraction", 0.0, c3_contraction},
    {"lower_bound_lemmas", 120.0, c4_lower_bounds},
    {"strong_error_rate", 300.0, c5_strong_error},
    {"invariant_measure_rate", 300.0, c6_invariant},
    {"numerical_ergodicity", 180.0, c7_ergodicity},
    {"distance_function_invariants", 5.0, c8_distance},
    {"oracle_equivalences", 30.0, c9_oracles},
    {"assumption_checkers", 10.0, c10_checkers},
};

}  // namespace

const char* criterion_name(int id) {
  if (id < 1 || id > kCriterionCount) throw InputError("criterion id must be 1.." + std::to_string(kCriterionCount));
  return kEntries[id - 1].name;
}

CriterionResult run_criterion(int id, const SuiteOptions& opts) {
  const Entry& e = kEntries[id - 1];
  CriterionResult res;
  res.id = id;
  res.name = criterion_name(id);
  res.budget_seconds = e.budget;
  if (id == 1 || id == 2 || id == 3 || id == 4 || id == 8) double_well();  // calibration is shared, not timed
  const auto t0 = std::chrono::steady_clock::now();
  e.fn(res, opts);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (e.budget > 0.0 && res.seconds > e.budget) {
    res.pass = false;
    res.detail += "; runtime " + fmt(res.seconds) + "s over the " + fmt(e.budget) + "s budget";
  }
  return res;
}

std::vector<CriterionResult> run_suite(const SuiteOptions& opts) {
  std::vector<int> ids;
  if (opts.only) {
    ids = *opts.only;
  } else {
    ids.resize(kCriterionCount);
    std::iota(ids.begin(), ids.end(), 1);
  }
  std::vector<CriterionResult> out;
  for (int id : ids) out.push_back(run_criterion(id, opts));
  return out;
}

std::string result_line(const CriterionResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.2f", r.seconds);
  return std::string(r.pass ? "PASS" : "FAIL") + " c" + std::to_string(r.id) + " " + r.name + " (" + secs + "s) " +
         r.detail;
}

std::string suite_json(const std::vector<CriterionResult>& results, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    j["criteria"].push_back({{"id", r.id},
                             {"name", r.name},
                             {"pass", r.pass},
                             {"seconds", r.seconds},
                             {"budget_seconds", r.budget_seconds},
                             {"detail", r.detail},
                             {"notes", r.notes}});
  }
  if (results.empty()) j["criteria"] = nlohmann::json::array();
  j["pass"] = all;
  return j.dump(2);
}

}  // namespace tem
