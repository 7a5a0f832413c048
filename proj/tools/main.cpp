#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tem/calibrate.hpp"
#include "tem/calibration_io.hpp"
#include "tem/coupling.hpp"
#include "tem/errors.hpp"
#include "tem/experiments.hpp"
#include "tem/format.hpp"
#include "tem/measure.hpp"
#include "tem/model.hpp"
#include "tem/rng.hpp"
#include "tem/scheme.hpp"
#include "tem/suite.hpp"

using namespace tem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAcceptance = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// options shared by the model-driven subcommands
struct ModelArgs {
  std::string model = "double_well";
  double sigma = 1.0;
  double theta_bar = 0.25;
  std::string calibration_file;
  // polynomial model: one coefficient list per coordinate, "a0,a1,..."
  std::vector<std::string> poly;
  std::optional<double> L, K, R, Lstar, ell;
};

struct RunArgs {
  std::optional<double> h;
  std::vector<double> h_list;
  std::size_t paths = 0;
  std::int64_t steps = 0;
  std::uint64_t seed = 1;
  std::string out;
  bool no_timestamp = false;
};

void add_model_options(CLI::App* sub, ModelArgs& m) {
  sub->add_option("--model", m.model, "double_well, sin2 or polynomial")->capture_default_str();
  sub->add_option("--sigma", m.sigma, "diffusion coefficient")->capture_default_str();
  sub->add_option("--theta-bar", m.theta_bar, "truncation exponent in (0, 1/2)")->capture_default_str();
  sub->add_option("--calibration", m.calibration_file, "reuse a file written by 'calibrate --write'");
  sub->add_option("--poly", m.poly, "per-coordinate coefficients a0,a1,... of b_i(u) = sum a_k u^k");
  sub->add_option("--L", m.L, "dissipativity constant L");
  sub->add_option("--K", m.K, "dissipativity constant K");
  sub->add_option("--R", m.R, "dissipativity radius R");
  sub->add_option("--Lstar", m.Lstar, "growth constant L*");
  sub->add_option("--ell", m.ell, "growth exponent ell");
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'");
    }
  }
  return out;
}

ModelSpec resolve_model(const ModelArgs& a) {
  if (a.model == "polynomial") {
    if (a.poly.empty()) throw ConfigError("--model polynomial needs --poly coefficient lists");
    if (!(a.L && a.K && a.R && a.Lstar && a.ell)) throw ConfigError("--model polynomial needs --L --K --R --Lstar --ell");
    std::vector<std::vector<double>> coeffs;
    for (const auto& p : a.poly) coeffs.push_back(parse_list(p));
    return {polynomial_model("polynomial", a.sigma, coeffs), {*a.L, *a.K, *a.R}, {*a.Lstar, *a.ell}};
  }
  ModelSpec spec = [&] {
    try {
      return builtin_model(a.model, a.sigma);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }();
  if (a.L) spec.diss.L = *a.L;
  if (a.K) spec.diss.K = *a.K;
  if (a.R) spec.diss.R = *a.R;
  if (a.Lstar) spec.growth.Lstar = *a.Lstar;
  if (a.ell) spec.growth.ell = *a.ell;
  return spec;
}

Calibration resolve_calibration(const ModelArgs& a, const ModelSpec& spec) {
  if (!a.calibration_file.empty()) {
    Calibration c = load_calibration(a.calibration_file);
    if (c.model != spec.model.name())
      throw ConfigError("calibration file is for model '" + c.model + "', not '" + spec.model.name() + "'");
    return c;
  }
  CalibrationOptions opts;
  opts.theta_bar = a.theta_bar;
  return calibrate_full(spec.model, spec.diss, spec.growth, opts);
}

std::ostream& open_out(const std::string& path, std::unique_ptr<std::ofstream>& holder) {
  if (path.empty() || path == "-") return std::cout;
  holder = std::make_unique<std::ofstream>(path);
  if (!*holder) throw ConfigError("cannot write " + path);
  return *holder;
}

// h above a ceiling: clamp when asked and the ceiling is a usable double, otherwise warn
double apply_ceiling(double h, LogReal ceiling, const std::string& what, bool clamp) {
  if (h <= ceiling.value() && ceiling.value() > 0.0) return h;
  const double c = ceiling.value();
  const bool usable = c > 0.0 && std::isfinite(std::log(c)) && c >= 1e-12;
  if (clamp && usable) {
    std::cerr << "warning: h=" << fmt_double(h) << " exceeds " << what << " ceiling " << fmt_double(c)
              << "; clamped\n";
    return c;
  }
  std::cerr << "warning: h=" << fmt_double(h) << " exceeds " << what << " ceiling (log = " << fmt_double(ceiling.log())
            << "); running as requested\n";
  return h;
}

int cmd_calibrate(const ModelArgs& m, const std::string& write_path) {
  const ModelSpec spec = resolve_model(m);
  const Calibration c = resolve_calibration(m, spec);
  write_calibration(std::cout, c);
  if (!write_path.empty()) save_calibration(write_path, c);
  return kExitOk;
}

int cmd_simulate(const ModelArgs& m, const RunArgs& r, std::int64_t every, const std::string& x0_text) {
  const ModelSpec spec = resolve_model(m);
  const Calibration c = resolve_calibration(m, spec);
  if (!r.h) throw ConfigError("simulate needs --h");
  if (r.steps <= 0 || r.paths == 0) throw ConfigError("simulate needs positive --steps and --paths");
  const double h = apply_ceiling(*r.h, c.hbar, "moment-bound", true);
  EnsembleSpec es;
  es.n_paths = r.paths;
  es.n_steps = r.steps;
  es.checkpoints = checkpoint_grid(r.steps, every > 0 ? every : r.steps);
  Vec x0 = x0_text.empty() ? Vec(spec.model.dim(), 0.0) : parse_list(x0_text);
  if (x0.size() != spec.model.dim()) throw ConfigError("--x0 has the wrong dimension");
  es.initial = {x0};
  es.seed = r.seed;
  const PathEnsemble ens = simulate_ensemble(spec.model, c.trunc, h, es);
  std::unique_ptr<std::ofstream> f;
  std::ostream& out = open_out(r.out, f);
  out << "checkpoint,path";
  for (std::size_t i = 0; i < ens.dim; ++i) out << ",coord" << i;
  out << '\n';
  for (std::size_t k = 0; k < ens.checkpoints.size(); ++k) {
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
      out << ens.checkpoints[k] << ',' << p;
      for (double v : ens.state(k, p)) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
  std::cerr << "paths truncated at least once: " << ens.paths_truncated << " of " << ens.n_paths << '\n';
  return kExitOk;
}

int cmd_coupling_check(const ModelArgs& m, const RunArgs& r, const std::string& r_text, double center) {
  const ModelSpec spec = resolve_model(m);
  CalibrationOptions opts;
  opts.theta_bar = m.theta_bar;
  CalibratedModel cm = calibrate_with_distance(spec.model, spec.diss, spec.growth, opts);
  if (!m.calibration_file.empty()) cm.calib = resolve_calibration(m, spec);
  if (!cm.calib.coupling) throw CalibrationError("coupling constants are undefined for this model (R = 0)");
  const CouplingConstants& cc = *cm.calib.coupling;
  const DistanceFunction df = distance_function_for(cm.calib);
  if (!r.h) throw ConfigError("coupling-check needs --h");
  const double h = apply_ceiling(*r.h, cc.coupling_h_max(), "coupling", true);
  const std::size_t n = r.paths ? r.paths : 20000;
  const std::vector<double> radii = r_text.empty() ? std::vector<double>{0.01, 0.1, 1.0, cc.H} : parse_list(r_text);
  const OneStepCoupling cpl(spec.model, cm.calib, h);
  const std::size_t d = spec.model.dim();

  std::vector<std::pair<Vec, Vec>> pairs;
  for (double rr : radii) {
    if (!(rr > 0.0)) throw ConfigError("pair distances must be positive");
    Vec x(d, 0.0), y(d, 0.0);
    x[0] = center + 0.5 * rr;
    y[0] = center - 0.5 * rr;
    pairs.emplace_back(x, y);
  }
  std::vector<ContractionRow> rows;
  const TestReport con = verify_contraction(cpl, cc.c, df, pairs, n, derive_seed(r.seed, 1), &rows);
  std::unique_ptr<std::ofstream> f;
  std::ostream& out = open_out(r.out, f);
  out << "pair,r,r_hat,mean_f,stderr,f_r,bound,contraction_pass,resolution_limited,marginal_max_D,marginal_alpha,"
         "marginal_pass\n";
  bool all = con.pass;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const TestReport mar =
        verify_marginal(cpl, pairs[k].first, pairs[k].second, n, derive_seed(r.seed, 100 + k));
    all = all && mar.pass;
    const auto& row = rows[k];
    out << k << ',' << fmt_double(row.r) << ',' << fmt_double(row.r_hat) << ',' << fmt_double(row.mean_f) << ','
        << fmt_double(row.se) << ',' << fmt_double(row.f_r) << ',' << fmt_double(row.bound) << ','
        << (row.pass ? 1 : 0) << ',' << (row.resolution_limited ? 1 : 0) << ',' << fmt_double(mar.statistic) << ','
        << fmt_double(mar.threshold) << ',' << (mar.pass ? 1 : 0) << '\n';
  }
  std::cerr << (all ? "PASS" : "FAIL") << " coupling-check h=" << fmt_double(h) << ": " << con.detail << '\n';
  return all ? kExitOk : kExitAcceptance;
}

std::vector<double> require_h_list(const RunArgs& r, const std::vector<double>& fallback) {
  const std::vector<double>& hs = r.h_list.empty() ? fallback : r.h_list;
  for (double h : hs)
    if (!(h > 0.0 && h <= 1.0)) throw ConfigError("step " + fmt_double(h) + " outside (0, 1]");
  return hs;
}

Vec initial_point(const std::string& text, std::size_t d) {
  Vec x0 = text.empty() ? Vec(d, 0.0) : parse_list(text);
  if (x0.size() != d) throw ConfigError("--x0 has the wrong dimension");
  return x0;
}

int cmd_strong_error(const ModelArgs& m, const RunArgs& r, double h_ref, double T, const std::string& x0_text) {
  const ModelSpec spec = resolve_model(m);
  const Calibration c = resolve_calibration(m, spec);
  const auto hs = require_h_list(r, {0x1p-6, 0x1p-7, 0x1p-8, 0x1p-9, 0x1p-10});
  for (double h : hs) apply_ceiling(h, c.hbar, "moment-bound", false);
  const StrongErrorCurve curve = strong_error_curve(spec.model, c.trunc, hs, h_ref, T,
                                                    initial_point(x0_text, spec.model.dim()),
                                                    r.paths ? r.paths : 1000, r.seed);
  std::unique_ptr<std::ofstream> f;
  std::ostream& out = open_out(r.out, f);
  out << "h,error,stderr\n";
  for (const auto& p : curve.points) out << fmt_double(p.h) << ',' << fmt_double(p.error) << ',' << fmt_double(p.se) << '\n';
  std::cerr << "log-log slope " << fmt_double(curve.slope) << '\n';
  return kExitOk;
}

int cmd_invariant(const ModelArgs& m, const RunArgs& r, double T, const std::string& x0_text) {
  const ModelSpec spec = resolve_model(m);
  const Calibration c = resolve_calibration(m, spec);
  const auto hs = require_h_list(r, {0x1p-2, 0x1p-3, 0x1p-4, 0x1p-5});
  for (double h : hs) apply_ceiling(h, c.hbar, "moment-bound", false);
  const InvariantError ie = invariant_measure_error(spec.model, c.trunc, hs, T,
                                                    initial_point(x0_text, spec.model.dim()),
                                                    r.paths ? r.paths : 4000, r.seed);
  std::unique_ptr<std::ofstream> f;
  std::ostream& out = open_out(r.out, f);
  out << "h,error,stderr\n";
  for (const auto& p : ie.points) out << fmt_double(p.h) << ',' << fmt_double(p.error) << ',' << fmt_double(p.se) << '\n';
  std::cerr << "log-log slope " << fmt_double(ie.slope) << '\n';
  return kExitOk;
}

ExperimentCommon common_from(const ModelArgs& m, const RunArgs& r) {
  ExperimentCommon c;
  c.out_dir = r.out.empty() ? "out" : r.out;
  c.seed = r.seed;
  c.timestamp = !r.no_timestamp;
  c.theta_bar = m.theta_bar;
  return c;
}

int report_bundle(const ArtifactBundle& b) {
  for (const auto& c : b.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  std::cout << b.files.size() << " files in " << b.dir << '\n';
  return b.pass() ? kExitOk : kExitAcceptance;
}

int cmd_example1(const ModelArgs& m, const RunArgs& r) {
  Example1Config cfg;
  cfg.common = common_from(m, r);
  if (r.paths) cfg.traj_paths = cfg.strong_paths = cfg.density_paths = r.paths;
  if (!r.h_list.empty()) cfg.density_h_list = r.h_list;
  return report_bundle(run_example1(cfg));
}

int cmd_example2(const ModelArgs& m, const RunArgs& r) {
  Example2Config cfg;
  cfg.common = common_from(m, r);
  if (r.paths) cfg.traj_paths = cfg.w1_paths = cfg.density_paths = r.paths;
  if (!r.h_list.empty()) cfg.density_h_list = r.h_list;
  // the density steps exceed hbar for the double well; run them as configured
  {
    const ModelSpec spec = builtin_model("double_well");
    CalibrationOptions opts;
    opts.theta_bar = m.theta_bar;
    const Calibration c = calibrate_full(spec.model, spec.diss, spec.growth, opts);
    for (double h : cfg.density_h_list) apply_ceiling(h, c.hbar, "moment-bound", false);
  }
  return report_bundle(run_example2(cfg));
}

int cmd_suite(std::uint64_t seed, const std::string& only, const std::string& json_path) {
  SuiteOptions opts;
  opts.seed = seed;
  if (!only.empty()) {
    std::vector<int> ids;
    for (double v : parse_list(only)) {
      const int id = static_cast<int>(v);
      if (id != v || id < 1 || id > kCriterionCount) throw ConfigError("criterion ids run 1.." + std::to_string(kCriterionCount));
      ids.push_back(id);
    }
    opts.only = ids;
  }
  const auto results = run_suite(opts);
  bool all = true;
  for (const auto& res : results) {
    std::cout << result_line(res) << '\n';
    all = all && res.pass;
  }
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw ConfigError("cannot write " + json_path);
    out << suite_json(results, seed) << '\n';
  }
  return all ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truncated Euler-Maruyama simulation, coupling checks and experiments"};
  // --h is the step size, so help is long-form only
  app.set_help_flag("--help", "print this help");
  app.set_config("--config", "", "key=value file with one [section] per subcommand");
  app.require_subcommand(1);
  app.fallthrough();

  ModelArgs m;
  RunArgs r;
  auto add_run = [&](CLI::App* sub, bool h, bool h_list, bool paths, bool steps) {
    add_model_options(sub, m);
    if (h) sub->add_option("--h", r.h, "step size");
    if (h_list) sub->add_option("--h-list", r.h_list, "step sizes")->delimiter(',');
    if (paths) sub->add_option("--paths", r.paths, "number of paths or draws");
    if (steps) sub->add_option("--steps", r.steps, "number of steps");
    sub->add_option("--seed", r.seed, "random seed")->capture_default_str();
    sub->add_option("--out", r.out, "output file or directory");
  };

  auto* calibrate = app.add_subcommand("calibrate", "print the calibration as key=value lines");
  std::string write_path;
  add_model_options(calibrate, m);
  calibrate->add_option("--write", write_path, "also save it to this file");

  auto* simulate = app.add_subcommand("simulate", "simulate a TEM ensemble and write checkpoint states");
  std::int64_t every = 0;
  std::string x0_text;
  add_run(simulate, true, false, true, true);
  simulate->add_option("--every", every, "checkpoint spacing in steps (default: final step only)");
  simulate->add_option("--x0", x0_text, "initial point a,b,...");

  auto* coupling = app.add_subcommand("coupling-check", "verify the one-step coupling on a grid of pairs");
  std::string r_text;
  double center = 0.0;
  add_run(coupling, true, false, true, false);
  coupling->add_option("--r-list", r_text, "pair distances, comma separated (default 0.01,0.1,1,H)");
  coupling->add_option("--center", center, "pairs are placed at center +- r/2 along the first axis");

  auto* strong = app.add_subcommand("strong-error", "strong error against a fine reference on shared noise");
  double h_ref = 0x1p-14, T_strong = 1.0;
  std::string x0_strong;
  add_run(strong, false, true, true, false);
  strong->add_option("--h-ref", h_ref, "reference step")->capture_default_str();
  strong->add_option("--T", T_strong, "horizon")->capture_default_str();
  strong->add_option("--x0", x0_strong, "initial point a,b,...");

  auto* invariant = app.add_subcommand("invariant", "W1 distance of the time-T law to the stationary law");
  double T_inv = 10.0;
  std::string x0_inv;
  add_run(invariant, false, true, true, false);
  invariant->add_option("--T", T_inv, "horizon")->capture_default_str();
  invariant->add_option("--x0", x0_inv, "initial point a,b,...");

  auto* ex1 = app.add_subcommand("example1", "2-D sin(2x) - x example: trajectories, strong error, densities");
  add_run(ex1, false, true, true, false);
  ex1->add_flag("--no-timestamp", r.no_timestamp, "omit the generated-at line");

  auto* ex2 = app.add_subcommand("example2", "double-well example: trajectories, W1, densities");
  add_run(ex2, false, true, true, false);
  ex2->add_flag("--no-timestamp", r.no_timestamp, "omit the generated-at line");

  auto* suite = app.add_subcommand("suite", "run the acceptance criteria");
  std::uint64_t suite_seed = SuiteOptions{}.seed;
  std::string only, json_path;
  suite->add_option("--seed", suite_seed, "suite seed")->capture_default_str();
  suite->add_option("--only", only, "criterion ids, comma separated");
  suite->add_option("--json", json_path, "write a JSON summary here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*calibrate) return cmd_calibrate(m, write_path);
    if (*simulate) return cmd_simulate(m, r, every, x0_text);
    if (*coupling) return cmd_coupling_check(m, r, r_text, center);
    if (*strong) return cmd_strong_error(m, r, h_ref, T_strong, x0_strong);
    if (*invariant) return cmd_invariant(m, r, T_inv, x0_inv);
    if (*ex1) return cmd_example1(m, r);
    if (*ex2) return cmd_example2(m, r);
    if (*suite) return cmd_suite(suite_seed, only, json_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
