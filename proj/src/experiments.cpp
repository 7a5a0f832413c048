#include "tem/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tem/calibrate.hpp"
#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/measure.hpp"
#include "tem/rng.hpp"
#include "tem/scheme.hpp"

namespace tem {

namespace fs = std::filesystem;

bool ArtifactBundle::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const ExperimentCheck& c) { return c.pass; });
}

namespace {

std::string fmt(double v) { return fmt_double(v); }

std::string now_stamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

class Output {
 public:
  Output(const ExperimentCommon& common, const std::string& subdir, ArtifactBundle& bundle)
      : common_(common), bundle_(bundle) {
    bundle_.dir = (fs::path(common.out_dir) / subdir).string();
    std::error_code ec;
    fs::create_directories(bundle_.dir, ec);
    if (ec) throw ConfigError("cannot create " + bundle_.dir + ": " + ec.message());
  }

  std::ofstream open(const std::string& name, const std::string& header, const char* comment = "# ") {
    const std::string path = (fs::path(bundle_.dir) / name).string();
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    if (common_.timestamp && comment) out << comment << "generated " << now_stamp() << '\n';
    if (!header.empty()) out << header << '\n';
    bundle_.files.push_back(path);
    return out;
  }

  std::string path(const std::string& name) {
    const std::string p = (fs::path(bundle_.dir) / name).string();
    bundle_.files.push_back(p);
    return p;
  }

 private:
  const ExperimentCommon& common_;
  ArtifactBundle& bundle_;
};

std::int64_t steps_for(double T, double h) {
  const double q = T / h;
  const std::int64_t n = std::llround(q);
  if (std::abs(q - static_cast<double>(n)) > 1e-9 * q) throw ConfigError("T=" + fmt(T) + " is not a multiple of h=" + fmt(h));
  return n;
}

std::int64_t spacing_for(double dt, double h) {
  return std::max<std::int64_t>(1, std::llround(dt / h));
}

struct MeanCurve {
  std::vector<double> t;
  std::vector<MeanSe> v;
};

// E cos(|X_k|) at checkpoints
MeanCurve mean_cos_curve(const DriftModel& model, const TruncationParams& trunc, double h, double T, double dt,
                         const Vec& x0, std::size_t paths, std::uint64_t seed) {
  EnsembleSpec spec;
  spec.n_paths = paths;
  spec.n_steps = steps_for(T, h);
  spec.checkpoints = checkpoint_grid(spec.n_steps, spacing_for(dt, h));
  spec.initial = {x0};
  spec.seed = seed;
  const PathEnsemble ens = simulate_ensemble(model, trunc, h, spec);
  MeanCurve out;
  std::vector<double> vals(paths);
  for (std::size_t c = 0; c < ens.checkpoints.size(); ++c) {
    for (std::size_t p = 0; p < paths; ++p) vals[p] = std::cos(norm(ens.state(c, p)));
    out.t.push_back(static_cast<double>(ens.checkpoints[c]) * h);
    out.v.push_back(mean_se(vals));
  }
  return out;
}

PathEnsemble terminal_ensemble(const DriftModel& model, const TruncationParams& trunc, double h, double T,
                               const Vec& x0, std::size_t paths, std::uint64_t seed) {
  EnsembleSpec spec;
  spec.n_paths = paths;
  spec.n_steps = steps_for(T, h);
  spec.initial = {x0};
  spec.seed = seed;
  return simulate_ensemble(model, trunc, h, spec);
}

// all pairwise |a-b| <= 3 sqrt(se_a^2 + se_b^2) at the final checkpoint
ExperimentCheck agree_at_end(const std::string& name, const std::vector<MeanCurve>& curves) {
  ExperimentCheck chk{name, true, ""};
  double worst = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      const auto& a = curves[i].v.back();
      const auto& b = curves[j].v.back();
      const double z = std::abs(a.mean - b.mean) / std::max(std::hypot(a.se, b.se), 1e-300);
      worst = std::max(worst, z);
      chk.pass = chk.pass && z <= 3.0;
    }
  }
  chk.detail = "largest pairwise gap " + fmt(worst) + " SE at T=" + fmt(curves.front().t.back());
  return chk;
}

ExperimentCheck ks_check(const std::string& name, std::span<const double> xs, const StationaryDensity1D& ref) {
  const double D = ks_statistic(xs, [&](double u) { return ref.cdf(u); });
  const double crit = 1.63 / std::sqrt(static_cast<double>(xs.size()));
  return {name, D < crit, "KS D=" + fmt(D) + " vs 1% critical value " + fmt(crit)};
}

StationaryDensity1D density_of(const ScalarDrift& b, double sigma) { return stationary_density_1d(b, sigma); }

double silverman_bandwidth(std::span<const double> xs) {
  const MeanSe ms = mean_se(xs);
  const double sd = ms.se * std::sqrt(static_cast<double>(xs.size()));
  return 1.06 * sd * std::pow(static_cast<double>(xs.size()), -0.2);
}

double kde_at(std::span<const double> xs, double bw, double u) {
  double s = 0.0;
  for (double x : xs) s += std::exp(-0.5 * ((u - x) / bw) * ((u - x) / bw));
  return s / (static_cast<double>(xs.size()) * bw * std::sqrt(2.0 * std::numbers::pi));
}

double empirical_cdf(const std::vector<double>& sorted, double u) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), u) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

void check_h_list(const std::vector<double>& hs, const std::string& what) {
  if (hs.empty()) throw ConfigError(what + ": empty step list");
  for (double h : hs)
    if (!(h > 0.0 && h <= 1.0)) throw ConfigError(what + ": step " + fmt(h) + " outside (0, 1]");
}

CalibrationOptions options_for(const ExperimentCommon& c) {
  CalibrationOptions o;
  o.theta_bar = c.theta_bar;
  return o;
}

void check_common(const ExperimentCommon& c) {
  if (c.out_dir.empty()) throw ConfigError("output directory is empty");
  if (!(c.theta_bar > 0.0 && c.theta_bar < 0.5)) throw ConfigError("theta_bar must lie in (0, 1/2)");
}

nlohmann::json checks_json(const std::vector<ExperimentCheck>& checks) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : checks) j.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return j;
}

}  // namespace

void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series, bool logx, bool logy) {
  const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((logx && !(s.x[i] > 0)) || (logy && !(s.y[i] > 0))) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << (W - R + L) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    const double X = L + (W - L - R) * k / 4.0, Y = H - B - (H - T - B) * k / 4.0;
    char xl[32], yl[32];
    std::snprintf(xl, sizeof xl, logx ? "1e%.2g" : "%.3g", xv);
    std::snprintf(yl, sizeof yl, logy ? "1e%.2g" : "%.3g", yv);
    out << "<text x=\"" << X << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xl << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\">" << yl << "</text>\n";
  }
  out << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (H - B + T) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* col = colors[s % 6];
    out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if ((logx && !(series[s].x[i] > 0)) || (logy && !(series[s].y[i] > 0))) continue;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(series[s].x[i]), py(series[s].y[i]));
      out << buf;
    }
    out << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

void validate(const Example1Config& cfg) {
  check_common(cfg.common);
  if (cfg.initials.empty()) throw ConfigError("example1: no initial points");
  for (const auto& x : cfg.initials)
    if (x.size() != 2) throw ConfigError("example1: initial points are 2-D");
  check_h_list({cfg.traj_h}, "example1 trajectories");
  check_h_list(cfg.traj_h_list, "example1 trajectories");
  check_h_list(cfg.strong_h_list, "example1 strong error");
  check_h_list(cfg.density_h_list, "example1 densities");
  for (double h : cfg.strong_h_list)
    if (h < cfg.strong_h_ref) throw ConfigError("example1: strong-error steps must not be below h_ref");
  if (cfg.traj_paths == 0 || cfg.strong_paths == 0 || cfg.density_paths == 0)
    throw ConfigError("example1: path counts must be positive");
  if (!(cfg.traj_T > 0 && cfg.strong_T > 0 && cfg.density_T > 0 && cfg.traj_dt > 0))
    throw ConfigError("example1: times must be positive");
  for (double h : cfg.traj_h_list) steps_for(cfg.traj_T, h);
  steps_for(cfg.traj_T, cfg.traj_h);
  for (double h : cfg.density_h_list) steps_for(cfg.density_T, h);
  steps_for(cfg.strong_T, cfg.strong_h_ref);
}

void validate(const Example2Config& cfg) {
  check_common(cfg.common);
  if (cfg.initials.empty()) throw ConfigError("example2: no initial points");
  check_h_list(cfg.traj_h_list, "example2 trajectories");
  check_h_list(cfg.w1_h_list, "example2 W1");
  check_h_list(cfg.density_h_list, "example2 densities");
  for (double h : cfg.w1_h_list)
    if (h < cfg.w1_h_ref) throw ConfigError("example2: W1 steps must not be below h_ref");
  if (cfg.traj_paths == 0 || cfg.w1_paths == 0 || cfg.density_paths == 0)
    throw ConfigError("example2: path counts must be positive");
  if (!(cfg.traj_T > 0 && cfg.w1_T > 0 && cfg.density_T > 0 && cfg.traj_dt > 0))
    throw ConfigError("example2: times must be positive");
  for (double h : cfg.traj_h_list) steps_for(cfg.traj_T, h);
  for (double h : cfg.density_h_list) steps_for(cfg.density_T, h);
  steps_for(cfg.w1_T, cfg.w1_h_ref);
}

ArtifactBundle run_example1(const Example1Config& cfg) {
  validate(cfg);
  ArtifactBundle bundle;
  Output io(cfg.common, "example1", bundle);
  const ModelSpec spec = builtin_model("sin2");
  const DriftModel& model = spec.model;
  const Calibration calib = calibrate_full(model, spec.diss, spec.growth, options_for(cfg.common));
  const TruncationParams& trunc = calib.trunc;
  const std::uint64_t seed = cfg.common.seed;

  // trajectories of E cos |X| from each initial, then across h
  std::vector<MeanCurve> left;
  {
    auto out = io.open("fig1_left.csv", "t,x0,y0,mean_cos,stderr");
    for (std::size_t i = 0; i < cfg.initials.size(); ++i) {
      left.push_back(mean_cos_curve(model, trunc, cfg.traj_h, cfg.traj_T, cfg.traj_dt, cfg.initials[i], cfg.traj_paths,
                                    derive_seed(seed, 10 + i)));
      for (std::size_t k = 0; k < left.back().t.size(); ++k)
        out << fmt(left.back().t[k]) << ',' << fmt(cfg.initials[i][0]) << ',' << fmt(cfg.initials[i][1]) << ','
            << fmt(left.back().v[k].mean) << ',' << fmt(left.back().v[k].se) << '\n';
    }
  }
  bundle.checks.push_back(agree_at_end("fig1 stabilization across initials", left));
  {
    auto out = io.open("fig1_right.csv", "t,h,mean_cos,stderr");
    for (std::size_t j = 0; j < cfg.traj_h_list.size(); ++j) {
      const MeanCurve c = mean_cos_curve(model, trunc, cfg.traj_h_list[j], cfg.traj_T, cfg.traj_dt, cfg.initials[0],
                                         cfg.traj_paths, derive_seed(seed, 20 + j));
      for (std::size_t k = 0; k < c.t.size(); ++k)
        out << fmt(c.t[k]) << ',' << fmt(cfg.traj_h_list[j]) << ',' << fmt(c.v[k].mean) << ',' << fmt(c.v[k].se)
            << '\n';
    }
  }
  {
    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < left.size(); ++i) {
      PlotSeries s{"(" + fmt(cfg.initials[i][0]) + ", " + fmt(cfg.initials[i][1]) + ")", left[i].t, {}};
      for (const auto& v : left[i].v) s.y.push_back(v.mean);
      series.push_back(std::move(s));
    }
    write_svg_plot(io.path("fig1_left.svg"), "E cos|X_k|, h = " + fmt(cfg.traj_h), "t", "E cos|X|", series);
  }

  // strong error against a fine reference on the same Brownian paths
  StrongErrorCurve sc;
  {
    sc = strong_error_curve(model, trunc, cfg.strong_h_list, cfg.strong_h_ref, cfg.strong_T, cfg.initials[0],
                            cfg.strong_paths, derive_seed(seed, 30));
    auto out = io.open("fig2_strong_error.csv", "h,error,stderr");
    for (const auto& p : sc.points) out << fmt(p.h) << ',' << fmt(p.error) << ',' << fmt(p.se) << '\n';
    bundle.checks.push_back({"fig2 strong-error slope >= 0.4", sc.slope >= 0.4, "slope " + fmt(sc.slope)});
  }

  // stationary marginals: both derived from the drift
  const StationaryDensity1D px = density_of(model.coordinate(0), model.sigma());
  const StationaryDensity1D py = density_of(model.coordinate(1), model.sigma());
  px.write_table(io.path("density_x.csv"));
  py.write_table(io.path("density_y.csv"));
  {
    auto joint = io.open("fig3_joint_density.csv", "h,x,y,density");
    auto marg = io.open("fig4_marginal_cdf.csv", "h,coordinate,u,empirical_cdf,analytic_cdf");
    const int bins = 40;
    const double lo = -3.0, hi = 3.0, bw = (hi - lo) / bins;
    for (std::size_t j = 0; j < cfg.density_h_list.size(); ++j) {
      const double h = cfg.density_h_list[j];
      const PathEnsemble ens = terminal_ensemble(model, trunc, h, cfg.density_T, cfg.initials[0], cfg.density_paths,
                                                 derive_seed(seed, 40 + j));
      std::vector<double> counts(bins * bins, 0.0);
      for (std::size_t p = 0; p < ens.n_paths; ++p) {
        const auto s = ens.state(0, p);
        const int bx = static_cast<int>(std::floor((s[0] - lo) / bw));
        const int by = static_cast<int>(std::floor((s[1] - lo) / bw));
        if (bx >= 0 && bx < bins && by >= 0 && by < bins) counts[by * bins + bx] += 1.0;
      }
      for (int by = 0; by < bins; ++by)
        for (int bx = 0; bx < bins; ++bx)
          joint << fmt(h) << ',' << fmt(lo + (bx + 0.5) * bw) << ',' << fmt(lo + (by + 0.5) * bw) << ','
                << fmt(counts[by * bins + bx] / (static_cast<double>(ens.n_paths) * bw * bw)) << '\n';
      for (int c = 0; c < 2; ++c) {
        std::vector<double> xs = ens.coordinate(0, c);
        std::sort(xs.begin(), xs.end());
        const StationaryDensity1D& ref = c == 0 ? px : py;
        for (int k = 0; k <= 200; ++k) {
          const double u = lo + (hi - lo) * k / 200.0;
          marg << fmt(h) << ',' << (c == 0 ? "x" : "y") << ',' << fmt(u) << ',' << fmt(empirical_cdf(xs, u)) << ','
               << fmt(ref.cdf(u)) << '\n';
        }
        if (j + 1 == cfg.density_h_list.size())
          bundle.checks.push_back(ks_check(std::string("fig4 ") + (c == 0 ? "x" : "y") + "-marginal KS at h=" + fmt(h),
                                           xs, ref));
      }
    }
  }

  nlohmann::json meta;
  meta["experiment"] = "example1";
  meta["model"] = "sin2: dx = (sin 2x - x) dt + dB1, dy = -y dt + dB2";
  meta["seed"] = seed;
  meta["M"] = trunc.M;
  meta["theta"] = trunc.theta;
  meta["hbar"] = calib.hbar.value();
  meta["strong_error_slope"] = sc.slope;
  meta["desk_scaling"] = {
      {"strong_error_T", {{"reference_scale", 32}, {"used", cfg.strong_T}}},
      {"strong_error_h_ref", {{"reference_scale", "2^-17"}, {"used", cfg.strong_h_ref}}},
      {"strong_error_paths", {{"reference_scale", 1000}, {"used", cfg.strong_paths}}},
  };
  meta["notes"] = {
      "the y-coordinate has drift -y, so its stationary law is Gaussian with density proportional to exp(-u^2); "
      "exp(u^2 - u^4/2)/Z is the double-well law and is not used for y",
      "densities are derived from the drift through p(u) proportional to exp(2/sigma^2 int_0^u b)"};
  meta["checks"] = checks_json(bundle.checks);
  if (cfg.common.timestamp) meta["generated"] = now_stamp();
  io.open("metadata.json", "", nullptr) << meta.dump(2) << '\n';

  auto py_script = io.open("plot.py", "", "# ");
  py_script << R"PY(import pandas as pd
import matplotlib.pyplot as plt

left = pd.read_csv("fig1_left.csv", comment="#")
right = pd.read_csv("fig1_right.csv", comment="#")
fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for (x0, y0), g in left.groupby(["x0", "y0"]):
    ax[0].plot(g.t, g.mean_cos, label=f"({x0}, {y0})")
for h, g in right.groupby("h"):
    ax[1].plot(g.t, g.mean_cos, label=f"h={h:g}")
for a in ax:
    a.set_xlabel("t"); a.set_ylabel("E cos|X|"); a.legend()
fig.savefig("fig1.png", dpi=150)

se = pd.read_csv("fig2_strong_error.csv", comment="#")
plt.figure()
plt.loglog(se.h, se.error, "o-", label="strong error")
plt.loglog(se.h, se.error.iloc[0] * (se.h / se.h.iloc[0]) ** 0.5, "k--", label="slope 1/2")
plt.xlabel("h"); plt.legend(); plt.savefig("fig2.png", dpi=150)

m = pd.read_csv("fig4_marginal_cdf.csv", comment="#")
fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for i, c in enumerate(["x", "y"]):
    sub = m[m.coordinate == c]
    for h, g in sub.groupby("h"):
        ax[i].plot(g.u, g.empirical_cdf, label=f"h={h:g}")
    g = sub[sub.h == sub.h.iloc[0]]
    ax[i].plot(g.u, g.analytic_cdf, "k--", label="stationary")
    ax[i].set_title(c); ax[i].legend()
fig.savefig("fig4.png", dpi=150)
)PY";
  return bundle;
}

ArtifactBundle run_example2(const Example2Config& cfg) {
  validate(cfg);
  ArtifactBundle bundle;
  Output io(cfg.common, "example2", bundle);
  const ModelSpec spec = builtin_model("double_well");
  const DriftModel& model = spec.model;
  const Calibration calib = calibrate_full(model, spec.diss, spec.growth, options_for(cfg.common));
  const TruncationParams& trunc = calib.trunc;
  const std::uint64_t seed = cfg.common.seed;

  // E cos X_k from each initial and step
  std::vector<PlotSeries> fig5_series;
  {
    auto out = io.open("fig5_mean_cos.csv", "t,x0,h,mean_cos,stderr");
    for (std::size_t j = 0; j < cfg.traj_h_list.size(); ++j) {
      std::vector<MeanCurve> curves;
      for (std::size_t i = 0; i < cfg.initials.size(); ++i) {
        curves.push_back(mean_cos_curve(model, trunc, cfg.traj_h_list[j], cfg.traj_T, cfg.traj_dt,
                                        Vec{cfg.initials[i]}, cfg.traj_paths, derive_seed(seed, 100 + 10 * j + i)));
        const auto& c = curves.back();
        for (std::size_t k = 0; k < c.t.size(); ++k)
          out << fmt(c.t[k]) << ',' << fmt(cfg.initials[i]) << ',' << fmt(cfg.traj_h_list[j]) << ','
              << fmt(c.v[k].mean) << ',' << fmt(c.v[k].se) << '\n';
        PlotSeries s{"x0=" + fmt(cfg.initials[i]) + " h=" + fmt(cfg.traj_h_list[j]), c.t, {}};
        for (const auto& v : c.v) s.y.push_back(v.mean);
        fig5_series.push_back(std::move(s));
      }
      bundle.checks.push_back(agree_at_end("fig5 common limit at h=" + fmt(cfg.traj_h_list[j]), curves));
    }
  }

  // W1 between each step's law at T and the fine reference law, same Brownian paths
  std::vector<ErrorPoint> w1pts;
  {
    const auto laws = coupled_terminal_laws(model, trunc, cfg.w1_h_list, cfg.w1_h_ref, cfg.w1_T, Vec{cfg.w1_x0},
                                            cfg.w1_paths, derive_seed(seed, 200));
    const auto& ref = laws.back();
    for (std::size_t j = 0; j < cfg.w1_h_list.size(); ++j) {
      const double e = w1_1d(laws[j], ref);
      // paired bootstrap over path indices
      std::vector<double> reps(200);
      for (std::size_t b = 0; b < reps.size(); ++b) {
        RandomStream rng(derive_seed(seed, 300 + j), b);
        std::vector<double> xa(cfg.w1_paths), xr(cfg.w1_paths);
        for (std::size_t p = 0; p < cfg.w1_paths; ++p) {
          const auto idx = std::min(cfg.w1_paths - 1, static_cast<std::size_t>(rng.uniform() * cfg.w1_paths));
          xa[p] = laws[j].point(idx)[0];
          xr[p] = ref.point(idx)[0];
        }
        reps[b] = w1_1d(EmpiricalMeasure::from_1d(xa), EmpiricalMeasure::from_1d(xr));
      }
      w1pts.push_back({cfg.w1_h_list[j], e, mean_se(reps).se * std::sqrt(static_cast<double>(reps.size()))});
    }
    auto out = io.open("fig6_w1.csv", "h,error,stderr");
    for (const auto& p : w1pts) out << fmt(p.h) << ',' << fmt(p.error) << ',' << fmt(p.se) << '\n';
    std::vector<ErrorPoint> by_h = w1pts;
    std::sort(by_h.begin(), by_h.end(), [](const ErrorPoint& a, const ErrorPoint& b) { return a.h > b.h; });
    bool mono = true;
    for (std::size_t j = 1; j < by_h.size(); ++j)
      mono = mono && by_h[j].error <= by_h[j - 1].error + 2.0 * std::hypot(by_h[j].se, by_h[j - 1].se);
    std::string detail = "W1 at T=" + fmt(cfg.w1_T) + ":";
    for (const auto& p : by_h) detail += " " + fmt(p.error);
    bundle.checks.push_back({"fig6 W1 decreases with h (2 SE)", mono, detail});
    PlotSeries s{"W1 to reference", {}, {}};
    for (const auto& p : by_h) {
      s.x.push_back(p.h);
      s.y.push_back(p.error);
    }
    write_svg_plot(io.path("fig6_w1.svg"), "W1 at T = " + fmt(cfg.w1_T), "h", "W1", {s}, true, true);
  }

  // empirical CDFs and kernel densities against the stationary law
  const StationaryDensity1D ref = density_of(model.coordinate(0), model.sigma());
  ref.write_table(io.path("density.csv"));
  {
    auto cdf_out = io.open("fig7_cdf.csv", "h,u,empirical_cdf,analytic_cdf");
    auto kde_out = io.open("fig7_kde.csv", "h,u,kde,analytic_density");
    for (std::size_t j = 0; j < cfg.density_h_list.size(); ++j) {
      const double h = cfg.density_h_list[j];
      const PathEnsemble ens = terminal_ensemble(model, trunc, h, cfg.density_T, Vec{cfg.density_x0},
                                                 cfg.density_paths, derive_seed(seed, 400 + j));
      std::vector<double> xs = ens.coordinate(0, 0);
      std::sort(xs.begin(), xs.end());
      const double bw = silverman_bandwidth(xs);
      for (int k = 0; k <= 200; ++k) {
        const double u = -2.5 + 5.0 * k / 200.0;
        const double dens = (ref.cdf(u + 1e-4) - ref.cdf(u - 1e-4)) / 2e-4;
        cdf_out << fmt(h) << ',' << fmt(u) << ',' << fmt(empirical_cdf(xs, u)) << ',' << fmt(ref.cdf(u)) << '\n';
        kde_out << fmt(h) << ',' << fmt(u) << ',' << fmt(kde_at(xs, bw, u)) << ',' << fmt(dens) << '\n';
      }
      if (h == *std::min_element(cfg.density_h_list.begin(), cfg.density_h_list.end()))
        bundle.checks.push_back(ks_check("fig7 KS at h=" + fmt(h), xs, ref));
    }
  }
  write_svg_plot(io.path("fig5_mean_cos.svg"), "E cos X_k", "t", "E cos X", fig5_series);

  nlohmann::json meta;
  meta["experiment"] = "example2";
  meta["model"] = "double_well: dx = (x - x^3) dt + dB";
  meta["seed"] = seed;
  meta["M"] = trunc.M;
  meta["theta"] = trunc.theta;
  meta["hbar"] = calib.hbar.value();
  meta["desk_scaling"] = {
      {"w1_reference", {{"reference_scale", "exact solution law at T"}, {"used", "TEM law at h_ref on shared Brownian paths"}}},
      {"w1_h_ref", cfg.w1_h_ref},
  };
  meta["notes"] = nlohmann::json::array();
  for (double h : cfg.density_h_list)
    if (h > calib.hbar.value())
      meta["notes"].push_back("density step " + fmt(h) + " exceeds the moment-bound ceiling hbar=" +
                              fmt(calib.hbar.value()) + "; run as configured");
  meta["checks"] = checks_json(bundle.checks);
  if (cfg.common.timestamp) meta["generated"] = now_stamp();
  io.open("metadata.json", "", nullptr) << meta.dump(2) << '\n';

  auto py_script = io.open("plot.py", "", "# ");
  py_script << R"PY(import pandas as pd
import matplotlib.pyplot as plt

m = pd.read_csv("fig5_mean_cos.csv", comment="#")
plt.figure()
for (x0, h), g in m.groupby(["x0", "h"]):
    plt.plot(g.t, g.mean_cos, label=f"x0={x0:g}, h={h:g}")
plt.xlabel("t"); plt.ylabel("E cos X"); plt.legend(); plt.savefig("fig5.png", dpi=150)

w = pd.read_csv("fig6_w1.csv", comment="#")
plt.figure()
plt.errorbar(w.h, w.error, yerr=w.stderr, fmt="o-")
plt.xscale("log"); plt.yscale("log"); plt.xlabel("h"); plt.ylabel("W1"); plt.savefig("fig6.png", dpi=150)

c = pd.read_csv("fig7_cdf.csv", comment="#")
k = pd.read_csv("fig7_kde.csv", comment="#")
fig, ax = plt.subplots(1, 2, figsize=(11, 4))
for h, g in c.groupby("h"):
    ax[0].plot(g.u, g.empirical_cdf, label=f"h={h:g}")
for h, g in k.groupby("h"):
    ax[1].plot(g.u, g.kde, label=f"h={h:g}")
g = c[c.h == c.h.iloc[0]]
ax[0].plot(g.u, g.analytic_cdf, "k--", label="stationary")
g = k[k.h == k.h.iloc[0]]
ax[1].plot(g.u, g.analytic_density, "k--", label="stationary")
ax[0].legend(); ax[1].legend()
fig.savefig("fig7.png", dpi=150)
)PY";
  return bundle;
}

}  // namespace tem
