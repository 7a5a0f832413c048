#include "tem/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/parallel.hpp"
#include "tem/rng.hpp"

namespace tem {

EmpiricalMeasure::EmpiricalMeasure(std::size_t dim, std::vector<double> flat) : dim_(dim), data_(std::move(flat)) {
  if (dim_ == 0) throw InputError("empirical measure needs dim >= 1");
  if (data_.empty()) throw InputError("empirical measure is empty");
  if (data_.size() % dim_ != 0) throw InputError("sample buffer is not a multiple of dim");
  for (double v : data_)
    if (!std::isfinite(v)) throw InputError("empirical measure has a non-finite sample");
}

EmpiricalMeasure EmpiricalMeasure::from_ensemble(const PathEnsemble& ens, std::size_t c) {
  return EmpiricalMeasure(ens.dim, ens.states.at(c));
}

double w1_1d(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != 1 || b.dim() != 1) throw InputError("w1_1d needs 1-D measures");
  std::vector<double> xs = a.flat(), ys = b.flat();
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  if (xs.size() == ys.size()) {
    NeumaierSum s;
    for (std::size_t i = 0; i < xs.size(); ++i) s.add(std::abs(xs[i] - ys[i]));
    return s.value() / static_cast<double>(xs.size());
  }
  // walk the merged support; both CDFs are constant between events
  const double na = static_cast<double>(xs.size()), nb = static_cast<double>(ys.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(xs[0], ys[0]);
  NeumaierSum s;
  while (i < xs.size() || j < ys.size()) {
    const double next = (j >= ys.size() || (i < xs.size() && xs[i] <= ys[j])) ? xs[i] : ys[j];
    s.add(std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev));
    while (i < xs.size() && xs[i] == next) ++i;
    while (j < ys.size() && ys[j] == next) ++j;
    prev = next;
  }
  return s.value();
}

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw InputError("cost matrix must be n x n");
  if (n == 0) return {};
  // shortest augmenting paths with row/column potentials, 1-based with a dummy column 0
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      const double* row = cost.data() + (i0 - 1) * n;
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assign(n);
  for (std::size_t j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

double w1_assignment(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() != b.dim()) throw InputError("w1_assignment: dimension mismatch");
  if (a.size() != b.size()) throw InputError("w1_assignment needs equal sample counts");
  const std::size_t n = a.size();
  if (n > kAssignmentCap)
    throw InputError("w1_assignment is capped at " + std::to_string(kAssignmentCap) +
                     " points; subsample or use w1_1d for 1-D data");
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = distance(a.point(i), b.point(j));
  const auto assign = solve_assignment(cost, n);
  NeumaierSum s;
  for (std::size_t i = 0; i < n; ++i) s.add(cost[i * n + assign[i]]);
  return s.value() / static_cast<double>(n);
}

double w1(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (a.dim() == 1 && b.dim() == 1) return w1_1d(a, b);
  return w1_assignment(a, b);
}

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

double ks_statistic(std::span<const double> xs, const Cdf& cdf) {
  if (xs.empty()) throw InputError("KS statistic of an empty sample");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double D = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double F = cdf(s[i]);
    D = std::max({D, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  return D;
}

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_pvalue(double D, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * D);
}

namespace {

constexpr double kGLx[5] = {0.14887433898163122, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845,
                            0.9739065285171717};
constexpr double kGLw[5] = {0.295524224714753, 0.2692667193099965, 0.219086362515982, 0.14945134915058036,
                            0.06667134430868807};

double gl10(const ScalarDrift& f, double a, double b) {
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += kGLw[i] * (f(c - r * kGLx[i]) + f(c + r * kGLx[i]));
  return s * r;
}

// distance from 0 at which log p has fallen 40 below its running maximum
double tail_extent(const ScalarDrift& drift, double coef, double dir) {
  double u = 0.0, lp = 0.0, best = 0.0;
  const double du = 0.25;
  while (true) {
    const double next = u + du;
    lp += coef * gl10(drift, dir * u, dir * next);
    u = next;
    if (!std::isfinite(lp)) throw NumericalError("stationary density: potential is not finite");
    best = std::max(best, lp);
    if (lp < best - 40.0) return u;
    if (u > 1e4) throw NumericalError("stationary density is not integrable within |u| <= 1e4");
  }
}

}  // namespace

StationaryDensity1D stationary_density_1d(const ScalarDrift& drift, double sigma, double step) {
  if (!(sigma != 0.0) || !std::isfinite(sigma)) throw InputError("sigma must be nonzero");
  if (!(step > 0.0)) throw InputError("grid step must be positive");
  const double coef = 2.0 / (sigma * sigma);
  const double left = -tail_extent(drift, coef, -1.0);
  const double right = tail_extent(drift, coef, 1.0);
  const std::size_t cells = static_cast<std::size_t>(std::ceil((right - left) / step));
  const double du = (right - left) / static_cast<double>(cells);

  std::vector<double> grid(cells + 1), lp(cells + 1), lmid(cells);
  for (std::size_t i = 0; i <= cells; ++i) grid[i] = left + du * static_cast<double>(i);
  grid[cells] = right;
  lp[0] = coef * gl10(drift, 0.0, left);
  for (std::size_t i = 0; i < cells; ++i) {
    const double mid = 0.5 * (grid[i] + grid[i + 1]);
    lmid[i] = lp[i] + coef * gl10(drift, grid[i], mid);
    lp[i + 1] = lmid[i] + coef * gl10(drift, mid, grid[i + 1]);
  }
  const double top = std::max(*std::max_element(lp.begin(), lp.end()), *std::max_element(lmid.begin(), lmid.end()));
  std::vector<double> mass(cells);
  NeumaierSum total;
  for (std::size_t i = 0; i < cells; ++i) {
    mass[i] = (grid[i + 1] - grid[i]) / 6.0 *
              (std::exp(lp[i] - top) + 4.0 * std::exp(lmid[i] - top) + std::exp(lp[i + 1] - top));
    total.add(mass[i]);
  }
  const double Z = total.value();
  if (!(Z > 0.0) || !std::isfinite(Z)) throw NumericalError("stationary density: normalization is not finite");

  StationaryDensity1D out;
  out.grid_ = std::move(grid);
  out.density_.resize(cells + 1);
  out.cdf_.resize(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) out.density_[i] = std::exp(lp[i] - top) / Z;
  NeumaierSum run;
  out.cdf_[0] = 0.0;
  for (std::size_t i = 0; i < cells; ++i) {
    run.add(mass[i]);
    out.cdf_[i + 1] = run.value() / Z;
  }
  out.cdf_[cells] = 1.0;
  return out;
}

double StationaryDensity1D::cdf(double u) const {
  if (u <= grid_.front()) return 0.0;
  if (u >= grid_.back()) return 1.0;
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), u) - grid_.begin()) - 1;
  const double t = (u - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return cdf_[i] + t * (cdf_[i + 1] - cdf_[i]);
}

double StationaryDensity1D::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
  if (p <= 0.0) return grid_.front();
  if (p >= 1.0) return grid_.back();
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), p) - cdf_.begin()) - 1;
  const double span = cdf_[i + 1] - cdf_[i];
  const double t = span > 0.0 ? (p - cdf_[i]) / span : 0.0;
  return grid_[i] + t * (grid_[i + 1] - grid_[i]);
}

double StationaryDensity1D::moment(int k) const {
  NeumaierSum s;
  for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
    const double a = std::pow(grid_[i], k) * density_[i];
    const double b = std::pow(grid_[i + 1], k) * density_[i + 1];
    s.add(0.5 * (a + b) * (grid_[i + 1] - grid_[i]));
  }
  return s.value();
}

void StationaryDensity1D::write_table(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << "u,density,cdf\n";
  for (std::size_t i = 0; i < grid_.size(); ++i)
    out << fmt_double(grid_[i]) << ',' << fmt_double(density_[i]) << ',' << fmt_double(cdf_[i]) << '\n';
}

namespace {

// G(t) = int_{grid0}^t F, exact for the piecewise-linear F
class CdfIntegral {
 public:
  explicit CdfIntegral(const StationaryDensity1D& ref) : ref_(ref), G_(ref.grid().size(), 0.0) {
    const auto& g = ref.grid();
    const auto& F = ref.cdf_vals();
    for (std::size_t i = 0; i + 1 < g.size(); ++i) G_[i + 1] = G_[i] + 0.5 * (F[i] + F[i + 1]) * (g[i + 1] - g[i]);
  }

  double operator()(double t) const {
    const auto& g = ref_.grid();
    const auto& F = ref_.cdf_vals();
    if (t <= g.front()) return 0.0;
    if (t >= g.back()) return G_.back() + (t - g.back());
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), t) - g.begin()) - 1;
    const double dt = t - g[i];
    const double slope = (F[i + 1] - F[i]) / (g[i + 1] - g[i]);
    return G_[i] + F[i] * dt + 0.5 * slope * dt * dt;
  }

  // int_a^b |c - F|, F nondecreasing so c - F changes sign once
  double abs_gap(double a, double b, double c) const {
    if (!(b > a)) return 0.0;
    const double star = c <= 0.0 ? -std::numeric_limits<double>::infinity()
                        : c >= 1.0 ? std::numeric_limits<double>::infinity()
                                   : ref_.quantile(c);
    auto below = [&](double lo, double hi) { return c * (hi - lo) - ((*this)(hi) - (*this)(lo)); };
    auto above = [&](double lo, double hi) { return ((*this)(hi) - (*this)(lo)) - c * (hi - lo); };
    if (b <= star) return below(a, b);
    if (a >= star) return above(a, b);
    return below(a, star) + above(star, b);
  }

 private:
  const StationaryDensity1D& ref_;
  std::vector<double> G_;
};

double w1_sorted_to_density(const std::vector<double>& s, const CdfIntegral& G, const StationaryDensity1D& ref) {
  const double n = static_cast<double>(s.size());
  const double lo = std::min(s.front(), ref.grid().front());
  const double hi = std::max(s.back(), ref.grid().back());
  NeumaierSum sum;
  sum.add(G.abs_gap(lo, s.front(), 0.0));
  for (std::size_t i = 0; i + 1 < s.size(); ++i) sum.add(G.abs_gap(s[i], s[i + 1], static_cast<double>(i + 1) / n));
  sum.add(G.abs_gap(s.back(), hi, 1.0));
  return sum.value();
}

}  // namespace

double w1_to_density(std::span<const double> xs, const StationaryDensity1D& ref) {
  if (xs.empty()) throw InputError("W1 of an empty sample");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const CdfIntegral G(ref);
  return w1_sorted_to_density(s, G, ref);
}

double w1_bootstrap_se(std::span<const double> xs, const StationaryDensity1D& ref, std::size_t B, std::uint64_t seed) {
  if (B < 2) throw InputError("bootstrap needs at least two replicates");
  const CdfIntegral G(ref);
  std::vector<double> reps(B);
  parallel_for(B, [&](std::size_t b) {
    RandomStream rng(seed, b);
    std::vector<double> s(xs.size());
    for (auto& v : s) v = xs[std::min(xs.size() - 1, static_cast<std::size_t>(rng.uniform() * xs.size()))];
    std::sort(s.begin(), s.end());
    reps[b] = w1_sorted_to_density(s, G, ref);
  });
  return mean_se(reps).se * std::sqrt(static_cast<double>(B));
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) throw InputError("line fit needs distinct abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

DecayCurve ergodicity_decay(const DriftModel& model, const TruncationParams& trunc, double h, const Vec& a,
                            const Vec& b, double T, std::size_t n_paths, std::uint64_t seed, std::int64_t every) {
  const std::int64_t n_steps = std::llround(T / h);
  EnsembleSpec spec;
  spec.n_paths = n_paths;
  spec.n_steps = n_steps;
  spec.checkpoints = checkpoint_grid(n_steps, every);
  spec.initial = {a};
  spec.seed = derive_seed(seed, 0);
  const PathEnsemble ea = simulate_ensemble(model, trunc, h, spec);
  spec.initial = {b};
  spec.seed = derive_seed(seed, 1);
  const PathEnsemble eb = simulate_ensemble(model, trunc, h, spec);

  DecayCurve out;
  for (std::size_t c = 0; c < spec.checkpoints.size(); ++c) {
    out.t.push_back(static_cast<double>(spec.checkpoints[c]) * h);
    out.w1.push_back(w1(EmpiricalMeasure::from_ensemble(ea, c), EmpiricalMeasure::from_ensemble(eb, c)));
  }
  std::vector<double> tail(out.w1.begin() + static_cast<std::ptrdiff_t>(out.w1.size() / 2), out.w1.end());
  std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2), tail.end());
  out.noise_floor = tail[tail.size() / 2];
  std::vector<double> ft, fl;
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    if (out.w1[i] > 3.0 * out.noise_floor) {
      ft.push_back(out.t[i]);
      fl.push_back(std::log(out.w1[i]));
    }
  }
  out.fit_points = ft.size();
  if (ft.size() >= 2) out.rate = -least_squares(ft, fl).slope;
  return out;
}

std::vector<EmpiricalMeasure> coupled_terminal_laws(const DriftModel& model, const TruncationParams& trunc,
                                                    const std::vector<double>& h_list, double h_ref, double T,
                                                    const Vec& x0, std::size_t n_paths, std::uint64_t seed) {
  if (h_list.empty()) throw InputError("h list is empty");
  if (x0.size() != model.dim()) throw InputError("initial point has wrong dimension");
  const std::int64_t n_ref = std::llround(T / h_ref);
  if (std::abs(static_cast<double>(n_ref) * h_ref - T) > 1e-9 * T) throw InputError("T must be a multiple of h_ref");
  std::vector<std::int64_t> ratio;
  for (double h : h_list) {
    const double q = h / h_ref;
    const std::int64_t r = std::llround(q);
    if (r < 1 || std::abs(q - static_cast<double>(r)) > 1e-9 * q)
      throw InputError("step " + fmt_double(h) + " is not an integer multiple of h_ref");
    if (n_ref % r != 0) throw InputError("T is not a multiple of step " + fmt_double(h));
    ratio.push_back(r);
  }
  const std::size_t d = model.dim();
  const std::size_t J = h_list.size();
  std::vector<TemStepper> steppers;
  for (double h : h_list) steppers.emplace_back(model, h, trunc);
  const TemStepper ref(model, h_ref, trunc);
  std::vector<std::vector<double>> out(J + 1, std::vector<double>(n_paths * d));

  parallel_for(n_paths, [&](std::size_t p) {
    RandomStream rng(seed, p);
    std::vector<Vec> xs(J, x0), acc(J, Vec(d, 0.0));
    Vec xr = x0, dw(d), scratch(d);
    project_to_ball(xr, ref.radius());
    for (std::size_t j = 0; j < J; ++j) project_to_ball(xs[j], steppers[j].radius());
    const double sh = std::sqrt(h_ref);
    for (std::int64_t k = 0; k < n_ref; ++k) {
      for (auto& w : dw) w = sh * rng.normal();
      ref.step(xr, dw, scratch, k);
      for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t i = 0; i < d; ++i) acc[j][i] += dw[i];
        if ((k + 1) % ratio[j] == 0) {
          steppers[j].step(xs[j], acc[j], scratch, (k + 1) / ratio[j] - 1);
          std::fill(acc[j].begin(), acc[j].end(), 0.0);
        }
      }
    }
    for (std::size_t j = 0; j < J; ++j) std::copy(xs[j].begin(), xs[j].end(), out[j].begin() + p * d);
    std::copy(xr.begin(), xr.end(), out[J].begin() + p * d);
  });
  std::vector<EmpiricalMeasure> laws;
  for (auto& v : out) laws.emplace_back(d, std::move(v));
  return laws;
}

StrongErrorCurve strong_error_curve(const DriftModel& model, const TruncationParams& trunc,
                                    const std::vector<double>& h_list, double h_ref, double T, const Vec& x0,
                                    std::size_t n_paths, std::uint64_t seed) {
  const auto laws = coupled_terminal_laws(model, trunc, h_list, h_ref, T, x0, n_paths, seed);
  const EmpiricalMeasure& ref = laws.back();
  StrongErrorCurve out;
  std::vector<double> lh, le;
  for (std::size_t j = 0; j < h_list.size(); ++j) {
    std::vector<double> err(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) err[p] = distance(laws[j].point(p), ref.point(p));
    const MeanSe ms = mean_se(err);
    out.points.push_back({h_list[j], ms.mean, ms.se});
    if (ms.mean > 0.0) {
      lh.push_back(std::log(h_list[j]));
      le.push_back(std::log(ms.mean));
    }
  }
  if (lh.size() >= 2) out.slope = least_squares(lh, le).slope;
  return out;
}

InvariantError invariant_measure_error(const DriftModel& model, const TruncationParams& trunc,
                                       const std::vector<double>& h_list, double T, const Vec& x0,
                                       std::size_t n_samples, std::uint64_t seed, std::size_t bootstrap) {
  if (h_list.empty()) throw InputError("h list is empty");
  std::vector<PathEnsemble> ens;
  for (std::size_t j = 0; j < h_list.size(); ++j) {
    EnsembleSpec spec;
    spec.n_paths = n_samples;
    spec.n_steps = std::llround(T / h_list[j]);
    spec.initial = {x0};
    spec.seed = derive_seed(seed, j);
    ens.push_back(simulate_ensemble(model, trunc, h_list[j], spec));
  }
  InvariantError out;
  std::vector<double> lh, le;
  if (model.dim() == 1) {
    const DriftModel* mp = &model;
    const ScalarDrift b = [mp](double u) {
      double o = 0.0;
      mp->eval(std::span<const double>(&u, 1), std::span<double>(&o, 1));
      return o;
    };
    const StationaryDensity1D ref = stationary_density_1d(b, model.sigma());
    for (std::size_t j = 0; j < h_list.size(); ++j) {
      const auto& xs = ens[j].states.back();
      const double e = w1_to_density(xs, ref);
      const double se = bootstrap >= 2 ? w1_bootstrap_se(xs, ref, bootstrap, derive_seed(seed, 1000 + j)) : 0.0;
      out.points.push_back({h_list[j], e, se});
    }
  } else {
    // no closed-form law in d > 1: compare against the smallest step
    const std::size_t fine = static_cast<std::size_t>(std::min_element(h_list.begin(), h_list.end()) - h_list.begin());
    const EmpiricalMeasure ref = EmpiricalMeasure::from_ensemble(ens[fine], ens[fine].checkpoints.size() - 1);
    for (std::size_t j = 0; j < h_list.size(); ++j) {
      if (j == fine) continue;
      out.points.push_back({h_list[j], w1_assignment(EmpiricalMeasure::from_ensemble(ens[j], 0), ref), 0.0});
    }
  }
  for (const auto& pt : out.points) {
    if (pt.error > 0.0) {
      lh.push_back(std::log(pt.h));
      le.push_back(std::log(pt.error));
    }
  }
  if (lh.size() >= 2) out.slope = least_squares(lh, le).slope;
  return out;
}

}  // namespace tem
