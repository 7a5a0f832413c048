#include "tem/distfn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/quadrature.hpp"  // log_add_exp

namespace tem {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Integrands below exp(-kCut) of their peak are dropped.
constexpr double kCut = 40.0;
// phi-layer family spans a*(u^2+2u) in [0, 800]; past that phi < 1e-347.
constexpr double kPhiLayerSpan = 800.0;
// rho-layer family spans 50 units of log I below log I(r1).
constexpr double kRhoLayerSpan = 50.0;

double rate_of(const DistanceParams& p) { return (2.0 * p.L + 1.0) / (2.0 * p.c3); }

void validate(const DistanceParams& p) {
  if (!(p.L > 0.0) || !(p.c3 > 0.0) || !(p.r1 > 0.0) || !std::isfinite(p.L) || !std::isfinite(p.c3) ||
      !std::isfinite(p.r1))
    throw InputError("distance function needs L > 0, c3 > 0, r1 > 0");
}

std::vector<double> make_grid(double a, double r1, std::size_t n) {
  std::vector<double> pts;
  pts.reserve(3 * n + 4);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i <= n; ++i) pts.push_back(r1 * static_cast<double>(i) / dn);
  for (std::size_t j = 1; j <= n; ++j) {
    const double s = static_cast<double>(j) / dn;
    const double t = kPhiLayerSpan * s * s / a;
    const double u = t / (1.0 + std::sqrt(1.0 + t));  // sqrt(1+t)-1 without cancellation
    if (u < r1) pts.push_back(u);
  }
  const double g1 = 2.0 * a * (r1 + 1.0);
  for (std::size_t j = 1; j <= n; ++j) {
    const double u = r1 - kRhoLayerSpan * static_cast<double>(j) / dn / g1;
    if (u > 0.0) pts.push_back(u);
  }
  if (1.0 < r1) pts.push_back(1.0);
  std::sort(pts.begin(), pts.end());
  std::vector<double> grid;
  grid.reserve(pts.size());
  for (double u : pts) {
    if (!grid.empty() && u - grid.back() <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, u))
      continue;
    grid.push_back(u);
  }
  if (grid.back() != r1) {
    if (r1 - grid.back() <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, r1))
      grid.back() = r1;
    else
      grid.push_back(r1);
  }
  return grid;
}

struct Neumaier {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// 10-point Gauss-Legendre on [-1, 1].
constexpr double kGLx[5] = {0.14887433898163122, 0.4333953941292472, 0.6794095682990244, 0.8650633666889845,
                            0.9739065285171717};
constexpr double kGLw[5] = {0.295524224714753, 0.2692667193099965, 0.219086362515982, 0.14945134915058036,
                            0.06667134430868807};

// Composite 10-point Gauss-Legendre with `pieces` equal panels. Callers pick
// pieces so the integrand's exponent moves by about 1 per panel.
template <class F>
double gl_composite(F&& f, double lo, double hi, int pieces) {
  if (!(hi > lo)) return 0.0;
  const double w = (hi - lo) / pieces;
  double total = 0.0;
  for (int p = 0; p < pieces; ++p) {
    const double c = lo + (p + 0.5) * w;
    const double r = 0.5 * w;
    double sum = 0.0;
    for (int k = 0; k < 5; ++k) sum += kGLw[k] * (f(c - r * kGLx[k]) + f(c + r * kGLx[k]));
    total += r * sum;
  }
  return total;
}

int pieces_for(double exponent_change) {
  return static_cast<int>(std::clamp(std::ceil(std::abs(exponent_change)), 1.0, 256.0));
}

std::size_t interval_of(const std::vector<double>& grid, double u) {
  auto it = std::upper_bound(grid.begin(), grid.end(), u);
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  return i == 0 ? 0 : std::min(i - 1, grid.size() - 2);
}

}  // namespace

double log_concave_weight(double u, const DistanceParams& p) {
  if (u < 0.0) throw InputError("concave_weight: u must be nonnegative");
  const double v = std::min(u, p.r1);
  return -rate_of(p) * v * (v + 2.0);
}

double concave_weight(double u, const DistanceParams& p) { return std::exp(log_concave_weight(u, p)); }

DistanceFunction build_once(const DistanceParams& p, std::size_t n, const DistanceOptions& opts) {
  DistanceFunction df;
  df.params_ = p;
  df.family_points_ = n;
  const double a = rate_of(p);
  const double r1 = p.r1;
  df.a_ = a;
  df.log_phi_r1_ = -a * r1 * (r1 + 2.0);
  df.grid_ = make_grid(a, r1, n);
  const auto& g = df.grid_;
  const std::size_t np = g.size();
  const std::size_t last = np - 1;

  df.log_phi_.resize(np);
  for (std::size_t i = 0; i < np; ++i) df.log_phi_[i] = -a * g[i] * (g[i] + 2.0);

  // Phi: phi(s)/phi(u_i) = exp(-a (s-u_i)(s+u_i+2)) on each interval.
  std::vector<double> log_dPhi(last), log_jPhi(last);
  df.Phi_.assign(np, 0.0);
  {
    Neumaier acc;
    for (std::size_t i = 0; i < last; ++i) {
      const double ui = g[i];
      // phi(s)/phi(u_i) <= exp(-2a(1+u_i)(s-u_i)); past kCut that is negligible.
      const double hi = std::min(g[i + 1], ui + kCut / (2.0 * a * (1.0 + ui)));
      const double j = gl_composite([&](double s) { return std::exp(-a * (s - ui) * (s + ui + 2.0)); }, ui, hi,
                                    pieces_for(a * (hi - ui) * (hi + ui + 2.0)));
      log_jPhi[i] = std::log(j);
      log_dPhi[i] = df.log_phi_[i] + log_jPhi[i];
      acc.add(std::exp(log_dPhi[i]));
      df.Phi_[i + 1] = acc.value();
    }
  }

  // Phi(t) for t in [1, r1+1]: monotone cubic Hermite with exact slopes phi.
  auto Phi_at = [&](double t) {
    if (t >= r1) return df.Phi_[last] + (t - r1) * std::exp(df.log_phi_r1_);
    const std::size_t i = interval_of(g, t);
    const double h = g[i + 1] - g[i];
    const double s = (t - g[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double v = (2 * s3 - 3 * s2 + 1) * df.Phi_[i] + (s3 - 2 * s2 + s) * h * std::exp(df.log_phi_[i]) +
                     (-2 * s3 + 3 * s2) * df.Phi_[i + 1] + (s3 - s2) * h * std::exp(df.log_phi_[i + 1]);
    return std::clamp(v, df.Phi_[i], df.Phi_[i + 1]);
  };

  // I(u) = int_0^u Phi(s+1)/(c3 phi(s)) ds, integrated interval by interval
  // relative to the integrand's value at the right end (it is increasing).
  // log I is kept minus shift = a r1 (r1+2), so near r1 it is O(1) and its
  // rounding does not scale with a r1^2.
  const double shift = a * r1 * (r1 + 2.0);
  std::vector<double> log_gmax(last);
  df.log_I_.assign(np, kNegInf);
  for (std::size_t i = 0; i < last; ++i) {
    const double ui = g[i], uj = g[i + 1];
    const double Phi_j = Phi_at(uj + 1.0);
    log_gmax[i] = std::log(Phi_j) - std::log(p.c3) + a * (uj - r1) * (uj + r1 + 2.0);
    const double lo = std::max(ui, uj - kCut / (2.0 * a * (1.0 + ui)));
    const double j =
        gl_composite([&](double s) { return Phi_at(s + 1.0) / Phi_j * std::exp(a * (s - uj) * (s + uj + 2.0)); },
                     lo, uj, pieces_for(a * (lo - uj) * (lo + uj + 2.0)));
    df.log_I_[i + 1] = log_add_exp(df.log_I_[i], log_gmax[i] + std::log(j));
  }
  const double log_I_r1 = df.log_I_[last];
  if (!std::isfinite(log_I_r1)) throw CalibrationError("distance function: integral defining c* is not finite");
  df.cstar_ = LogReal::from_log(-std::log(4.0) - log_I_r1 - shift);

  df.rho_.resize(np);
  for (std::size_t i = 0; i < np; ++i) df.rho_[i] = 1.0 - 0.5 * std::exp(df.log_I_[i] - log_I_r1);

  // f increments. Where rho differs from 1, swap the order of integration:
  //   int phi I = I(u_i) dPhi + int e^g(v) (Phi(u_j) - Phi(v)) dv,
  // which needs only single integrals. rho >= 1/2 keeps the difference benign.
  df.log_df_.resize(last);
  df.f_.assign(np, 0.0);
  {
    Neumaier acc;
    for (std::size_t i = 0; i < last; ++i) {
      const double ui = g[i], uj = g[i + 1];
      if (1.0 - df.rho_[i + 1] < 1e-18) {
        df.log_df_[i] = log_dPhi[i];
      } else {
        // (Phi(u_j) - Phi(v)) / phi(u_i).
        auto tail = [&](double v) {
          return gl_composite([&](double s) { return std::exp(-a * (s - ui) * (s + ui + 2.0)); }, v, uj,
                              pieces_for(a * (uj - v) * (uj + v + 2.0)));
        };
        const double Phi_j = Phi_at(uj + 1.0);
        const double lo = std::max(ui, uj - kCut / (2.0 * a * (1.0 + ui)));
        const double j = gl_composite(
            [&](double v) { return Phi_at(v + 1.0) / Phi_j * std::exp(a * (v - uj) * (v + uj + 2.0)) * tail(v); },
            lo, uj, pieces_for(a * (lo - uj) * (lo + uj + 2.0)));
        const double head = 1.0 - 0.5 * std::exp(df.log_I_[i] - log_I_r1);
        const double cross = 0.5 * std::exp(log_gmax[i] - log_I_r1 - log_jPhi[i]) * j;
        df.log_df_[i] = log_dPhi[i] + std::log(head - cross);
      }
      acc.add(std::exp(df.log_df_[i]));
      df.f_[i + 1] = acc.value();
    }
  }

  // Invariants, checked where possible in log space.
  auto fail = [](const std::string& what) { throw CalibrationError("distance function: " + what); };
  for (std::size_t i = 0; i < last; ++i)
    if (!(df.log_phi_[i + 1] < df.log_phi_[i])) fail("phi is not strictly decreasing");
  if (df.rho_[0] != 1.0 || df.rho_[last] != 0.5) fail("rho endpoints are not 1 and 1/2");
  for (std::size_t i = 0; i < np; ++i) {
    if (!(df.rho_[i] >= 0.5 && df.rho_[i] <= 1.0)) fail("rho left [1/2, 1]");
    if (i > 0 && df.rho_[i] > df.rho_[i - 1]) fail("rho increased");
  }
  double prev_slope = 0.0;
  for (std::size_t i = 0; i < last; ++i) {
    if (!std::isfinite(df.log_df_[i])) fail("f is not strictly increasing");
    const double log_slope = df.log_df_[i] - std::log(g[i + 1] - g[i]);
    if (log_slope > 1e-12) fail("difference quotient of f exceeds 1");
    if (i > 0 && log_slope > prev_slope + 1e-9) fail("difference quotients of f increase (not concave)");
    prev_slope = log_slope;
  }
  for (std::size_t i = 1; i + 1 < np; ++i) {
    const double w = (g[i] - g[i - 1]) / (g[i + 1] - g[i - 1]);
    const double chord = (1.0 - w) * df.f_[i - 1] + w * df.f_[i + 1];
    if (df.f_[i] < chord - opts.concavity_tol) fail("second difference of f is positive");
  }
  for (std::size_t i = 1; i < np; ++i) {
    if (df.f_[i] > df.Phi_[i] * (1.0 + 1e-12)) fail("f exceeds Phi");
    if (df.Phi_[i] > g[i] * (1.0 + 1e-12)) fail("Phi exceeds u");
    if (std::log(df.f_[i]) < df.log_phi_r1_ - std::log(2.0) + std::log(g[i]) - 1e-12)
      fail("f is below phi(r1) u / 2");
  }
  return df;
}

DistanceFunction DistanceFunction::build(const DistanceParams& params, const DistanceOptions& opts) {
  validate(params);
  std::size_t n = opts.base_points;
  DistanceFunction coarse = build_once(params, n, opts);
  while (2 * n <= opts.max_points) {
    n *= 2;
    DistanceFunction fine = build_once(params, n, opts);
    bool agree = std::abs(fine.cstar_.log() - coarse.cstar_.log()) <= opts.refine_tol;
    for (std::size_t i = 1; agree && i < coarse.grid_.size(); ++i) {
      const double u = coarse.grid_[i];
      agree = std::abs(fine.f(u) - coarse.f_[i]) <= opts.refine_tol * coarse.f_[i] &&
              std::abs(fine.Phi(u) - coarse.Phi_[i]) <= opts.refine_tol * coarse.Phi_[i] &&
              std::abs(fine.rho(u) - coarse.rho_[i]) <= opts.refine_tol;
    }
    if (agree) return fine;
    coarse = std::move(fine);
  }
  throw CalibrationError("distance function: grid refinement did not converge");
}

double DistanceFunction::Phi(double u) const {
  if (u < 0.0) throw InputError("Phi: u must be nonnegative");
  if (u >= r1()) return Phi_.back() + (u - r1()) * std::exp(log_phi_r1_);
  const std::size_t i = interval_of(grid_, u);
  const double h = grid_[i + 1] - grid_[i];
  const double s = (u - grid_[i]) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double v = (2 * s3 - 3 * s2 + 1) * Phi_[i] + (s3 - 2 * s2 + s) * h * std::exp(log_phi_[i]) +
                   (-2 * s3 + 3 * s2) * Phi_[i + 1] + (s3 - s2) * h * std::exp(log_phi_[i + 1]);
  return std::clamp(v, Phi_[i], Phi_[i + 1]);
}

double DistanceFunction::rho(double u) const {
  if (u < 0.0) throw InputError("rho: u must be nonnegative");
  if (u >= r1()) return 0.5;
  const std::size_t i = interval_of(grid_, u);
  const double t = (u - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return rho_[i] + t * (rho_[i + 1] - rho_[i]);
}

double DistanceFunction::f(double u) const {
  if (!(u >= 0.0)) throw InputError("eval_f: u must be nonnegative");
  if (u >= r1()) return f_.back() + (u - r1()) * slope_beyond().value();
  const std::size_t i = interval_of(grid_, u);
  const double t = (u - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return f_[i] + t * (f_[i + 1] - f_[i]);
}

double eval_f(const DistanceFunction& df, double u) { return df.f(u); }

void DistanceFunction::write_table(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << "u,phi,Phi,rho,f\n";
  for (std::size_t i = 0; i < grid_.size(); ++i)
    out << fmt_double(grid_[i]) << ',' << fmt_double(std::exp(log_phi_[i])) << ',' << fmt_double(Phi_[i]) << ','
        << fmt_double(rho_[i]) << ',' << fmt_double(f_[i]) << '\n';
  for (int k = 1; k <= 16; ++k) {
    const double u = r1() + k / 16.0;
    out << fmt_double(u) << ',' << fmt_double(std::exp(log_phi_r1_)) << ',' << fmt_double(Phi(u)) << ",0.5,"
        << fmt_double(f(u)) << '\n';
  }
}

}  // namespace tem
