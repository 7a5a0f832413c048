#include "tem/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tem/errors.hpp"
#include "tem/format.hpp"
#include "tem/measure.hpp"
#include "tem/parallel.hpp"
#include "tem/scheme.hpp"

namespace tem {

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::Stick: return "stick";
    case Branch::Reflect: return "reflect";
    case Branch::Sync: return "sync";
  }
  return "?";
}

Vec drifted_point(std::span<const double> x, const DriftModel& model, double h, const TruncationParams& trunc) {
  Vec p = truncate(x, h, trunc);
  Vec b(p.size());
  model.eval(p, b);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += h * b[i];
  return p;
}

Vec reflect(std::span<const double> axis, std::span<const double> z) {
  if (axis.size() != z.size()) throw InputError("reflect: dimension mismatch");
  const double n = norm(axis);
  if (!(n > 0.0)) throw InputError("reflect: axis must be nonzero");
  double ez = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) ez += axis[i] / n * z[i];
  Vec out(z.begin(), z.end());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] -= 2.0 * ez * (axis[i] / n);
  return out;
}

double acceptance(std::span<const double> r_hat_vec, std::span<const double> z, double h, double sigma, double m) {
  const double r = norm(r_hat_vec);
  if (r == 0.0) return 1.0;
  double proj = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) proj += r_hat_vec[i] / r * sigma * z[i];
  if (std::abs(proj) > m || std::abs(r + proj) > m) return 0.0;
  const double expo = -(r / (2.0 * h * sigma * sigma)) * (2.0 * proj + r);
  return std::exp(std::min(0.0, expo));
}

OneStepCoupling::OneStepCoupling(const DriftModel& model, const Calibration& calib, double h, AcceptanceFn acc)
    : OneStepCoupling(model, calib.trunc, h, calib.require_coupling().H, calib.require_coupling().m,
                      std::move(acc)) {}

OneStepCoupling::OneStepCoupling(const DriftModel& model, const TruncationParams& trunc, double h, double H,
                                 double m, AcceptanceFn acc)
    : model_(&model), trunc_(trunc), h_(h), H_(H), m_(m), acc_(std::move(acc)) {
  if (!(h > 0.0 && h <= 1.0)) throw InputError("coupling step must lie in (0, 1]");
  if (!(m > 0.0) || !(H > 0.0)) throw InputError("coupling needs H > 0 and m > 0");
}

CoupleOutcome OneStepCoupling::step_with(std::span<const double> x, std::span<const double> y,
                                         std::span<const double> z, double zeta) const {
  const std::size_t d = model_->dim();
  if (x.size() != d || y.size() != d || z.size() != d) throw InputError("coupling: dimension mismatch");
  const double sigma = model_->sigma();
  const Vec ux = drifted_point(x, *model_, h_, trunc_);
  const Vec uy = drifted_point(y, *model_, h_, trunc_);
  Vec diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = ux[i] - uy[i];
  const double r_hat = norm(diff);
  if (!std::isfinite(r_hat)) throw NumericalError("non-finite drifted distance");

  CoupleOutcome out;
  out.r_hat = r_hat;
  out.x_next.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.x_next[i] = ux[i] + sigma * z[i];

  if (r_hat == 0.0) {
    out.branch = Branch::Stick;
    out.y_next = out.x_next;
    out.R_hat = 0.0;
    return out;
  }
  double proj = 0.0;
  for (std::size_t i = 0; i < d; ++i) proj += diff[i] / r_hat * sigma * z[i];

  if (std::abs(proj) <= m_ && r_hat <= H_) {
    if (zeta <= acc_(diff, z, h_, sigma, m_)) {
      out.branch = Branch::Stick;
      out.y_next = out.x_next;
      out.R_hat = 0.0;
    } else {
      out.branch = Branch::Reflect;
      const Vec rz = reflect(diff, z);
      out.y_next.resize(d);
      for (std::size_t i = 0; i < d; ++i) out.y_next[i] = uy[i] + sigma * rz[i];
      out.R_hat = std::abs(r_hat + 2.0 * proj);
    }
  } else {
    out.branch = Branch::Sync;
    out.y_next.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.y_next[i] = uy[i] + sigma * z[i];
    out.R_hat = r_hat;
  }
  return out;
}

CoupleOutcome OneStepCoupling::step(std::span<const double> x, std::span<const double> y, RandomStream& rng,
                                    CoupleDraw* record) const {
  const std::size_t d = model_->dim();
  Vec z(d);
  const double sh = std::sqrt(h_);
  for (auto& v : z) v = sh * rng.normal();
  const double zeta = rng.uniform();
  CoupleOutcome out = step_with(x, y, z, zeta);
  if (record) {
    record->z = std::move(z);
    record->zeta = zeta;
    record->branch = out.branch;
  }
  return out;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// n coupled draws at (x, y); draw i uses stream (seed, i).
template <class Fn>
void for_each_draw(const OneStepCoupling& cpl, std::span<const double> x, std::span<const double> y, std::size_t n,
                   std::uint64_t seed, Fn&& fn) {
  parallel_for(block_count(n, 4096), [&](std::size_t b) {
    const std::size_t hi = std::min(n, (b + 1) * 4096);
    for (std::size_t i = b * 4096; i < hi; ++i) {
      RandomStream rng(seed, i);
      CoupleDraw rec;
      const CoupleOutcome o = cpl.step(x, y, rng, &rec);
      fn(i, o, rec);
    }
  });
}

}  // namespace

TestReport verify_marginal(const OneStepCoupling& cpl, std::span<const double> x, std::span<const double> y,
                           std::size_t n, std::uint64_t seed, double alpha) {
  const std::size_t d = cpl.model().dim();
  const double scale = std::abs(cpl.model().sigma()) * std::sqrt(cpl.h());
  const Vec ux = drifted_point(x, cpl.model(), cpl.h(), cpl.trunc());
  const Vec uy = drifted_point(y, cpl.model(), cpl.h(), cpl.trunc());
  Vec e(d);
  const double r_hat = distance(ux, uy);
  for (std::size_t i = 0; i < d; ++i) e[i] = r_hat > 0.0 ? (ux[i] - uy[i]) / r_hat : 0.0;
  const bool with_proj = r_hat > 0.0 && d > 1;
  const std::size_t tests = d + (with_proj ? 1 : 0);

  std::vector<std::vector<double>> samples(tests, std::vector<double>(n));
  for_each_draw(cpl, x, y, n, seed, [&](std::size_t i, const CoupleOutcome& o, const CoupleDraw&) {
    double p = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double w = (o.y_next[j] - uy[j]) / scale;
      samples[j][i] = w;
      p += e[j] * w;
    }
    if (with_proj) samples[d][i] = p;
  });

  TestReport rep;
  rep.name = "marginal";
  rep.threshold = alpha / static_cast<double>(tests);
  double worst_p = 1.0;
  for (auto& s : samples) {
    const double D = ks_statistic(s, normal_cdf);
    rep.statistic = std::max(rep.statistic, D);
    worst_p = std::min(worst_p, ks_pvalue(D, n));
  }
  rep.pass = worst_p > rep.threshold;
  rep.detail = "max D=" + fmt_double(rep.statistic) + " min p=" + fmt_double(worst_p) + " over " +
               std::to_string(tests) + " tests";
  return rep;
}

TestReport verify_mean_distance(const OneStepCoupling& cpl, std::span<const double> x, std::span<const double> y,
                                std::size_t n, std::uint64_t seed) {
  std::vector<double> R(n);
  double r_hat = 0.0;
  for_each_draw(cpl, x, y, n, seed, [&](std::size_t i, const CoupleOutcome& o, const CoupleDraw&) { R[i] = o.R_hat; });
  r_hat = distance(drifted_point(x, cpl.model(), cpl.h(), cpl.trunc()),
                   drifted_point(y, cpl.model(), cpl.h(), cpl.trunc()));
  const MeanSe ms = mean_se(R);
  TestReport rep;
  rep.name = "mean_distance";
  rep.statistic = std::abs(ms.mean - r_hat);
  rep.threshold = 3.0 * ms.se + 64.0 * kEps * (1.0 + r_hat);
  rep.pass = rep.statistic <= rep.threshold;
  rep.detail = "r_hat=" + fmt_double(r_hat) + " mean=" + fmt_double(ms.mean) + " se=" + fmt_double(ms.se);
  return rep;
}

TestReport verify_contraction(const OneStepCoupling& cpl, LogReal c, const DistanceFunction& df,
                              const std::vector<std::pair<Vec, Vec>>& pairs, std::size_t n, std::uint64_t seed,
                              std::vector<ContractionRow>* rows) {
  TestReport rep;
  rep.name = "contraction";
  rep.pass = true;
  const double ch = (c * LogReal::from_value(cpl.h())).value();
  std::size_t limited = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [x, y] = pairs[k];
    std::vector<double> fR(n);
    for_each_draw(cpl, x, y, n, derive_seed(seed, k),
                  [&](std::size_t i, const CoupleOutcome& o, const CoupleDraw&) { fR[i] = df.f(o.R_hat); });
    ContractionRow row;
    row.r = distance(truncate(x, cpl.h(), cpl.trunc()), truncate(y, cpl.h(), cpl.trunc()));
    row.r_hat = distance(drifted_point(x, cpl.model(), cpl.h(), cpl.trunc()),
                         drifted_point(y, cpl.model(), cpl.h(), cpl.trunc()));
    const MeanSe ms = mean_se(fR);
    row.mean_f = ms.mean;
    row.se = ms.se;
    row.f_r = df.f(row.r);
    const double slack = 64.0 * kEps * row.f_r;
    if (ch * row.f_r <= std::max(ms.se, slack)) {
      row.resolution_limited = true;
      row.bound = row.f_r + 3.0 * ms.se + slack;
      ++limited;
    } else {
      row.bound = (1.0 - ch) * row.f_r + 3.0 * ms.se + slack;
    }
    row.pass = row.mean_f <= row.bound;
    rep.pass = rep.pass && row.pass;
    rep.statistic = std::max(rep.statistic, row.mean_f - row.bound);
    if (rows) rows->push_back(row);
  }
  rep.resolution_limited = limited > 0;
  rep.detail = std::to_string(pairs.size()) + " pairs, " + std::to_string(limited) + " resolution-limited, c*h=" +
               fmt_double(ch);
  return rep;
}

const char* lemma_name(LowerBoundLemma l) {
  switch (l) {
    case LowerBoundLemma::NearZero: return "near_zero";
    case LowerBoundLemma::SmallDrifted: return "small_drifted";
    case LowerBoundLemma::Window: return "window";
  }
  return "?";
}

LowerBoundRow verify_second_moment_lower_bound(const OneStepCoupling& cpl, const GaussianConstants& gc,
                                               LowerBoundLemma lemma, std::span<const double> x,
                                               std::span<const double> y, std::size_t n, std::uint64_t seed) {
  const double h = cpl.h();
  const double sh = std::sqrt(h);
  const double H = cpl.H();
  const double m = cpl.m();
  const double M = cpl.trunc().M;
  const double tb = cpl.trunc().theta_bar;
  LowerBoundRow row;
  row.lemma = lemma;
  row.r = distance(truncate(x, h, cpl.trunc()), truncate(y, h, cpl.trunc()));
  row.r_hat = distance(drifted_point(x, cpl.model(), h, cpl.trunc()), drifted_point(y, cpl.model(), h, cpl.trunc()));
  const double r = row.r;
  const double rh = row.r_hat;

  double lo = 0.0, hi = 0.0, centre = 0.0;
  switch (lemma) {
    case LowerBoundLemma::NearZero:
      row.in_regime = r > 0.0 && r <= sh && rh > 0.0 && rh <= H && h <= m * m / 64.0 && h <= std::pow(M, 1.0 / (tb - 1.0));
      lo = r + sh;
      hi = r + 18.0 * sh;
      centre = r;
      row.bound = gc.c1.value() * rh * sh;
      break;
    case LowerBoundLemma::SmallDrifted:
      row.in_regime = rh > 0.0 && rh <= std::min(H, sh) && h <= 4.0 * m * m;
      lo = 0.0;
      hi = rh + sh;
      centre = rh;
      row.bound = gc.c2 * rh * sh;
      break;
    case LowerBoundLemma::Window:
      row.in_regime = rh >= sh && rh <= H && r >= sh && r <= std::pow(h, cpl.trunc().theta - 0.5) / (4.0 * M) &&
                      h <= 4.0 * m * m && h <= std::pow(4.0 * M, 1.0 / (tb - 1.0)) && h <= H * H;
      lo = r - sh;
      hi = r;
      centre = r;
      row.bound = gc.c3 * h;
      break;
  }

  std::vector<double> vals(n);
  for_each_draw(cpl, x, y, n, seed, [&](std::size_t i, const CoupleOutcome& o, const CoupleDraw&) {
    const double R = o.R_hat;
    vals[i] = (R > lo && R < hi) ? (R - centre) * (R - centre) : 0.0;
  });
  const MeanSe ms = mean_se(vals);
  row.estimate = ms.mean;
  row.se = ms.se;
  row.pass = row.in_regime && row.estimate >= row.bound - 3.0 * row.se;
  return row;
}

}  // namespace tem
