#include "tem/quadrature.hpp"

#include <cmath>
#include <limits>

namespace tem {
namespace {

struct Panel {
  const std::function<double(double)>& f;

  double recurse(double a, double m, double b, double fa, double fm, double fb, double whole, double tol,
                 int depth) const {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    // The last clause stops refinement once the panels disagree only at roundoff level.
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol || !(lm > a && rm < b) ||
        std::abs(delta) <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(left + right))
      return left + right + delta / 15.0;
    return recurse(a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           recurse(m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  }
};

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Panel{f}.recurse(a, m, b, fa, fm, fb, whole, tol, max_depth);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace tem
