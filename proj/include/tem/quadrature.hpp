#pragma once

#include <functional>

namespace tem {

/// Adaptive Simpson with Richardson correction. Stops a panel once the
/// two-level difference is below 15*tol (tol is split between halves).
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 48);

double log_add_exp(double a, double b);

}  // namespace tem
