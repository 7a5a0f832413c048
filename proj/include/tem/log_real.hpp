#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace tem {

/// A positive real stored as its natural logarithm. Several coupling constants
/// are far below the smallest positive double (exp(-2e6) and beyond); they are
/// carried in this form and only exponentiated on demand.
class LogReal {
 public:
  LogReal() = default;
  static LogReal from_log(double log_value) { return LogReal(log_value); }
  static LogReal from_value(double v) { return LogReal(std::log(v)); }

  double log() const { return log_; }
  /// exp(log); 0 when the value underflows.
  double value() const { return std::exp(log_); }
  /// True when value() is a normal double.
  bool representable() const {
    return std::isfinite(log_) && log_ >= std::log(std::numeric_limits<double>::min()) &&
           log_ <= std::log(std::numeric_limits<double>::max());
  }

  LogReal pow(double p) const { return LogReal(p * log_); }
  friend LogReal operator*(LogReal a, LogReal b) { return LogReal(a.log_ + b.log_); }
  friend LogReal operator/(LogReal a, LogReal b) { return LogReal(a.log_ - b.log_); }
  friend bool operator<(LogReal a, LogReal b) { return a.log_ < b.log_; }
  friend bool operator<=(LogReal a, LogReal b) { return a.log_ <= b.log_; }
  friend bool operator==(LogReal a, LogReal b) { return a.log_ == b.log_; }
  friend LogReal min(LogReal a, LogReal b) { return a.log_ <= b.log_ ? a : b; }

 private:
  explicit LogReal(double l) : log_(l) {}
  double log_ = -std::numeric_limits<double>::infinity();
};

}  // namespace tem
