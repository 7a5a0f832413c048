#pragma once

#include <iosfwd>
#include <string>

#include "tem/calibrate.hpp"

namespace tem {

/// Flat key=value listing, one key per line, shortest round-trip decimals.
/// Constants that can underflow are written twice: log_<name> and <name>;
/// on reading, the log_ form is authoritative.
void write_calibration(std::ostream& out, const Calibration& calib);
std::string calibration_text(const Calibration& calib);
void save_calibration(const std::string& path, const Calibration& calib);

Calibration read_calibration(std::istream& in);
Calibration load_calibration(const std::string& path);

}  // namespace tem
