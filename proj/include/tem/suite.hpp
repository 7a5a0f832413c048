#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tem/coupling.hpp"

namespace tem {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::string detail;
  /// Extra per-criterion lines (pairs, curve points, diagnostics).
  std::vector<std::string> notes;
};

struct SuiteOptions {
  std::uint64_t seed = 20250101;
  /// Criterion ids to run; unset runs all ten, an empty list runs none.
  std::optional<std::vector<int>> only;
  /// Replaces the acceptance function in the coupling criteria (mutation tests).
  AcceptanceFn acceptance_override;
};

inline constexpr int kCriterionCount = 10;
const char* criterion_name(int id);

CriterionResult run_criterion(int id, const SuiteOptions& opts);
std::vector<CriterionResult> run_suite(const SuiteOptions& opts);

/// One line: "PASS|FAIL c<id> <name> (<s>s) <detail>".
std::string result_line(const CriterionResult& r);
/// Machine-readable summary.
std::string suite_json(const std::vector<CriterionResult>& results, std::uint64_t seed);

}  // namespace tem
