// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tem/suite.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance battery"};
  std::vector<int> only;
  std::uint64_t seed = tem::SuiteOptions{}.seed;
  std::string json_path;
  bool verbose = false;
  app.add_option("--only", only, "criterion ids")->check(CLI::Range(1, tem::kCriterionCount))->delimiter(',');
  app.add_option("--seed", seed);
  app.add_option("--json", json_path, "write a JSON summary here");
  app.add_flag("-v,--verbose", verbose, "print per-criterion notes");
  CLI11_PARSE(app, argc, argv);

  tem::SuiteOptions opts;
  opts.seed = seed;
  if (app.count("--only")) opts.only = only;
  bool all = true;
  std::vector<tem::CriterionResult> results;
  for (int id : opts.only ? *opts.only : std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}) {
    tem::SuiteOptions one = opts;
    one.only = std::vector<int>{id};
    auto r = tem::run_suite(one).front();
    std::cout << tem::result_line(r) << '\n';
    if (verbose || !r.pass)
      for (const auto& n : r.notes) std::cout << "    " << n << '\n';
    std::cout.flush();
    all = all && r.pass;
    results.push_back(std::move(r));
  }
  if (!json_path.empty()) std::ofstream(json_path) << tem::suite_json(results, seed) << '\n';
  return all ? 0 : 1;
}
