#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tem/errors.hpp"
#include "tem/experiments.hpp"
#include "tem/suite.hpp"

using namespace tem;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tem_unit_" + name);
  fs::remove_all(p);
  return p;
}

Example1Config tiny1(const fs::path& dir) {
  Example1Config c;
  c.common.out_dir = dir.string();
  c.common.timestamp = false;
  c.traj_paths = c.strong_paths = c.density_paths = 40;
  c.traj_T = c.density_T = 1.0;
  c.strong_T = 0.5;
  c.traj_h = 0x1p-5;
  c.traj_h_list = {0x1p-4, 0x1p-5};
  c.traj_dt = 0.25;
  c.strong_h_list = {0x1p-4, 0x1p-5};
  c.strong_h_ref = 0x1p-7;
  c.density_h_list = {0x1p-4, 0x1p-5};
  return c;
}

Example2Config tiny2(const fs::path& dir) {
  Example2Config c;
  c.common.out_dir = dir.string();
  c.common.timestamp = false;
  c.traj_paths = c.w1_paths = c.density_paths = 40;
  c.traj_T = c.w1_T = c.density_T = 1.0;
  c.traj_h_list = {0x1p-4};
  c.traj_dt = 0.25;
  c.w1_h_list = {0x1p-4, 0x1p-5};
  c.w1_h_ref = 0x1p-7;
  c.density_h_list = {0x1p-3, 0x1p-4};
  return c;
}

}  // namespace

TEST_CASE("suite: selection") {
  SuiteOptions o;
  o.only = std::vector<int>{};
  CHECK(run_suite(o).empty());
  CHECK_THROWS_AS(criterion_name(0), InputError);
  CHECK(std::string(criterion_name(1)) == "coupling_marginal");
  o.only = std::vector<int>{9};
  const auto r = run_suite(o);
  REQUIRE(r.size() == 1);
  CHECK(r[0].pass);
  CHECK(result_line(r[0]).rfind("PASS c9 oracle_equivalences", 0) == 0);
  const auto j = nlohmann::json::parse(suite_json(r, o.seed));
  CHECK(j["criteria"].size() == 1);
}

TEST_CASE("suite: corrupted acceptance fails the marginal criterion") {
  SuiteOptions o;
  o.acceptance_override = [](std::span<const double>, std::span<const double>, double, double, double) { return 1.0; };
  CHECK_FALSE(run_criterion(1, o).pass);
}

TEST_CASE("experiments: config validation") {
  Example1Config a = tiny1(scratch("bad"));
  a.traj_T = 1.01;
  CHECK_THROWS_AS(validate(a), ConfigError);
  a = tiny1(scratch("bad"));
  a.density_h_list.clear();
  CHECK_THROWS_AS(validate(a), ConfigError);
  a = tiny1(scratch("bad"));
  a.strong_h_list = {0x1p-9};
  CHECK_THROWS_AS(validate(a), ConfigError);
  Example2Config b = tiny2(scratch("bad"));
  b.common.theta_bar = 0.6;
  CHECK_THROWS_AS(validate(b), ConfigError);
  b = tiny2(scratch("bad"));
  b.w1_paths = 0;
  CHECK_THROWS_AS(run_example2(b), ConfigError);
}

TEST_CASE("experiments: bundles are reproducible with fixed headers") {
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  const ArtifactBundle a = run_example1(tiny1(d1));
  const ArtifactBundle b = run_example1(tiny1(d2));
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) CHECK(slurp(a.files[i]) == slurp(b.files[i]));
  const fs::path e1 = d1 / "example1";
  CHECK(first_line((e1 / "fig1_left.csv").string()) == "t,x0,y0,mean_cos,stderr");
  CHECK(first_line((e1 / "fig1_right.csv").string()) == "t,h,mean_cos,stderr");
  CHECK(first_line((e1 / "fig2_strong_error.csv").string()) == "h,error,stderr");
  CHECK(first_line((e1 / "fig3_joint_density.csv").string()) == "h,x,y,density");
  CHECK(first_line((e1 / "fig4_marginal_cdf.csv").string()) == "h,coordinate,u,empirical_cdf,analytic_cdf");
  CHECK(first_line((e1 / "density_x.csv").string()) == "u,density,cdf");
  CHECK(slurp((e1 / "fig1_left.svg").string()).find("<svg") == 0);
  const auto meta = nlohmann::json::parse(slurp((e1 / "metadata.json").string()));
  CHECK(meta.contains("desk_scaling"));

  const ArtifactBundle c = run_example2(tiny2(d1));
  const fs::path e2 = d1 / "example2";
  CHECK(first_line((e2 / "fig5_mean_cos.csv").string()) == "t,x0,h,mean_cos,stderr");
  CHECK(first_line((e2 / "fig6_w1.csv").string()) == "h,error,stderr");
  CHECK(first_line((e2 / "fig7_cdf.csv").string()) == "h,u,empirical_cdf,analytic_cdf");
  CHECK(first_line((e2 / "fig7_kde.csv").string()) == "h,u,kde,analytic_density");
  CHECK(c.checks.size() == 3);

  Example2Config stamped = tiny2(d2);
  stamped.common.timestamp = true;
  run_example2(stamped);
  CHECK(first_line((d2 / "example2" / "fig6_w1.csv").string()).rfind("# generated ", 0) == 0);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("experiments: svg plot") {
  const fs::path p = scratch("svg");
  fs::create_directories(p);
  write_svg_plot((p / "a.svg").string(), "t", "x", "y", {{"s", {1, 2, 4}, {1, 0.5, 0.25}}}, true, true);
  const std::string s = slurp((p / "a.svg").string());
  CHECK(s.find("<polyline") != std::string::npos);
  CHECK(s.find("</svg>") != std::string::npos);
  fs::remove_all(p);
}
