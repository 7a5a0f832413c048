#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tem/model.hpp"

namespace tem {

/// A series for the minimal SVG line plot.
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Self-contained SVG line chart; log axes take log10 of positive values.
void write_svg_plot(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<PlotSeries>& series, bool logx = false,
                    bool logy = false);

struct ExperimentCommon {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  /// Leading "# generated <time>" line in every file; off gives byte-identical reruns.
  bool timestamp = true;
  double theta_bar = 0.25;
};

struct Example1Config {
  ExperimentCommon common;
  std::vector<Vec> initials = {{1.0, 0.5}, {0.1, 1.0}, {10.0, 1.0}};
  double traj_h = 0x1p-10;
  std::size_t traj_paths = 3000;
  double traj_T = 20.0;
  std::vector<double> traj_h_list = {0x1p-10, 0x1p-12, 0x1p-14};
  double traj_dt = 0.125;
  // strong error; reference scale 2^-17 and T = 32 reduced to desk scale
  std::vector<double> strong_h_list = {0x1p-10, 0x1p-11, 0x1p-12, 0x1p-13, 0x1p-14};
  double strong_h_ref = 0x1p-16;
  double strong_T = 4.0;
  std::size_t strong_paths = 1000;
  // densities
  std::vector<double> density_h_list = {0x1p-7, 0x1p-8, 0x1p-9, 0x1p-10};
  std::size_t density_paths = 8000;
  double density_T = 20.0;
};

struct Example2Config {
  ExperimentCommon common;
  std::vector<double> initials = {1.0, 0.1, -1.5};
  std::vector<double> traj_h_list = {0x1p-12, 0x1p-10};
  std::size_t traj_paths = 5000;
  double traj_T = 4.0;
  double traj_dt = 0.0625;
  // W1 to the reference law at T
  std::vector<double> w1_h_list = {0x1p-14, 0x1p-13, 0x1p-12, 0x1p-11, 0x1p-10};
  double w1_h_ref = 0x1p-16;
  double w1_T = 4.0;
  std::size_t w1_paths = 2000;
  double w1_x0 = 1.0;
  // empirical CDFs and kernel densities
  std::vector<double> density_h_list = {0x1p-4, 0x1p-5, 0x1p-6, 0x1p-7};
  std::size_t density_paths = 3000;
  double density_T = 20.0;
  double density_x0 = 1.0;
};

struct ExperimentCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ArtifactBundle {
  std::string dir;
  std::vector<std::string> files;
  std::vector<ExperimentCheck> checks;
  bool pass() const;
};

/// Validates the configuration before any simulation; throws ConfigError.
void validate(const Example1Config& cfg);
void validate(const Example2Config& cfg);

/// 2-D system dx = (sin 2x - x)dt + dB1, dy = -y dt + dB2.
ArtifactBundle run_example1(const Example1Config& cfg);
/// Double well dx = (x - x^3)dt + dB.
ArtifactBundle run_example2(const Example2Config& cfg);

}  // namespace tem
