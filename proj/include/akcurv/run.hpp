#pragma once

// Config-driven orchestration behind the akcurv command line.
//
// Exit status: 0 when every judged check passes, 1 when a check fails or a
// task throws (summary.json is still written), 2 for configuration and
// usage errors.

#include <akcurv/chart.hpp>
#include <akcurv/config.hpp>
#include <akcurv/metric.hpp>

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace akcurv::run {

// One defaults table; [tolerances] overrides entries by name.
struct Tolerances {
  std::map<std::string, double> values;

  static Tolerances defaults();
  double get(const std::string& name) const;
  // fd_constant · h²
  double fd(double h) const { return get("fd_constant") * h * h; }
};

struct ChartSpec {
  int n = 1;
  double z_lo = 0.0, z_hi = 1.0;
  int z_points = 16;
  double t_lo = 0.0, t_hi = 6.283185307179586;
  int t_points = 16;
  bool t_periodic = true;

  DarbouxChart build(int refine = 0) const;
};

enum class Path { Analytic, FiniteDifference };

struct RunConfig {
  std::string source;
  config::Document document;
  ChartSpec chart;
  Path path = Path::Analytic;
  std::vector<std::string> tasks;
  std::vector<std::string> expect;  // einstein, extremal, kahler, lebrun
  std::string out = "out";
  int h_refine = 0;
  Tolerances tolerances;

  bool expects(const std::string& property) const;
};

extern const std::vector<std::string> kTaskNames;

// Parses and validates every section (including task sections and metric
// expressions) before anything runs; throws config::ConfigError.
RunConfig parse_run_config(const config::Document& doc);

// The run metric described by [metric] (and [deform] when requested), built
// against the unrefined chart.
MetricModelPtr build_metric(const RunConfig& cfg, const DarbouxChart& chart);

struct RunOptions {
  std::string config_path;
  std::optional<std::string> task;  // replaces the configured task list
  std::optional<std::string> out;
  std::optional<int> h_refine;
};

int run(const RunOptions& options, std::ostream& log);

}  // namespace akcurv::run
