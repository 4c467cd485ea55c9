#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "weavesim/wavemodel.hpp"

namespace weavesim {

struct CalibrationPoint {
  std::int64_t tokens = 0;
  double microseconds = 0.0;
};

// Named series of (tokens, microseconds) measurements at a fixed hidden size.
// Recognized series names: "allreduce", "rmsnorm", "fused" (optional).
struct CalibrationTable {
  std::int64_t hidden = 8192;
  int bytes_per_element = 2;
  std::map<std::string, std::vector<CalibrationPoint>> series;

  static CalibrationTable from_json_file(const std::string& path);
  void to_json_file(const std::string& path) const;
};

struct AffineFit {
  double intercept_us = 0.0;
  double slope_us_per_token = 0.0;

  double at(std::int64_t tokens) const { return intercept_us + slope_us_per_token * tokens; }
};

// Affine least squares with relative (1/y) weighting; exact through 2 points.
AffineFit fit_affine_relative(const std::vector<CalibrationPoint>& pts);

struct CalibrationReport {
  AffineFit allreduce;
  AffineFit rmsnorm;
  AffineFit fused;
  bool has_fused = false;
  double max_allreduce_residual = 0.0;  // relative
  double max_rmsnorm_residual = 0.0;
  double max_speedup_deviation = 0.0;  // vs measured (AR+RMSNorm)/Fused
};

// Fits collective_base_latency, collective_per_token_time,
// hbm_bandwidth_effective, rmsnorm_base_latency and fused_extra_latency from
// the table. Starts from `base` for everything the table cannot determine.
// Requires >= 2 points per fitted series ("allreduce", "rmsnorm"); throws
// CalibrationError on missing/degenerate series.
HardwareProfile calibrate(const CalibrationTable& table, const HardwareProfile& base,
                          CalibrationReport* report = nullptr);

// Profile JSON round trip.
HardwareProfile profile_from_json_file(const std::string& path);
void profile_to_json_file(const HardwareProfile& profile, const std::string& path);

}  // namespace weavesim
