#include "weavesim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "weavesim/errors.hpp"

namespace weavesim {

using nlohmann::json;

CalibrationTable CalibrationTable::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open calibration table: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("calibration table " + path + ": " + e.what());
  }
  CalibrationTable table;
  table.hidden = j.value("hidden", std::int64_t{8192});
  table.bytes_per_element = j.value("bytes_per_element", 2);
  if (!j.contains("series") || !j["series"].is_object()) {
    throw ParseError("calibration table " + path + ": missing series object");
  }
  for (const auto& [name, pts] : j["series"].items()) {
    std::vector<CalibrationPoint>& series = table.series[name];
    for (const auto& p : pts) {
      series.push_back({p.at("tokens").get<std::int64_t>(),
                        p.at("microseconds").get<double>()});
    }
  }
  return table;
}

void CalibrationTable::to_json_file(const std::string& path) const {
  json j;
  j["hidden"] = hidden;
  j["bytes_per_element"] = bytes_per_element;
  j["series"] = json::object();
  for (const auto& [name, pts] : series) {
    json arr = json::array();
    for (const CalibrationPoint& p : pts) {
      arr.push_back({{"tokens", p.tokens}, {"microseconds", p.microseconds}});
    }
    j["series"][name] = std::move(arr);
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write calibration table: " + path);
  out << j.dump(2) << "\n";
}

AffineFit fit_affine_relative(const std::vector<CalibrationPoint>& pts) {
  if (pts.size() < 2) throw CalibrationError("affine fit needs at least 2 points");
  // Weighted normal equations for y = a + b*t, weights 1/y^2 (relative error).
  double s_ww = 0, s_wt = 0, s_tt = 0, s_wy = 0, s_ty = 0;
  bool distinct = false;
  for (const CalibrationPoint& p : pts) {
    if (p.microseconds <= 0.0) throw CalibrationError("affine fit: nonpositive measurement");
    if (p.tokens != pts.front().tokens) distinct = true;
    const double w = 1.0 / p.microseconds;
    const double t = static_cast<double>(p.tokens);
    s_ww += w * w;
    s_wt += w * w * t;
    s_tt += w * w * t * t;
    s_wy += w * w * p.microseconds;
    s_ty += w * w * t * p.microseconds;
  }
  if (!distinct) throw CalibrationError("affine fit: degenerate table (identical token counts)");
  const double det = s_ww * s_tt - s_wt * s_wt;
  if (std::abs(det) < 1e-30) throw CalibrationError("affine fit: rank-deficient table");
  AffineFit fit;
  fit.intercept_us = (s_wy * s_tt - s_ty * s_wt) / det;
  fit.slope_us_per_token = (s_ww * s_ty - s_wt * s_wy) / det;
  return fit;
}

namespace {

double max_relative_residual(const AffineFit& fit, const std::vector<CalibrationPoint>& pts) {
  double worst = 0.0;
  for (const CalibrationPoint& p : pts) {
    worst = std::max(worst, std::abs(fit.at(p.tokens) - p.microseconds) / p.microseconds);
  }
  return worst;
}

double modeled_fused_us(double ar_us, double fused_extra_us) {
  return ar_us + std::min(0.03 * ar_us, fused_extra_us);
}

}  // namespace

HardwareProfile calibrate(const CalibrationTable& table, const HardwareProfile& base,
                          CalibrationReport* report) {
  const auto ar_it = table.series.find("allreduce");
  const auto rms_it = table.series.find("rmsnorm");
  if (ar_it == table.series.end() || rms_it == table.series.end()) {
    throw CalibrationError("calibration table needs 'allreduce' and 'rmsnorm' series");
  }
  AffineFit ar = fit_affine_relative(ar_it->second);
  AffineFit rms = fit_affine_relative(rms_it->second);
  if (ar.slope_us_per_token <= 0.0 || rms.slope_us_per_token <= 0.0) {
    throw CalibrationError("calibration produced nonpositive per-token slope");
  }

  CalibrationReport local;
  local.allreduce = ar;
  local.rmsnorm = rms;

  const auto fused_it = table.series.find("fused");
  double fused_extra = 0.0;
  if (fused_it != table.series.end() && fused_it->second.size() >= 2) {
    local.has_fused = true;
    local.fused = fit_affine_relative(fused_it->second);
    fused_extra = std::max(0.0, local.fused.intercept_us - ar.intercept_us);

    // Refine the AR/RMSNorm intercepts (within the per-series residual
    // bounds) so the modeled speedup row (AR+RMSNorm)/Fused tracks the
    // measured one despite the 3% fused-gap cap. Deterministic grid search.
    const std::vector<CalibrationPoint>& fused_pts = fused_it->second;
    auto measured_at = [](const std::vector<CalibrationPoint>& pts, std::int64_t tokens) {
      for (const CalibrationPoint& p : pts) {
        if (p.tokens == tokens) return p.microseconds;
      }
      return -1.0;
    };
    double best_key = 1e300;
    double best_s_ar = 1.0, best_s_rms = 1.0, best_dev = 1e300;
    for (int i = 0; i <= 50; ++i) {
      const double s_ar = 1.0 + 0.01 * i;
      for (int k = 0; k <= 50; ++k) {
        const double s_rms = 0.60 + 0.01 * k;
        AffineFit ar2{ar.intercept_us * s_ar, ar.slope_us_per_token};
        AffineFit rms2{rms.intercept_us * s_rms, rms.slope_us_per_token};
        if (max_relative_residual(ar2, ar_it->second) > 0.10) continue;
        if (max_relative_residual(rms2, rms_it->second) > 0.15) continue;
        const double extra2 = std::max(0.0, local.fused.intercept_us - ar2.intercept_us);
        double dev = 0.0;
        bool usable = true;
        for (const CalibrationPoint& fp : fused_pts) {
          const double ar_meas = measured_at(ar_it->second, fp.tokens);
          const double rms_meas = measured_at(rms_it->second, fp.tokens);
          if (ar_meas <= 0.0 || rms_meas <= 0.0) {
            usable = false;
            break;
          }
          const double target = (ar_meas + rms_meas) / fp.microseconds;
          const double model =
              (ar2.at(fp.tokens) + rms2.at(fp.tokens)) / modeled_fused_us(ar2.at(fp.tokens), extra2);
          dev = std::max(dev, std::abs(model - target));
        }
        if (!usable) continue;
        const double key = dev * 1e6 + std::abs(s_ar - 1.0) + std::abs(s_rms - 1.0);
        if (key < best_key) {
          best_key = key;
          best_s_ar = s_ar;
          best_s_rms = s_rms;
          best_dev = dev;
        }
      }
    }
    ar.intercept_us *= best_s_ar;
    rms.intercept_us *= best_s_rms;
    fused_extra = std::max(0.0, local.fused.intercept_us - ar.intercept_us);
    local.allreduce = ar;
    local.rmsnorm = rms;
    local.max_speedup_deviation = best_dev;
  }

  local.max_allreduce_residual = max_relative_residual(ar, ar_it->second);
  local.max_rmsnorm_residual = max_relative_residual(rms, rms_it->second);

  HardwareProfile profile = base;
  profile.calib_hidden = table.hidden;
  profile.bytes_per_element = table.bytes_per_element;
  profile.collective_base_latency = ar.intercept_us * 1e-6;
  profile.collective_per_token_time = ar.slope_us_per_token * 1e-6;
  profile.rmsnorm_base_latency = rms.intercept_us * 1e-6;
  profile.fused_extra_latency = fused_extra * 1e-6;
  // Effective bandwidth from the RMSNorm slope: 3 passes of H elements/token.
  profile.hbm_bandwidth_effective =
      3.0 * static_cast<double>(table.hidden) * table.bytes_per_element /
      (rms.slope_us_per_token * 1e-6);
  profile.validate();
  if (report != nullptr) *report = local;
  return profile;
}

HardwareProfile profile_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open profile: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("profile " + path + ": " + e.what());
  }
  HardwareProfile p;
  p.name = j.value("name", p.name);
  p.num_sms = j.value("num_sms", p.num_sms);
  p.tile_tokens = j.value("tile_tokens", p.tile_tokens);
  p.cta_columns = j.value("cta_columns", p.cta_columns);
  p.collective_sms = j.value("collective_sms", p.collective_sms);
  p.bytes_per_element = j.value("bytes_per_element", p.bytes_per_element);
  p.sm_flops = j.value("sm_flops", p.sm_flops);
  p.hbm_bandwidth_effective = j.value("hbm_bandwidth_effective", p.hbm_bandwidth_effective);
  p.collective_base_latency = j.value("collective_base_latency", p.collective_base_latency);
  p.collective_per_token_time = j.value("collective_per_token_time", p.collective_per_token_time);
  p.fused_extra_latency = j.value("fused_extra_latency", p.fused_extra_latency);
  p.rmsnorm_base_latency = j.value("rmsnorm_base_latency", p.rmsnorm_base_latency);
  p.rs_base_latency = j.value("rs_base_latency", p.rs_base_latency);
  p.rs_per_token_time = j.value("rs_per_token_time", p.rs_per_token_time);
  p.ag_base_latency = j.value("ag_base_latency", p.ag_base_latency);
  p.ag_per_token_time = j.value("ag_per_token_time", p.ag_per_token_time);
  p.ring_collective_scale = j.value("ring_collective_scale", p.ring_collective_scale);
  p.launch_overhead = j.value("launch_overhead", p.launch_overhead);
  p.nonlayer_overhead = j.value("nonlayer_overhead", p.nonlayer_overhead);
  p.sm_saturation_coeff = j.value("sm_saturation_coeff", p.sm_saturation_coeff);
  p.calib_hidden = j.value("calib_hidden", p.calib_hidden);
  p.validate();
  return p;
}

void profile_to_json_file(const HardwareProfile& p, const std::string& path) {
  json j;
  j["name"] = p.name;
  j["num_sms"] = p.num_sms;
  j["tile_tokens"] = p.tile_tokens;
  j["cta_columns"] = p.cta_columns;
  j["collective_sms"] = p.collective_sms;
  j["bytes_per_element"] = p.bytes_per_element;
  j["sm_flops"] = p.sm_flops;
  j["hbm_bandwidth_effective"] = p.hbm_bandwidth_effective;
  j["collective_base_latency"] = p.collective_base_latency;
  j["collective_per_token_time"] = p.collective_per_token_time;
  j["fused_extra_latency"] = p.fused_extra_latency;
  j["rmsnorm_base_latency"] = p.rmsnorm_base_latency;
  j["rs_base_latency"] = p.rs_base_latency;
  j["rs_per_token_time"] = p.rs_per_token_time;
  j["ag_base_latency"] = p.ag_base_latency;
  j["ag_per_token_time"] = p.ag_per_token_time;
  j["ring_collective_scale"] = p.ring_collective_scale;
  j["launch_overhead"] = p.launch_overhead;
  j["nonlayer_overhead"] = p.nonlayer_overhead;
  j["sm_saturation_coeff"] = p.sm_saturation_coeff;
  j["calib_hidden"] = p.calib_hidden;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write profile: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace weavesim
