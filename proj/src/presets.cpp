#include "weavesim/presets.hpp"

#include "weavesim/errors.hpp"

namespace weavesim {

namespace {

std::vector<CalibrationPoint> zip(const std::vector<std::int64_t>& tokens,
                                  const std::vector<double>& microseconds) {
  std::vector<CalibrationPoint> pts;
  pts.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) pts.push_back({tokens[i], microseconds[i]});
  return pts;
}

}  // namespace

CalibrationTable h100_microbench_table() {
  const std::vector<std::int64_t> tokens = {64,   128,  256,  512,   1024,
                                            2048, 4096, 8192, 16384, 32768};
  CalibrationTable table;
  table.hidden = 8192;
  table.bytes_per_element = 2;
  table.series["allreduce"] = zip(tokens, {16.32, 20.64, 28.35, 43.84, 74.85, 136.00, 257.47,
                                           500.54, 986.24, 1955.71});
  table.series["rmsnorm"] = zip(tokens, {8.32, 9.57, 12.06, 18.91, 29.82, 52.16, 96.29, 185.09,
                                         361.54, 716.13});
  table.series["ar_plus_rmsnorm"] = zip(tokens, {24.64, 30.21, 40.41, 62.75, 104.67, 188.16,
                                                 353.76, 685.63, 1347.78, 2671.84});
  table.series["fused"] = zip(tokens, {17.70, 22.53, 30.02, 46.46, 75.71, 137.34, 258.34, 502.24,
                                       990.59, 1960.90});
  return table;
}

CalibrationTable b200_microbench_table() {
  const std::vector<std::int64_t> tokens = {32,   64,   128,  256,  512,   1024,
                                            2048, 4096, 8192, 16384, 32768, 65536};
  CalibrationTable table;
  table.hidden = 8192;
  table.bytes_per_element = 2;
  table.series["allreduce"] = zip(tokens, {26.08, 28.80, 32.29, 35.20, 45.55, 60.26, 95.86,
                                           166.61, 305.78, 578.48, 1131.55, 2240.93});
  table.series["rmsnorm"] = zip(tokens, {14.46, 13.15, 14.67, 13.66, 15.38, 21.12, 31.62, 53.66,
                                         93.38, 173.84, 333.02, 654.51});
  table.series["ar_plus_rmsnorm"] = zip(tokens, {40.54, 41.95, 46.96, 48.86, 60.93, 81.38, 127.47,
                                                 220.27, 399.15, 752.32, 1464.58, 2895.44});
  table.series["fused"] = zip(tokens, {30.46, 32.45, 34.14, 39.18, 49.31, 63.62, 100.48, 170.14,
                                       307.71, 581.55, 1130.69, 2236.02});
  return table;
}

HardwareProfile builtin_profile(const std::string& name) {
  if (name == "h100") {
    HardwareProfile base;  // defaults describe the H100 geometry
    return calibrate(h100_microbench_table(), base);
  }
  if (name == "b200") {
    HardwareProfile base;
    base.name = "b200";
    base.num_sms = 148;
    base.sm_flops = 8.4e12;
    return calibrate(b200_microbench_table(), base);
  }
  throw ConfigError("unknown profile: " + name + " (expected h100 or b200)");
}

ModelPreset model_preset(const std::string& name) {
  ModelPreset preset;
  preset.name = name;
  LayerSpec& s = preset.spec;
  if (name == "llama-70b") {
    s.hidden = 8192;
    s.intermediate = 28672;
    s.num_attention_heads = 64;
    s.num_kv_heads = 8;
    s.head_dim = 128;
    s.num_layers = 80;
    preset.policy.threshold_tokens = 1024;
  } else if (name == "qwen-72b") {
    s.hidden = 8192;
    s.intermediate = 29568;
    s.num_attention_heads = 64;
    s.num_kv_heads = 8;
    s.head_dim = 128;
    s.num_layers = 80;
    preset.policy.threshold_tokens = 1024;
  } else if (name == "mixtral-8x22b") {
    s.hidden = 6144;
    s.intermediate = 16384;
    s.num_attention_heads = 48;
    s.num_kv_heads = 8;
    s.head_dim = 128;
    s.num_layers = 56;
    s.experts = 8;
    s.top_k = 2;
    preset.policy.threshold_tokens = 4096;
  } else {
    throw ConfigError("unknown model preset: " + name);
  }
  s.tp_degree = 8;
  s.validate();
  return preset;
}

std::vector<std::string> model_preset_names() {
  return {"llama-70b", "qwen-72b", "mixtral-8x22b"};
}

}  // namespace weavesim
