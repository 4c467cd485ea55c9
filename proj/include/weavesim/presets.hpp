#pragma once

#include <string>
#include <vector>

#include "weavesim/calibration.hpp"
#include "weavesim/splitter.hpp"
#include "weavesim/wavemodel.hpp"

namespace weavesim {

struct ModelPreset {
  std::string name;
  LayerSpec spec;
  SplitPolicy policy;
};

// Public architecture shapes: llama-70b, qwen-72b, mixtral-8x22b.
ModelPreset model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

// Shipped microbenchmark tables (hidden 8192, bf16) used to build the
// built-in profiles.
CalibrationTable h100_microbench_table();
CalibrationTable b200_microbench_table();

// Built-in calibrated profiles: "h100" (132 SMs) and "b200" (148 SMs).
HardwareProfile builtin_profile(const std::string& name);

}  // namespace weavesim
