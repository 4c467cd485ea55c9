#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weavesim/calibration.hpp"
#include "weavesim/presets.hpp"

namespace weavesim {

// One run's settings. CLI flags and the JSON config file map 1:1 onto these
// fields; flags override file values.
struct RunConfig {
  std::string model = "llama-70b";
  std::string profile = "h100";  // built-in name or profile JSON path
  std::string mode = "tokenweave";
  std::int64_t chunk_size = 2048;
  std::uint64_t seed = 42;
  std::string out;    // output path stem ("" = stdout only)
  std::string trace;  // trace JSONL path ("" = built-in traces)
  std::string table;  // calibration table JSON path ("" = shipped table)
  std::vector<std::int64_t> token_sweep = {1024, 2048, 4096, 8192, 16384, 32768};
  std::int64_t threshold_tokens = -1;  // -1 = model preset default
  bool equal_split = false;            // latency: add the equal-split ablation columns
  bool inject_shard_fault = false;     // verify: corrupt a ShardMap on purpose

  static RunConfig from_json_file(const std::string& path);
};

struct CommandResult {
  int exit_code = 0;
  std::string csv;     // canonical tabular output
  std::string json;    // machine-readable mirror
  std::string report;  // human-readable log lines
};

// "h100"/"b200" resolve to the built-in calibrated profiles; anything else is
// read as a profile JSON file.
HardwareProfile resolve_profile(const std::string& name_or_path);

CommandResult cmd_verify(const RunConfig& config);
CommandResult cmd_microbench(const RunConfig& config);
CommandResult cmd_latency(const RunConfig& config);
CommandResult cmd_throughput(const RunConfig& config);
CommandResult cmd_calibrate(const RunConfig& config);

}  // namespace weavesim
