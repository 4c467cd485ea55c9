#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "weavesim/commands.hpp"
#include "weavesim/errors.hpp"

namespace {

void write_outputs(const weavesim::CommandResult& result, const std::string& out) {
  if (!out.empty()) {
    if (!result.csv.empty()) {
      std::ofstream csv(out + ".csv");
      if (!csv) throw weavesim::ParseError("cannot write " + out + ".csv");
      csv << result.csv;
    }
    if (!result.json.empty()) {
      std::ofstream json(out + ".json");
      if (!json) throw weavesim::ParseError("cannot write " + out + ".json");
      json << result.json << "\n";
    }
  }
  std::cout << result.report;
  if (out.empty() && !result.csv.empty()) std::cout << result.csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weavesim: analytic simulator of fused-collective overlap inference"};
  app.require_subcommand(1);

  std::string config_path;
  weavesim::RunConfig overrides;
  bool has_profile = false, has_mode = false, has_model = false, has_chunk = false;
  bool has_seed = false, has_out = false, has_trace = false, has_table = false;
  bool has_sweep = false, has_threshold = false;
  std::vector<std::int64_t> sweep;

  app.add_option("--config", config_path, "run configuration JSON file");
  app.add_option("--profile", overrides.profile, "built-in profile name (h100|b200) or JSON file")
      ->each([&](const std::string&) { has_profile = true; });
  app.add_option("--mode", overrides.mode, "default|multimem|nocomm|fuseonly|tokenweave")
      ->each([&](const std::string&) { has_mode = true; });
  app.add_option("--model", overrides.model, "model preset (llama-70b|qwen-72b|mixtral-8x22b)")
      ->each([&](const std::string&) { has_model = true; });
  app.add_option("--chunk-size", overrides.chunk_size, "chunked-prefill token budget")
      ->each([&](const std::string&) { has_chunk = true; });
  app.add_option("--seed", overrides.seed, "random seed")
      ->each([&](const std::string&) { has_seed = true; });
  app.add_option("--out", overrides.out, "output path stem (writes <out>.csv and <out>.json)")
      ->each([&](const std::string&) { has_out = true; });
  app.add_option("--trace", overrides.trace, "request trace (JSON lines)")
      ->each([&](const std::string&) { has_trace = true; });
  app.add_option("--table", overrides.table, "calibration table JSON file")
      ->each([&](const std::string&) { has_table = true; });
  app.add_option("--sweep", sweep, "token counts for the latency sweep")
      ->each([&](const std::string&) { has_sweep = true; });
  app.add_option("--threshold", overrides.threshold_tokens, "overlap-enable token threshold")
      ->each([&](const std::string&) { has_threshold = true; });
  app.add_flag("--equal-split", overrides.equal_split,
               "latency: add equal-split ablation columns");
  app.add_flag("--inject-shard-fault", overrides.inject_shard_fault,
               "verify: corrupt a shard map to demonstrate contract checking");

  auto* verify = app.add_subcommand("verify", "run the correctness suites");
  auto* microbench = app.add_subcommand("microbench", "collective microbenchmark table");
  auto* latency = app.add_subcommand("latency", "iteration latency sweep across modes");
  auto* throughput = app.add_subcommand("throughput", "trace-driven throughput simulation");
  auto* calibrate = app.add_subcommand("calibrate", "fit a hardware profile from a table");
  for (CLI::App* sub : {verify, microbench, latency, throughput, calibrate}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    weavesim::RunConfig config;
    if (!config_path.empty()) config = weavesim::RunConfig::from_json_file(config_path);
    if (has_profile) config.profile = overrides.profile;
    if (has_mode) config.mode = overrides.mode;
    if (has_model) config.model = overrides.model;
    if (has_chunk) config.chunk_size = overrides.chunk_size;
    if (has_seed) config.seed = overrides.seed;
    if (has_out) config.out = overrides.out;
    if (has_trace) config.trace = overrides.trace;
    if (has_table) config.table = overrides.table;
    if (has_sweep) config.token_sweep = sweep;
    if (has_threshold) config.threshold_tokens = overrides.threshold_tokens;
    if (overrides.equal_split) config.equal_split = true;
    if (overrides.inject_shard_fault) config.inject_shard_fault = true;

    weavesim::CommandResult result;
    if (verify->parsed()) result = weavesim::cmd_verify(config);
    else if (microbench->parsed()) result = weavesim::cmd_microbench(config);
    else if (latency->parsed()) result = weavesim::cmd_latency(config);
    else if (throughput->parsed()) result = weavesim::cmd_throughput(config);
    else if (calibrate->parsed()) result = weavesim::cmd_calibrate(config);

    write_outputs(result, config.out);
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
