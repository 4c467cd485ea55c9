#include "weavesim/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "weavesim/collectives.hpp"
#include "weavesim/errors.hpp"
#include "weavesim/scheduler.hpp"
#include "weavesim/workloads.hpp"

namespace weavesim {

using nlohmann::json;

namespace {

std::string fmt(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return buf;
}

RankGroup random_group(int world_size, std::int64_t tokens, std::int64_t hidden,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  RankGroup group;
  group.world_size = world_size;
  for (int r = 0; r < world_size; ++r) {
    TokenMatrix m = TokenMatrix::zeros(tokens, hidden);
    for (float& v : m.values) v = dist(rng);
    group.inputs.push_back(std::move(m));
  }
  const ShardMap shards = token_shard_map(tokens, world_size);
  for (const TokenRange& range : shards.ranges) {
    TokenMatrix m = TokenMatrix::zeros(range.size(), hidden);
    for (float& v : m.values) v = dist(rng);
    group.residual_shards.push_back(std::move(m));
  }
  return group;
}

NormParams random_norm(std::int64_t hidden, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> dist(0.5f, 1.5f);
  NormParams params;
  params.weight.resize(static_cast<std::size_t>(hidden));
  for (float& w : params.weight) w = dist(rng);
  return params;
}

// Requests shaped like a chat-style workload: lognormal prompts, short
// replies, zero arrival offsets.
std::vector<Request> chatlike_trace(std::int64_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> prompt_log(6.8, 0.9);
  std::normal_distribution<double> output_log(4.0, 0.7);
  std::vector<Request> requests;
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t prompt =
        std::clamp<std::int64_t>(std::llround(std::exp(prompt_log(rng))), 32, 8192);
    const std::int64_t output =
        std::clamp<std::int64_t>(std::llround(std::exp(output_log(rng))), 16, 256);
    requests.push_back({i, prompt, output, 0.0});
  }
  return requests;
}

ModelPreset configured_preset(const RunConfig& config) {
  ModelPreset preset = model_preset(config.model);
  if (config.threshold_tokens > 0) preset.policy.threshold_tokens = config.threshold_tokens;
  return preset;
}

}  // namespace

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  RunConfig c;
  c.model = j.value("model", c.model);
  c.profile = j.value("profile", c.profile);
  c.mode = j.value("mode", c.mode);
  c.chunk_size = j.value("chunk_size", c.chunk_size);
  c.seed = j.value("seed", c.seed);
  c.out = j.value("out", c.out);
  c.trace = j.value("trace", c.trace);
  c.table = j.value("table", c.table);
  if (j.contains("token_sweep")) c.token_sweep = j["token_sweep"].get<std::vector<std::int64_t>>();
  c.threshold_tokens = j.value("threshold_tokens", c.threshold_tokens);
  c.equal_split = j.value("equal_split", c.equal_split);
  c.inject_shard_fault = j.value("inject_shard_fault", c.inject_shard_fault);
  return c;
}

HardwareProfile resolve_profile(const std::string& name_or_path) {
  if (name_or_path == "h100" || name_or_path == "b200") return builtin_profile(name_or_path);
  return profile_from_json_file(name_or_path);
}

CommandResult cmd_verify(const RunConfig& config) {
  CommandResult result;
  std::ostringstream report;
  int failures = 0;
  auto check = [&](bool ok, const std::string& name, const std::string& detail) {
    report << (ok ? "PASS" : "FAIL") << "  " << name;
    if (!detail.empty()) report << "  " << detail;
    report << "\n";
    if (!ok) ++failures;
  };

  // Fused collective vs the unfused oracle, plus parallel-mode bitwise match.
  {
    double max_err = 0.0;
    bool parallel_identical = true;
    for (int world : {2, 4, 8}) {
      for (std::int64_t tokens : {1, 3, 17, 64, 256}) {
        for (std::int64_t hidden : {16, 64, 256}) {
          for (int instance = 0; instance < 5; ++instance) {
            std::mt19937_64 rng(config.seed ^ (static_cast<std::uint64_t>(world) << 40) ^
                                (static_cast<std::uint64_t>(tokens) << 20) ^
                                (static_cast<std::uint64_t>(hidden) << 4) ^
                                static_cast<std::uint64_t>(instance));
            RankGroup group = random_group(world, tokens, hidden, rng);
            const NormParams params = random_norm(hidden, rng);
            const ShardMap shards = token_shard_map(tokens, world);

            const TokenMatrix reduced = all_reduce(group);
            const TokenMatrix residual = all_gather(group.residual_shards, shards);
            const NormResult oracle = rmsnorm_residual(reduced, residual, params);

            RankGroup parallel_group = group;
            const TokenMatrix fused = fused_allreduce_rmsnorm(group, params, shards, false);
            const TokenMatrix fused_parallel =
                fused_allreduce_rmsnorm(parallel_group, params, shards, true);
            for (std::size_t i = 0; i < fused.values.size(); ++i) {
              max_err = std::max(
                  max_err, static_cast<double>(std::abs(fused.values[i] - oracle.output.values[i])));
              if (fused.values[i] != fused_parallel.values[i]) parallel_identical = false;
            }
            // Residual shards must hold the pre-normalization sums.
            const TokenMatrix post_residual = all_gather(group.residual_shards, shards);
            for (std::size_t i = 0; i < post_residual.values.size(); ++i) {
              max_err = std::max(max_err,
                                 static_cast<double>(std::abs(post_residual.values[i] -
                                                              oracle.residual_out.values[i])));
            }
          }
        }
      }
    }
    check(max_err <= 1e-5, "fused-vs-oracle", "max_abs_err=" + fmt(max_err, 9));
    check(parallel_identical, "fused-parallel-bitwise", "");
  }

  // ReduceScatter + AllGather composes to AllReduce exactly.
  {
    std::mt19937_64 rng(config.seed + 101);
    RankGroup group = random_group(4, 37, 64, rng);
    const ShardMap shards = token_shard_map(37, 4);
    const TokenMatrix via_rs = all_gather(reduce_scatter(group, shards), shards);
    const TokenMatrix via_ar = all_reduce(group);
    bool equal = via_rs.values == via_ar.values;
    check(equal, "reducescatter-allgather-composition", "");
  }

  // Shard maps cover [0, T) contiguously with balanced sizes.
  {
    bool ok = true;
    std::mt19937_64 rng(config.seed + 202);
    std::uniform_int_distribution<std::int64_t> tdist(0, 4096);
    for (int i = 0; i < 200 && ok; ++i) {
      const std::int64_t tokens = tdist(rng);
      for (int world : {2, 3, 4, 8}) {
        const ShardMap map = token_shard_map(tokens, world);
        try {
          map.validate(tokens);
        } catch (const ContractError&) {
          ok = false;
        }
        for (const TokenRange& r : map.ranges) {
          if (r.size() < tokens / world || r.size() > tokens / world + 1) ok = false;
        }
      }
    }
    check(ok, "shard-map-coverage", "");
  }

  // Deliberate shard-map corruption must be rejected.
  if (config.inject_shard_fault) {
    std::mt19937_64 rng(config.seed + 303);
    RankGroup group = random_group(2, 16, 16, rng);
    const NormParams params = random_norm(16, rng);
    ShardMap corrupt = token_shard_map(16, 2);
    corrupt.ranges[1].begin -= 1;  // overlap with rank 0
    bool threw = false;
    std::string message;
    try {
      fused_allreduce_rmsnorm(group, params, corrupt, false);
    } catch (const ContractError& e) {
      threw = true;
      message = e.what();
    }
    check(false, "injected-shard-fault",
          threw ? ("rejected as expected: " + message) : "corruption was NOT detected");
  }

  // Wave-model worked example: 300 CTAs on 132 SMs.
  {
    HardwareProfile narrow;
    narrow.tile_tokens = 128;
    narrow.cta_columns = 4;
    const std::int64_t tokens = 9600;  // 75 row tiles x 4 columns = 300 CTAs
    const std::int64_t unsplit = wave_count(cta_count(tokens, narrow), narrow.num_sms);
    const std::int64_t equal = wave_count(cta_count(tokens / 2, narrow), narrow.num_sms) * 2;
    const std::int64_t offset = smart_offset_analytic(tokens, narrow);
    const std::int64_t prefix = tokens / 2 + offset;
    const std::int64_t smart = wave_count(cta_count(prefix, narrow), narrow.num_sms) +
                               wave_count(cta_count(tokens - prefix, narrow), narrow.num_sms);
    check(unsplit == 3 && equal == 4 && smart == 3 && cta_count(prefix, narrow) == 132,
          "smart-split-worked-example",
          "unsplit=" + std::to_string(unsplit) + " equal=" + std::to_string(equal) +
              " smart=" + std::to_string(smart) +
              " prefix_ctas=" + std::to_string(cta_count(prefix, narrow)));
  }

  // Smart split never uses more waves than the equal split.
  {
    const HardwareProfile profile = resolve_profile(config.profile);
    bool ok = true;
    for (std::int64_t tokens = 256; tokens <= 16384; tokens += profile.tile_tokens) {
      const std::int64_t offset = smart_offset_analytic(tokens, profile);
      const std::int64_t prefix = tokens / 2 + offset;
      const std::int64_t smart = wave_count(cta_count(prefix, profile), profile.num_sms) +
                                 wave_count(cta_count(tokens - prefix, profile), profile.num_sms);
      const std::int64_t equal =
          wave_count(cta_count(tokens / 2, profile), profile.num_sms) +
          wave_count(cta_count(tokens - tokens / 2, profile), profile.num_sms);
      if (smart > equal) ok = false;
    }
    check(ok, "smart-split-no-regression", "");
  }

  // Scheduler invariants on the configured preset.
  {
    const HardwareProfile profile = resolve_profile(config.profile);
    const ModelPreset preset = configured_preset(config);
    BatchShape batch;
    batch.total_tokens = 8192;

    const Timeline nocomm =
        iteration_timeline(batch, preset.spec, profile, BaselineMode::NoComm, preset.policy);
    bool no_collectives = true;
    double makespan = 0.0;
    bool acyclic = true;
    for (const StreamEvent& e : nocomm.events) {
      if (e.stream == StreamId::Comm) no_collectives = false;
      makespan = std::max(makespan, e.end);
      for (int d : e.depends_on) {
        if (d >= e.id) acyclic = false;
      }
    }
    check(no_collectives, "nocomm-has-no-collectives", "");
    check(acyclic, "timeline-acyclic", "");
    check(std::abs(nocomm.iteration_latency - (makespan + profile.nonlayer_overhead)) < 1e-12,
          "latency-is-makespan", "");

    // FuseOnly vs Multimem: the gap is exactly the per-collective savings.
    const double multimem =
        iteration_latency(batch, preset.spec, profile, BaselineMode::Multimem, preset.policy);
    const double fuseonly =
        iteration_latency(batch, preset.spec, profile, BaselineMode::FuseOnly, preset.policy);
    const double ar = collective_time(CollectiveKind::AllReduce, batch.total_tokens,
                                      preset.spec.hidden, profile.collective_sms, profile)
                          .duration;
    const double rms =
        rmsnorm_time(batch.total_tokens, preset.spec.hidden, profile, false).duration;
    const double fused = collective_time(CollectiveKind::FusedARNorm, batch.total_tokens,
                                         preset.spec.hidden, profile.collective_sms, profile)
                             .duration;
    const double tail = collective_time(CollectiveKind::AllGather, batch.total_tokens,
                                        preset.spec.hidden, profile.collective_sms, profile)
                            .duration +
                        rms;
    const double expected_gap =
        2.0 * preset.spec.num_layers * (ar + rms - fused) - tail;
    check(std::abs((multimem - fuseonly) - expected_gap) < 1e-9, "fuseonly-gap-identity",
          "gap=" + fmt((multimem - fuseonly) * 1e3, 6) + "ms expected=" +
              fmt(expected_gap * 1e3, 6) + "ms");

    const double tokenweave =
        iteration_latency(batch, preset.spec, profile, BaselineMode::TokenWeave, preset.policy);
    check(tokenweave <= fuseonly + 1e-12, "overlap-dominates-fuseonly",
          "tw=" + fmt(tokenweave * 1e3, 4) + "ms fo=" + fmt(fuseonly * 1e3, 4) + "ms");
  }

  result.exit_code = failures == 0 ? 0 : 1;
  report << (failures == 0 ? "OK" : "FAILED") << "  (" << failures << " failures)\n";
  result.report = report.str();
  json j{{"failures", failures}};
  result.json = j.dump(2);
  return result;
}

CommandResult cmd_microbench(const RunConfig& config) {
  const HardwareProfile profile = resolve_profile(config.profile);
  const CalibrationTable table =
      profile.name == "b200" ? b200_microbench_table() : h100_microbench_table();
  std::vector<std::int64_t> tokens;
  for (const CalibrationPoint& p : table.series.at("allreduce")) tokens.push_back(p.tokens);

  std::vector<double> ar_us, rms_us, sum_us, fused_us, speedup;
  for (std::int64_t t : tokens) {
    const double ar = collective_time(CollectiveKind::AllReduce, t, profile.calib_hidden,
                                      profile.collective_sms, profile)
                          .duration *
                      1e6;
    const double rms = rmsnorm_time(t, profile.calib_hidden, profile, false).duration * 1e6;
    const double fused = collective_time(CollectiveKind::FusedARNorm, t, profile.calib_hidden,
                                         profile.collective_sms, profile)
                             .duration *
                         1e6;
    ar_us.push_back(ar);
    rms_us.push_back(rms);
    sum_us.push_back(ar + rms);
    fused_us.push_back(fused);
    speedup.push_back((ar + rms) / fused);
  }

  std::ostringstream csv;
  csv << "series,unit";
  for (std::int64_t t : tokens) csv << "," << t;
  csv << "\n";
  auto row = [&](const std::string& name, const std::string& unit, const std::vector<double>& vals,
                 int precision) {
    csv << name << "," << unit;
    for (double v : vals) csv << "," << fmt(v, precision);
    csv << "\n";
  };
  row("allreduce", "us", ar_us, 2);
  row("rmsnorm", "us", rms_us, 2);
  row("ar_plus_rmsnorm", "us", sum_us, 2);
  row("fused", "us", fused_us, 2);
  row("speedup", "x", speedup, 3);

  json j{{"profile", profile.name}, {"tokens", tokens},       {"allreduce_us", ar_us},
         {"rmsnorm_us", rms_us},    {"ar_plus_rmsnorm_us", sum_us}, {"fused_us", fused_us},
         {"speedup", speedup}};

  CommandResult result;
  result.csv = csv.str();
  result.json = j.dump(2);
  result.report = "microbench: profile=" + profile.name + " points=" +
                  std::to_string(tokens.size()) + "\n";
  return result;
}

CommandResult cmd_latency(const RunConfig& config) {
  const HardwareProfile profile = resolve_profile(config.profile);
  const ModelPreset preset = configured_preset(config);

  std::ostringstream csv;
  csv << "tokens,default_ms,multimem_ms,nocomm_ms,fuseonly_ms,tokenweave_ms,"
         "tokenweave_speedup_x,fuseonly_speedup_x";
  if (config.equal_split) csv << ",equalsplit_ms,equalsplit_speedup_x";
  csv << "\n";

  json rows = json::array();
  for (std::int64_t tokens : config.token_sweep) {
    BatchShape batch;
    batch.total_tokens = tokens;
    auto latency = [&](BaselineMode mode) {
      return iteration_latency(batch, preset.spec, profile, mode, preset.policy);
    };
    const double def = latency(BaselineMode::Default);
    const double multimem = latency(BaselineMode::Multimem);
    const double nocomm = latency(BaselineMode::NoComm);
    const double fuseonly = latency(BaselineMode::FuseOnly);
    const double tokenweave = latency(BaselineMode::TokenWeave);

    csv << tokens << "," << fmt(def * 1e3, 4) << "," << fmt(multimem * 1e3, 4) << ","
        << fmt(nocomm * 1e3, 4) << "," << fmt(fuseonly * 1e3, 4) << ","
        << fmt(tokenweave * 1e3, 4) << "," << fmt(multimem / tokenweave, 3) << ","
        << fmt(multimem / fuseonly, 3);
    json row{{"tokens", tokens},
             {"default_s", def},
             {"multimem_s", multimem},
             {"nocomm_s", nocomm},
             {"fuseonly_s", fuseonly},
             {"tokenweave_s", tokenweave},
             {"tokenweave_speedup", multimem / tokenweave},
             {"fuseonly_speedup", multimem / fuseonly}};
    if (config.equal_split) {
      SplitPlan plan;
      plan.total_tokens = tokens;
      plan.prefix_tokens = tokens / 2;
      plan.suffix_tokens = tokens - tokens / 2;
      plan.offset = 0;
      plan.mode = plan.suffix_tokens > 0 && select_mode(tokens, preset.policy) == SplitMode::Overlap
                      ? SplitMode::Overlap
                      : SplitMode::FusedOnly;
      const double equal_split = iteration_timeline(batch, preset.spec, profile,
                                                    BaselineMode::TokenWeave, preset.policy, &plan)
                                     .iteration_latency;
      csv << "," << fmt(equal_split * 1e3, 4) << "," << fmt(multimem / equal_split, 3);
      row["equalsplit_s"] = equal_split;
      row["equalsplit_speedup"] = multimem / equal_split;
    }
    csv << "\n";
    rows.push_back(std::move(row));
  }

  json j{{"profile", profile.name}, {"model", preset.name}, {"rows", rows}};
  CommandResult result;
  result.csv = csv.str();
  result.json = j.dump(2);
  result.report = "latency: model=" + preset.name + " profile=" + profile.name + " points=" +
                  std::to_string(config.token_sweep.size()) + "\n";
  return result;
}

CommandResult cmd_throughput(const RunConfig& config) {
  const HardwareProfile profile = resolve_profile(config.profile);
  const ModelPreset preset = configured_preset(config);

  std::vector<std::pair<std::string, std::vector<Request>>> traces;
  if (!config.trace.empty()) {
    traces.emplace_back(config.trace, load_trace(config.trace));
  } else {
    traces.emplace_back("fixed-2048x128", synth_trace(64, 2048, 128));
    traces.emplace_back("chatlike", chatlike_trace(96, config.seed));
  }

  const BaselineMode modes[] = {BaselineMode::Default, BaselineMode::Multimem,
                                BaselineMode::NoComm, BaselineMode::FuseOnly,
                                BaselineMode::TokenWeave};

  std::ostringstream csv;
  csv << "trace,mode,tokens_per_sec,iterations,mean_iteration_latency_ms,total_tokens\n";
  json rows = json::array();
  for (const auto& [name, requests] : traces) {
    for (BaselineMode mode : modes) {
      const ThroughputResult r = simulate_throughput(requests, preset.spec, profile, mode,
                                                     preset.policy, config.chunk_size);
      csv << name << "," << to_string(mode) << "," << fmt(r.tokens_per_sec, 2) << ","
          << r.iterations << "," << fmt(r.mean_iteration_latency * 1e3, 4) << ","
          << r.total_tokens << "\n";
      rows.push_back({{"trace", name},
                      {"mode", to_string(mode)},
                      {"tokens_per_sec", r.tokens_per_sec},
                      {"iterations", r.iterations},
                      {"mean_iteration_latency_s", r.mean_iteration_latency},
                      {"total_tokens", r.total_tokens}});
    }
  }

  json j{{"profile", profile.name},
         {"model", preset.name},
         {"chunk_size", config.chunk_size},
         {"rows", rows}};
  CommandResult result;
  result.csv = csv.str();
  result.json = j.dump(2);
  result.report = "throughput: model=" + preset.name + " chunk=" +
                  std::to_string(config.chunk_size) + " traces=" +
                  std::to_string(traces.size()) + "\n";
  return result;
}

CommandResult cmd_calibrate(const RunConfig& config) {
  CalibrationTable table;
  if (!config.table.empty()) {
    table = CalibrationTable::from_json_file(config.table);
  } else {
    table = config.profile == "b200" ? b200_microbench_table() : h100_microbench_table();
  }
  HardwareProfile base;
  if (config.profile == "b200") {
    base.name = "b200";
    base.num_sms = 148;
    base.sm_flops = 8.4e12;
  }
  CalibrationReport fit;
  const HardwareProfile profile = calibrate(table, base, &fit);

  std::ostringstream csv;
  csv << "series,intercept_us,slope_us_per_token,max_rel_residual\n";
  csv << "allreduce," << fmt(fit.allreduce.intercept_us, 4) << ","
      << fmt(fit.allreduce.slope_us_per_token, 6) << "," << fmt(fit.max_allreduce_residual, 4)
      << "\n";
  csv << "rmsnorm," << fmt(fit.rmsnorm.intercept_us, 4) << ","
      << fmt(fit.rmsnorm.slope_us_per_token, 6) << "," << fmt(fit.max_rmsnorm_residual, 4) << "\n";
  if (fit.has_fused) {
    csv << "fused," << fmt(fit.fused.intercept_us, 4) << ","
        << fmt(fit.fused.slope_us_per_token, 6) << "," << fmt(fit.max_speedup_deviation, 4)
        << "\n";
  }

  json j{{"profile", profile.name},
         {"collective_base_latency", profile.collective_base_latency},
         {"collective_per_token_time", profile.collective_per_token_time},
         {"rmsnorm_base_latency", profile.rmsnorm_base_latency},
         {"fused_extra_latency", profile.fused_extra_latency},
         {"hbm_bandwidth_effective", profile.hbm_bandwidth_effective},
         {"max_allreduce_residual", fit.max_allreduce_residual},
         {"max_rmsnorm_residual", fit.max_rmsnorm_residual},
         {"max_speedup_deviation", fit.max_speedup_deviation}};

  std::ostringstream report;
  report << "calibrated profile " << profile.name << "\n"
         << "  allreduce: " << fmt(fit.allreduce.intercept_us, 3) << "us + "
         << fmt(fit.allreduce.slope_us_per_token, 5) << "us/token, max residual "
         << fmt(fit.max_allreduce_residual * 100.0, 1) << "%\n"
         << "  rmsnorm:   " << fmt(fit.rmsnorm.intercept_us, 3) << "us + "
         << fmt(fit.rmsnorm.slope_us_per_token, 5) << "us/token, max residual "
         << fmt(fit.max_rmsnorm_residual * 100.0, 1) << "%\n";
  if (fit.has_fused) {
    report << "  speedup row max deviation " << fmt(fit.max_speedup_deviation, 3) << "\n";
  }

  CommandResult result;
  result.csv = csv.str();
  result.json = j.dump(2);
  result.report = report.str();
  if (!config.out.empty()) {
    profile_to_json_file(profile, config.out + ".profile.json");
    result.report += "wrote " + config.out + ".profile.json\n";
  }
  return result;
}

}  // namespace weavesim
