#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numeric>

#include "weavesim/errors.hpp"
#include "weavesim/presets.hpp"
#include "weavesim/workloads.hpp"

using namespace weavesim;

TEST_CASE("trace JSONL round trip") {
  const std::string path = "test_trace_roundtrip.jsonl";
  std::vector<Request> requests = {{0, 100, 10, 0.0}, {1, 2048, 128, 0.5}, {2, 1, 0, 1.25}};
  save_trace(requests, path);
  const std::vector<Request> loaded = load_trace(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].prompt_tokens == requests[i].prompt_tokens);
    CHECK(loaded[i].output_tokens == requests[i].output_tokens);
    CHECK(loaded[i].arrival_s == requests[i].arrival_s);
  }
  std::remove(path.c_str());
}

TEST_CASE("trace parsing reports the offending line") {
  const std::string path = "test_trace_bad.jsonl";
  {
    std::ofstream out(path);
    out << R"({"prompt_tokens": 10, "output_tokens": 2})" << "\n";
    out << "not json\n";
  }
  try {
    load_trace(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << R"({"prompt_tokens": 10})" << "\n";
  }
  CHECK_THROWS_AS(load_trace(path), ParseError);
  {
    std::ofstream out(path);
    out << R"({"prompt_tokens": 0, "output_tokens": 2})" << "\n";
  }
  CHECK_THROWS_AS(load_trace(path), ParseError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_trace("missing_trace.jsonl"), ParseError);
}

TEST_CASE("batch formation conserves every prompt and output token") {
  const std::vector<Request> requests = synth_trace(16, 1000, 37);
  const std::vector<IterationBatch> batches = form_batches(requests, 512);

  std::int64_t prefill = 0, decode = 0;
  for (const IterationBatch& b : batches) {
    std::int64_t slice_sum = 0;
    for (const PrefillSlice& s : b.prefill_token_slices) slice_sum += s.len;
    CHECK(b.total_tokens == slice_sum + b.decode_token_count);
    prefill += slice_sum;
    decode += b.decode_token_count;
  }
  CHECK(prefill == 16 * 1000);
  CHECK(decode == 16 * 37);
}

TEST_CASE("prefill chunks respect the token budget after decode priority") {
  const std::vector<Request> requests = synth_trace(8, 4096, 64);
  for (const IterationBatch& b : form_batches(requests, 1024)) {
    std::int64_t slice_sum = 0;
    for (const PrefillSlice& s : b.prefill_token_slices) slice_sum += s.len;
    CHECK(slice_sum <= 1024);
    CHECK(b.total_tokens <= 1024 + b.decode_token_count);
  }
}

TEST_CASE("prefill proceeds FCFS and decode-only batches close out the run") {
  const std::vector<Request> requests = synth_trace(4, 100, 5);
  const std::vector<IterationBatch> batches = form_batches(requests, 250);
  REQUIRE(!batches.empty());
  // First batch: requests 0 and 1 fully, half of request 2.
  REQUIRE(batches[0].prefill_token_slices.size() == 3);
  CHECK(batches[0].prefill_token_slices[0].request_id == 0);
  CHECK(batches[0].prefill_token_slices[1].request_id == 1);
  CHECK(batches[0].prefill_token_slices[2].request_id == 2);
  CHECK(batches[0].prefill_token_slices[2].len == 50);
  CHECK(batches[0].decode_token_count == 0);
  // Later batches decode requests whose prefill completed earlier.
  CHECK(batches[1].decode_token_count == 2);
  // The tail is decode-only.
  CHECK(batches.back().decode_only());
  CHECK(batches.back().prefill_token_slices.empty());
}

TEST_CASE("arrival order breaks FCFS ties stably") {
  std::vector<Request> requests = {{0, 100, 0, 2.0}, {1, 100, 0, 0.0}, {2, 100, 0, 2.0}};
  const std::vector<IterationBatch> batches = form_batches(requests, 100);
  CHECK(batches[0].prefill_token_slices[0].request_id == 1);
  CHECK(batches[1].prefill_token_slices[0].request_id == 0);
  CHECK(batches[2].prefill_token_slices[0].request_id == 2);
}

TEST_CASE("kv context counts prior tokens for decodes and chunk starts for prefills") {
  const std::vector<Request> requests = synth_trace(1, 300, 3);
  const std::vector<IterationBatch> batches = form_batches(requests, 100);
  REQUIRE(batches.size() == 6);  // 3 prefill chunks + 3 decode steps
  CHECK(batches[0].kv_context == 0);
  CHECK(batches[1].kv_context == 100);
  CHECK(batches[2].kv_context == 200);
  CHECK(batches[3].kv_context == 300);  // first decode: full prompt behind it
  CHECK(batches[4].kv_context == 301);
  CHECK(batches[5].kv_context == 302);
}

TEST_CASE("empty chunk size and bad synth parameters are rejected") {
  CHECK_THROWS_AS(form_batches({}, 0), ConfigError);
  CHECK_THROWS_AS(synth_trace(0, 100, 10), ConfigError);
  CHECK_THROWS_AS(synth_trace(4, 0, 10), ConfigError);
}

TEST_CASE("throughput accounting is self-consistent") {
  const ModelPreset preset = model_preset("llama-70b");
  const HardwareProfile profile = builtin_profile("h100");
  const std::vector<Request> requests = synth_trace(8, 2048, 16);

  const ThroughputResult r = simulate_throughput(requests, preset.spec, profile,
                                                 BaselineMode::TokenWeave, preset.policy, 2048);
  CHECK(r.total_tokens == 8 * (2048 + 16));
  CHECK(r.iterations == static_cast<std::int64_t>(r.iteration_latencies.size()));
  const double sum =
      std::accumulate(r.iteration_latencies.begin(), r.iteration_latencies.end(), 0.0);
  CHECK(r.total_seconds == doctest::Approx(sum).epsilon(1e-12));
  CHECK(r.tokens_per_sec == doctest::Approx(r.total_tokens / r.total_seconds).epsilon(1e-12));
}

TEST_CASE("removing communication can only help throughput") {
  const ModelPreset preset = model_preset("llama-70b");
  const HardwareProfile profile = builtin_profile("h100");
  const std::vector<Request> requests = synth_trace(8, 2048, 32);
  const double nocomm = simulate_throughput(requests, preset.spec, profile, BaselineMode::NoComm,
                                            preset.policy, 2048)
                            .tokens_per_sec;
  const double multimem = simulate_throughput(requests, preset.spec, profile,
                                              BaselineMode::Multimem, preset.policy, 2048)
                              .tokens_per_sec;
  CHECK(nocomm >= multimem);
}

TEST_CASE("a single chunk-sized request is one prefill iteration plus its decodes") {
  const ModelPreset preset = model_preset("llama-70b");
  const HardwareProfile profile = builtin_profile("h100");
  const std::vector<Request> requests = synth_trace(1, 2048, 4);
  const std::vector<IterationBatch> batches = form_batches(requests, 2048);
  REQUIRE(batches.size() == 5);
  CHECK(batches[0].total_tokens == 2048);
  for (std::size_t i = 1; i < 5; ++i) {
    CHECK(batches[i].decode_only());
    CHECK(batches[i].total_tokens == 1);
  }
}
