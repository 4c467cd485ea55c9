#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weavesim/scheduler.hpp"

namespace weavesim {

struct Request {
  std::int64_t id = 0;
  std::int64_t prompt_tokens = 1;
  std::int64_t output_tokens = 0;
  double arrival_s = 0.0;  // 0 for offline throughput runs
};

// Trace file: line-delimited JSON, one object per request:
//   {"prompt_tokens": int, "output_tokens": int, "arrival_s": float?}
std::vector<Request> load_trace(const std::string& path);
void save_trace(const std::vector<Request>& requests, const std::string& path);

std::vector<Request> synth_trace(std::int64_t count, std::int64_t prompt_len,
                                 std::int64_t output_len);

struct PrefillSlice {
  std::int64_t request_id = 0;
  std::int64_t start = 0;
  std::int64_t len = 0;
};

struct IterationBatch {
  std::vector<PrefillSlice> prefill_token_slices;
  std::int64_t decode_token_count = 0;
  std::int64_t total_tokens = 0;
  std::int64_t kv_context = 0;  // prior-context tokens read this iteration

  bool decode_only() const { return prefill_token_slices.empty(); }
};

// FCFS chunked-prefill batch formation. Each iteration packs one decode token
// per active request first (decode-first priority), then prefill chunks of
// waiting/partial requests up to chunk_size tokens.
std::vector<IterationBatch> form_batches(const std::vector<Request>& requests,
                                         std::int64_t chunk_size);

struct ThroughputResult {
  double tokens_per_sec = 0.0;
  std::int64_t iterations = 0;
  std::int64_t total_tokens = 0;
  double total_seconds = 0.0;
  double mean_iteration_latency = 0.0;
  std::vector<double> iteration_latencies;
};

// Drives form_batches and feeds each batch to the scheduler; the requested
// mode degrades per batch via the split policy (decode-only and
// below-threshold batches run FuseOnly when mode is TokenWeave).
ThroughputResult simulate_throughput(const std::vector<Request>& requests, const LayerSpec& spec,
                                     const HardwareProfile& profile, BaselineMode mode,
                                     const SplitPolicy& policy, std::int64_t chunk_size);

}  // namespace weavesim
