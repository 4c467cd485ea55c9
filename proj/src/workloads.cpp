#include "weavesim/workloads.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "weavesim/errors.hpp"

namespace weavesim {

using nlohmann::json;

std::vector<Request> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace: " + path);
  std::vector<Request> requests;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("trace " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    Request r;
    r.id = static_cast<std::int64_t>(requests.size());
    if (!j.contains("prompt_tokens") || !j.contains("output_tokens")) {
      throw ParseError("trace " + path + " line " + std::to_string(line_no) +
                       ": prompt_tokens and output_tokens are required");
    }
    r.prompt_tokens = j["prompt_tokens"].get<std::int64_t>();
    r.output_tokens = j["output_tokens"].get<std::int64_t>();
    r.arrival_s = j.value("arrival_s", 0.0);
    if (r.prompt_tokens < 1 || r.output_tokens < 0 || r.arrival_s < 0.0) {
      throw ParseError("trace " + path + " line " + std::to_string(line_no) +
                       ": values out of range");
    }
    requests.push_back(r);
  }
  return requests;
}

void save_trace(const std::vector<Request>& requests, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write trace: " + path);
  for (const Request& r : requests) {
    json j{{"prompt_tokens", r.prompt_tokens}, {"output_tokens", r.output_tokens}};
    if (r.arrival_s > 0.0) j["arrival_s"] = r.arrival_s;
    out << j.dump() << "\n";
  }
}

std::vector<Request> synth_trace(std::int64_t count, std::int64_t prompt_len,
                                 std::int64_t output_len) {
  if (count < 1 || prompt_len < 1 || output_len < 0) {
    throw ConfigError("synth_trace: count and prompt_len must be positive");
  }
  std::vector<Request> requests;
  requests.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    requests.push_back({i, prompt_len, output_len, 0.0});
  }
  return requests;
}

std::vector<IterationBatch> form_batches(const std::vector<Request>& requests,
                                         std::int64_t chunk_size) {
  if (chunk_size < 1) throw ConfigError("form_batches: chunk_size must be >= 1");
  struct State {
    std::int64_t prefilled = 0;
    std::int64_t decoded = 0;
  };
  std::vector<std::size_t> order(requests.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return requests[a].arrival_s < requests[b].arrival_s;
  });

  std::vector<State> state(requests.size());
  std::vector<IterationBatch> batches;
  for (;;) {
    IterationBatch batch;
    // Decode-first: one token per request whose prefill has completed.
    for (std::size_t i : order) {
      const Request& r = requests[i];
      State& s = state[i];
      if (s.prefilled == r.prompt_tokens && s.decoded < r.output_tokens) {
        ++s.decoded;
        ++batch.decode_token_count;
        batch.kv_context += r.prompt_tokens + s.decoded - 1;
      }
    }
    // Then prefill chunks, FCFS, up to the token budget.
    std::int64_t budget = chunk_size - batch.decode_token_count;
    for (std::size_t i : order) {
      if (budget <= 0) break;
      const Request& r = requests[i];
      State& s = state[i];
      if (s.prefilled == r.prompt_tokens) continue;
      const std::int64_t take = std::min(budget, r.prompt_tokens - s.prefilled);
      batch.prefill_token_slices.push_back({r.id, s.prefilled, take});
      batch.kv_context += s.prefilled;
      s.prefilled += take;
      budget -= take;
    }
    batch.total_tokens = batch.decode_token_count;
    for (const PrefillSlice& slice : batch.prefill_token_slices) batch.total_tokens += slice.len;
    if (batch.total_tokens == 0) break;
    batches.push_back(std::move(batch));
  }
  return batches;
}

ThroughputResult simulate_throughput(const std::vector<Request>& requests, const LayerSpec& spec,
                                     const HardwareProfile& profile, BaselineMode mode,
                                     const SplitPolicy& policy, std::int64_t chunk_size) {
  const std::vector<IterationBatch> batches = form_batches(requests, chunk_size);
  ThroughputResult result;
  result.iteration_latencies.reserve(batches.size());
  for (const IterationBatch& batch : batches) {
    BatchShape shape;
    shape.total_tokens = batch.total_tokens;
    shape.kv_context = batch.kv_context;
    shape.decode_only = batch.decode_only();
    const double latency = iteration_latency(shape, spec, profile, mode, policy);
    result.iteration_latencies.push_back(latency);
    result.total_seconds += latency;
    result.total_tokens += batch.total_tokens;
  }
  result.iterations = static_cast<std::int64_t>(batches.size());
  if (result.total_seconds > 0.0) {
    result.tokens_per_sec = static_cast<double>(result.total_tokens) / result.total_seconds;
  }
  if (result.iterations > 0) {
    result.mean_iteration_latency = result.total_seconds / static_cast<double>(result.iterations);
  }
  return result;
}

}  // namespace weavesim
