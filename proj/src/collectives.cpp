#include "weavesim/collectives.hpp"

#include <cmath>
#include <thread>

#include "weavesim/errors.hpp"

namespace weavesim {

std::int64_t ShardMap::total_tokens() const {
  return ranges.empty() ? 0 : ranges.back().end;
}

void ShardMap::validate(std::int64_t total) const {
  if (ranges.empty()) throw ContractError("ShardMap: no ranges");
  std::int64_t cursor = 0;
  for (const TokenRange& r : ranges) {
    if (r.begin != cursor || r.end < r.begin) {
      throw ContractError("ShardMap: ranges must be contiguous, ascending, disjoint");
    }
    cursor = r.end;
  }
  if (cursor != total) throw ContractError("ShardMap: ranges must cover [0, T)");
}

ShardMap token_shard_map(std::int64_t num_tokens, int world_size) {
  if (world_size < 2) throw ConfigError("token_shard_map: world_size must be >= 2");
  if (num_tokens < 0) throw DimensionError("token_shard_map: negative token count");
  ShardMap map;
  const std::int64_t base = num_tokens / world_size;
  const std::int64_t extra = num_tokens % world_size;
  std::int64_t cursor = 0;
  for (int r = 0; r < world_size; ++r) {
    const std::int64_t len = base + (r < extra ? 1 : 0);
    map.ranges.push_back({cursor, cursor + len});
    cursor += len;
  }
  return map;
}

void RankGroup::validate() const {
  if (world_size < 2) throw ConfigError("RankGroup: world_size must be >= 2");
  if (static_cast<int>(inputs.size()) != world_size) {
    throw DimensionError("RankGroup: one input buffer per rank required");
  }
  for (const TokenMatrix& m : inputs) {
    m.validate();
    if (!m.same_shape(inputs[0])) {
      throw DimensionError("RankGroup: per-rank input shapes differ");
    }
  }
}

void RankGroup::validate_residual(const ShardMap& shards) const {
  shards.validate(num_tokens());
  if (shards.world_size() != world_size) {
    throw ContractError("RankGroup: shard map world size mismatch");
  }
  if (static_cast<int>(residual_shards.size()) != world_size) {
    throw DimensionError("RankGroup: one residual shard per rank required");
  }
  for (int r = 0; r < world_size; ++r) {
    residual_shards[r].validate();
    if (residual_shards[r].num_tokens != shards.ranges[r].size() ||
        residual_shards[r].hidden != hidden()) {
      throw DimensionError("RankGroup: residual shard shape does not match shard map");
    }
  }
}

namespace {

// Rank-ascending float sum of one element across all rank inputs.
inline float reduce_element(const RankGroup& group, std::int64_t flat_index) {
  float acc = 0.0f;
  for (const TokenMatrix& m : group.inputs) acc += m.values[flat_index];
  return acc;
}

}  // namespace

TokenMatrix all_reduce(const RankGroup& group) {
  group.validate();
  TokenMatrix out = TokenMatrix::zeros(group.num_tokens(), group.hidden());
  const std::int64_t n = group.num_tokens() * group.hidden();
  for (std::int64_t i = 0; i < n; ++i) out.values[i] = reduce_element(group, i);
  return out;
}

std::vector<TokenMatrix> reduce_scatter(const RankGroup& group, const ShardMap& shards) {
  group.validate();
  shards.validate(group.num_tokens());
  const std::int64_t H = group.hidden();
  std::vector<TokenMatrix> out;
  out.reserve(shards.ranges.size());
  for (const TokenRange& range : shards.ranges) {
    TokenMatrix shard = TokenMatrix::zeros(range.size(), H);
    for (std::int64_t t = 0; t < range.size(); ++t) {
      for (std::int64_t j = 0; j < H; ++j) {
        shard.at(t, j) = reduce_element(group, (range.begin + t) * H + j);
      }
    }
    out.push_back(std::move(shard));
  }
  return out;
}

TokenMatrix all_gather(const std::vector<TokenMatrix>& per_rank_shards, const ShardMap& shards) {
  if (per_rank_shards.size() != shards.ranges.size()) {
    throw DimensionError("all_gather: shard count does not match shard map");
  }
  const std::int64_t total = shards.total_tokens();
  shards.validate(total);
  const std::int64_t H = per_rank_shards.empty() ? 1 : per_rank_shards[0].hidden;
  TokenMatrix out = TokenMatrix::zeros(total, H);
  for (std::size_t r = 0; r < per_rank_shards.size(); ++r) {
    const TokenRange& range = shards.ranges[r];
    const TokenMatrix& shard = per_rank_shards[r];
    if (shard.num_tokens != range.size() || shard.hidden != H) {
      throw DimensionError("all_gather: shard shape does not match its range");
    }
    for (std::int64_t t = 0; t < range.size(); ++t) {
      for (std::int64_t j = 0; j < H; ++j) out.at(range.begin + t, j) = shard.at(t, j);
    }
  }
  return out;
}

namespace {

// One rank's portion of the fused kernel: reduce owned rows across ranks,
// add the residual shard, normalize, write the replicated output rows and
// overwrite the residual shard with the pre-normalization sums.
void fused_rank_body(RankGroup& group, const NormParams& params, const TokenRange& range,
                     TokenMatrix& residual_shard, TokenMatrix& output) {
  const std::int64_t H = group.hidden();
  for (std::int64_t t = 0; t < range.size(); ++t) {
    const std::int64_t token = range.begin + t;
    double sum_sq = 0.0;
    for (std::int64_t j = 0; j < H; ++j) {
      float v = 0.0f;
      for (const TokenMatrix& m : group.inputs) v += m.at(token, j);
      const float r = v + residual_shard.at(t, j);
      residual_shard.at(t, j) = r;
      sum_sq += static_cast<double>(r) * static_cast<double>(r);
    }
    const float inv_rms =
        1.0f / std::sqrt(static_cast<float>(sum_sq / static_cast<double>(H)) + params.epsilon);
    for (std::int64_t j = 0; j < H; ++j) {
      output.at(token, j) = residual_shard.at(t, j) * inv_rms * params.weight[j];
    }
  }
}

}  // namespace

TokenMatrix fused_allreduce_rmsnorm(RankGroup& group, const NormParams& params,
                                    const ShardMap& shards, bool parallel) {
  group.validate();
  group.validate_residual(shards);
  if (static_cast<std::int64_t>(params.weight.size()) != group.hidden()) {
    throw DimensionError("fused_allreduce_rmsnorm: weight length must equal hidden size");
  }

  TokenMatrix output = TokenMatrix::zeros(group.num_tokens(), group.hidden());
  if (parallel) {
    std::vector<std::thread> workers;
    workers.reserve(group.world_size);
    for (int r = 0; r < group.world_size; ++r) {
      // Ranks write disjoint token rows; inputs are read-only snapshots.
      workers.emplace_back([&, r] {
        fused_rank_body(group, params, shards.ranges[r], group.residual_shards[r], output);
      });
    }
    for (std::thread& w : workers) w.join();
  } else {
    for (int r = 0; r < group.world_size; ++r) {
      fused_rank_body(group, params, shards.ranges[r], group.residual_shards[r], output);
    }
  }
  return output;
}

}  // namespace weavesim
