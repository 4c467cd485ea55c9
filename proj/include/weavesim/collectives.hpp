#pragma once

#include <cstdint>
#include <vector>

#include "weavesim/numerics.hpp"

namespace weavesim {

struct TokenRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // half-open

  std::int64_t size() const { return end - begin; }
  bool operator==(const TokenRange&) const = default;
};

// Contiguous ascending per-rank token ranges covering [0, T). Boundaries are
// whole-token boundaries by construction; a range may be empty when T < N.
struct ShardMap {
  std::vector<TokenRange> ranges;

  std::int64_t total_tokens() const;
  int world_size() const { return static_cast<int>(ranges.size()); }

  // Throws ContractError unless ranges are contiguous, ascending and cover
  // [0, total) exactly.
  void validate(std::int64_t total) const;
};

// Rank r owns floor(T/N) tokens, the first (T mod N) ranks one extra.
ShardMap token_shard_map(std::int64_t num_tokens, int world_size);

// N simulated tensor-parallel ranks with in-process buffers. The residual is
// stored token-sharded: rank r holds only its owned rows.
struct RankGroup {
  int world_size = 0;
  std::vector<TokenMatrix> inputs;           // one per rank, identical shape
  std::vector<TokenMatrix> residual_shards;  // one per rank, shard-shaped

  std::int64_t num_tokens() const { return inputs.empty() ? 0 : inputs[0].num_tokens; }
  std::int64_t hidden() const { return inputs.empty() ? 1 : inputs[0].hidden; }

  void validate() const;
  void validate_residual(const ShardMap& shards) const;
};

// Elementwise sum over all rank inputs, rank-0-to-(N-1) ascending order.
TokenMatrix all_reduce(const RankGroup& group);

// Per-rank slices of the sum, restricted to each rank's owned token rows.
std::vector<TokenMatrix> reduce_scatter(const RankGroup& group, const ShardMap& shards);

// Concatenate shards in token order into the replicated matrix.
TokenMatrix all_gather(const std::vector<TokenMatrix>& per_rank_shards, const ShardMap& shards);

// Fused AllReduce + residual-add + RMSNorm. Semantically identical to
// rmsnorm_residual(all_reduce(group), gathered residual): each rank reduces
// its owned token rows, adds its residual shard, normalizes, and the output
// is replicated (the AllGather step). Residual shards are overwritten with
// the pre-normalization sums. With parallel=true ranks run on worker threads;
// results are bitwise identical to the sequential mode.
TokenMatrix fused_allreduce_rmsnorm(RankGroup& group, const NormParams& params,
                                    const ShardMap& shards, bool parallel = false);

}  // namespace weavesim
