#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "weavesim/collectives.hpp"
#include "weavesim/errors.hpp"

using namespace weavesim;

namespace {

RankGroup random_group(int world, std::int64_t tokens, std::int64_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  RankGroup group;
  group.world_size = world;
  for (int r = 0; r < world; ++r) {
    TokenMatrix m = TokenMatrix::zeros(tokens, hidden);
    for (float& v : m.values) v = dist(rng);
    group.inputs.push_back(std::move(m));
  }
  for (const TokenRange& range : token_shard_map(tokens, world).ranges) {
    TokenMatrix m = TokenMatrix::zeros(range.size(), hidden);
    for (float& v : m.values) v = dist(rng);
    group.residual_shards.push_back(std::move(m));
  }
  return group;
}

NormParams unit_norm(std::int64_t hidden) {
  NormParams params;
  params.weight.assign(static_cast<std::size_t>(hidden), 1.0f);
  return params;
}

}  // namespace

TEST_CASE("token_shard_map balances whole-token ranges") {
  for (std::int64_t tokens : {0, 1, 7, 8, 100, 1023}) {
    for (int world : {2, 3, 4, 8}) {
      const ShardMap map = token_shard_map(tokens, world);
      CHECK(map.world_size() == world);
      CHECK(map.total_tokens() == tokens);
      CHECK_NOTHROW(map.validate(tokens));
      for (const TokenRange& r : map.ranges) {
        CHECK(r.size() >= tokens / world);
        CHECK(r.size() <= tokens / world + 1);
      }
    }
  }
  CHECK_THROWS_AS(token_shard_map(16, 1), ConfigError);
  CHECK_THROWS_AS(token_shard_map(-1, 4), DimensionError);
}

TEST_CASE("shard map validation rejects gaps, overlaps and bad coverage") {
  ShardMap map = token_shard_map(16, 4);
  CHECK_THROWS_AS(map.validate(17), ContractError);

  ShardMap overlap = token_shard_map(16, 4);
  overlap.ranges[2].begin -= 1;
  CHECK_THROWS_AS(overlap.validate(16), ContractError);

  ShardMap gap = token_shard_map(16, 4);
  gap.ranges[1].begin += 1;
  CHECK_THROWS_AS(gap.validate(16), ContractError);

  CHECK_THROWS_AS(ShardMap{}.validate(0), ContractError);
}

TEST_CASE("all_reduce equals elementwise sums") {
  RankGroup group = random_group(4, 9, 12, 5);
  const TokenMatrix sum = all_reduce(group);
  for (std::int64_t t = 0; t < 9; ++t) {
    for (std::int64_t j = 0; j < 12; ++j) {
      float expect = 0.0f;
      for (const TokenMatrix& m : group.inputs) expect += m.at(t, j);
      CHECK(sum.at(t, j) == expect);
    }
  }
}

TEST_CASE("reduce_scatter then all_gather reproduces all_reduce exactly") {
  for (std::int64_t tokens : {1, 7, 64, 129}) {
    RankGroup group = random_group(8, tokens, 16, 1000 + tokens);
    const ShardMap shards = token_shard_map(tokens, 8);
    const TokenMatrix direct = all_reduce(group);
    const TokenMatrix composed = all_gather(reduce_scatter(group, shards), shards);
    CHECK(direct.values == composed.values);
  }
}

TEST_CASE("fused collective matches the unfused oracle and updates residuals") {
  for (int world : {2, 4, 8}) {
    for (std::int64_t tokens : {1, 3, 17, 40}) {
      RankGroup group = random_group(world, tokens, 32, 77 * world + tokens);
      const ShardMap shards = token_shard_map(tokens, world);
      const NormParams params = unit_norm(32);

      const TokenMatrix reduced = all_reduce(group);
      const TokenMatrix residual = all_gather(group.residual_shards, shards);
      const NormResult oracle = rmsnorm_residual(reduced, residual, params);

      const TokenMatrix fused = fused_allreduce_rmsnorm(group, params, shards);
      REQUIRE(fused.values.size() == oracle.output.values.size());
      for (std::size_t i = 0; i < fused.values.size(); ++i) {
        CHECK(std::abs(fused.values[i] - oracle.output.values[i]) <= 1e-5);
      }
      const TokenMatrix updated = all_gather(group.residual_shards, shards);
      CHECK(updated.values == oracle.residual_out.values);
    }
  }
}

TEST_CASE("parallel rank execution is bitwise identical to sequential") {
  RankGroup sequential = random_group(8, 53, 24, 99);
  RankGroup parallel = sequential;
  const ShardMap shards = token_shard_map(53, 8);
  const NormParams params = unit_norm(24);
  const TokenMatrix a = fused_allreduce_rmsnorm(sequential, params, shards, false);
  const TokenMatrix b = fused_allreduce_rmsnorm(parallel, params, shards, true);
  CHECK(a.values == b.values);
  for (int r = 0; r < 8; ++r) {
    CHECK(sequential.residual_shards[r].values == parallel.residual_shards[r].values);
  }
}

TEST_CASE("group and residual validation catches malformed inputs") {
  RankGroup group = random_group(4, 8, 8, 3);
  const ShardMap shards = token_shard_map(8, 4);
  const NormParams params = unit_norm(8);

  RankGroup wrong_count = group;
  wrong_count.inputs.pop_back();
  CHECK_THROWS_AS(all_reduce(wrong_count), DimensionError);

  RankGroup wrong_shape = group;
  wrong_shape.inputs[2] = TokenMatrix::zeros(9, 8);
  CHECK_THROWS_AS(all_reduce(wrong_shape), DimensionError);

  RankGroup bad_residual = group;
  bad_residual.residual_shards[1] = TokenMatrix::zeros(5, 8);
  CHECK_THROWS_AS(fused_allreduce_rmsnorm(bad_residual, params, shards), DimensionError);

  ShardMap corrupt = shards;
  corrupt.ranges[1].begin -= 1;
  CHECK_THROWS_AS(fused_allreduce_rmsnorm(group, params, corrupt), ContractError);

  NormParams short_weight;
  short_weight.weight.assign(7, 1.0f);
  CHECK_THROWS_AS(fused_allreduce_rmsnorm(group, short_weight, shards), DimensionError);
}

TEST_CASE("all_gather rejects shards that disagree with the map") {
  const ShardMap shards = token_shard_map(10, 2);
  std::vector<TokenMatrix> wrong = {TokenMatrix::zeros(5, 4), TokenMatrix::zeros(4, 4)};
  CHECK_THROWS_AS(all_gather(wrong, shards), DimensionError);
  std::vector<TokenMatrix> few = {TokenMatrix::zeros(5, 4)};
  CHECK_THROWS_AS(all_gather(few, shards), DimensionError);
}
