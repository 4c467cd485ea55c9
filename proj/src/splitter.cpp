#include "weavesim/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weavesim/errors.hpp"

namespace weavesim {

SplitMode select_mode(std::int64_t num_tokens, const SplitPolicy& policy) {
  if (policy.threshold_tokens < 1) throw ConfigError("SplitPolicy: threshold must be >= 1");
  return num_tokens >= policy.threshold_tokens ? SplitMode::Overlap : SplitMode::FusedOnly;
}

std::int64_t smart_offset_analytic(std::int64_t num_tokens, const HardwareProfile& profile) {
  profile.validate();
  if (num_tokens < 0) throw DimensionError("smart_offset_analytic: negative token count");
  const std::int64_t half = num_tokens / 2;
  const std::int64_t all_prefix_offset = num_tokens - half;
  const std::int64_t total_ctas = cta_count(num_tokens, profile);
  if (wave_count(total_ctas, profile.num_sms) <= 1) {
    // Single-wave kernel: splitting cannot help, assign everything to the
    // prefix (splitting disabled).
    return all_prefix_offset;
  }
  const std::int64_t row_tiles = (num_tokens + profile.tile_tokens - 1) / profile.tile_tokens;
  if (row_tiles < 2) return all_prefix_offset;

  // Scan the equal split plus every tile-boundary prefix: minimize total
  // waves, tie-break toward the most balanced split (so a wave-neutral result
  // keeps the equal split), then toward the smaller prefix.
  std::int64_t best_prefix = half;
  std::int64_t best_waves = std::numeric_limits<std::int64_t>::max();
  std::int64_t best_imbalance = std::numeric_limits<std::int64_t>::max();
  auto consider = [&](std::int64_t prefix_tokens) {
    if (prefix_tokens < 1 || prefix_tokens >= num_tokens) return;
    const std::int64_t suffix_tokens = num_tokens - prefix_tokens;
    const std::int64_t waves = wave_count(cta_count(prefix_tokens, profile), profile.num_sms) +
                               wave_count(cta_count(suffix_tokens, profile), profile.num_sms);
    const std::int64_t imbalance = std::abs(prefix_tokens - half);
    if (waves < best_waves || (waves == best_waves && imbalance < best_imbalance)) {
      best_waves = waves;
      best_imbalance = imbalance;
      best_prefix = prefix_tokens;
    }
  };
  consider(half);
  for (std::int64_t p = 1; p < row_tiles; ++p) {
    consider(std::min<std::int64_t>(p * profile.tile_tokens, num_tokens - 1));
  }
  return best_prefix - half;
}

std::int64_t smart_offset_sweep(std::int64_t num_tokens, const SplitPolicy& policy,
                                const std::function<double(std::int64_t, std::int64_t)>& forward) {
  const std::int64_t half = num_tokens / 2;
  std::int64_t best_offset = 0;
  double best_time = std::numeric_limits<double>::infinity();
  for (std::int64_t offset : policy.offset_grid) {
    if (offset >= half) continue;
    const double time = forward(half + offset, num_tokens - half - offset);
    if (time < best_time) {
      best_time = time;
      best_offset = offset;
    }
  }
  return best_offset;
}

SplitPlan make_split_plan(std::int64_t num_tokens, const HardwareProfile& profile,
                          const SplitPolicy& policy) {
  SplitPlan plan;
  plan.total_tokens = num_tokens;
  plan.mode = select_mode(num_tokens, policy);
  if (plan.mode != SplitMode::Overlap) {
    plan.prefix_tokens = num_tokens;
    plan.suffix_tokens = 0;
    plan.offset = 0;
    return plan;
  }
  const std::int64_t half = num_tokens / 2;
  plan.offset = smart_offset_analytic(num_tokens, profile);
  plan.prefix_tokens = half + plan.offset;
  plan.suffix_tokens = num_tokens - plan.prefix_tokens;
  if (plan.suffix_tokens == 0) plan.mode = SplitMode::FusedOnly;  // degenerate split
  return plan;
}

SplitPlan place_sequence_boundaries(const std::vector<std::int64_t>& sequence_lengths,
                                    SplitPlan plan) {
  std::int64_t total = 0;
  for (std::int64_t len : sequence_lengths) total += len;
  if (total != plan.total_tokens) {
    throw ContractError("place_sequence_boundaries: sequence lengths must sum to T");
  }
  plan.prefix_len_per_sequence.clear();
  std::int64_t remaining_prefix = plan.prefix_tokens;
  for (std::int64_t len : sequence_lengths) {
    const std::int64_t in_prefix = std::clamp<std::int64_t>(remaining_prefix, 0, len);
    plan.prefix_len_per_sequence.push_back(in_prefix);
    remaining_prefix -= in_prefix;
  }
  return plan;
}

}  // namespace weavesim
