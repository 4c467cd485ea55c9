#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "weavesim/wavemodel.hpp"

namespace weavesim {

enum class SplitMode { NoSplit, FusedOnly, Overlap };

// Two-way token split of the flattened batch. `offset` is signed: tokens
// added to (or removed from) the equal split to form the prefix.
struct SplitPlan {
  std::int64_t total_tokens = 0;
  std::int64_t prefix_tokens = 0;
  std::int64_t suffix_tokens = 0;
  std::int64_t offset = 0;
  SplitMode mode = SplitMode::NoSplit;
  // Per-sequence count of tokens landing in the prefix split; filled by
  // place_sequence_boundaries. At most one sequence straddles the boundary.
  std::vector<std::int64_t> prefix_len_per_sequence;
};

struct SplitPolicy {
  std::int64_t threshold_tokens = 1024;  // 1K dense, 4K MoE
  std::vector<std::int64_t> offset_grid = {0, 64, 128, 192, 256, 512};
};

// Overlap at or above the threshold, FusedOnly below.
SplitMode select_mode(std::int64_t num_tokens, const SplitPolicy& policy);

// Wave-aware prefix offset: scans tile-boundary prefixes minimizing total
// waves (tie-break: closest to the equal split, then smaller prefix). When
// the unsplit kernel is a single wave, returns the all-prefix degenerate
// split (offset = T - T/2, suffix empty). Returns the signed token offset
// relative to T/2.
std::int64_t smart_offset_analytic(std::int64_t num_tokens, const HardwareProfile& profile);

// Alg-1 style profiling sweep over the policy's offset grid; the callback
// returns modeled forward time for a (prefix, suffix) split. Offsets
// >= half_tokens are skipped; ties go to the smaller offset; an empty
// feasible grid yields 0.
std::int64_t smart_offset_sweep(std::int64_t num_tokens, const SplitPolicy& policy,
                                const std::function<double(std::int64_t, std::int64_t)>& forward);

// Full plan: mode decision + analytic offset. A split that degenerates to
// all-prefix falls back to FusedOnly.
SplitPlan make_split_plan(std::int64_t num_tokens, const HardwareProfile& profile,
                          const SplitPolicy& policy);

// Cuts the flattened token stream at prefix_tokens and records how many
// tokens of each sequence precede the cut. Requires sum(lengths) == T.
SplitPlan place_sequence_boundaries(const std::vector<std::int64_t>& sequence_lengths,
                                    SplitPlan plan);

}  // namespace weavesim
