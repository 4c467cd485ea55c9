#pragma once

#include <cstdint>
#include <vector>

namespace weavesim {

// Dense per-token activation matrix, row-major (num_tokens x hidden).
struct TokenMatrix {
  std::int64_t num_tokens = 0;
  std::int64_t hidden = 1;
  std::vector<float> values;

  static TokenMatrix zeros(std::int64_t tokens, std::int64_t hidden);

  float& at(std::int64_t token, std::int64_t j) { return values[token * hidden + j]; }
  float at(std::int64_t token, std::int64_t j) const { return values[token * hidden + j]; }

  bool same_shape(const TokenMatrix& other) const {
    return num_tokens == other.num_tokens && hidden == other.hidden;
  }

  // Throws DimensionError on inconsistent sizes, NumericError on NaN/Inf.
  void validate() const;
};

struct NormParams {
  std::vector<float> weight;
  float epsilon = 1e-5f;  // common default for the evaluated model family
};

struct NormResult {
  TokenMatrix output;
  TokenMatrix residual_out;  // always input + residual, no normalization
};

// Fused residual-add + RMSNorm over each token row:
//   r' = input + residual
//   out = r' * rsqrt(mean(r'^2) + eps) * weight
// Single precision with double accumulation of the per-token sum of squares,
// summed in ascending hidden index so results are bit-deterministic.
NormResult rmsnorm_residual(const TokenMatrix& input, const TokenMatrix& residual,
                            const NormParams& params);

}  // namespace weavesim
