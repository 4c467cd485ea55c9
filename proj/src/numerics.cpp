#include "weavesim/numerics.hpp"

#include <cmath>

#include "weavesim/errors.hpp"

namespace weavesim {

TokenMatrix TokenMatrix::zeros(std::int64_t tokens, std::int64_t hidden) {
  TokenMatrix m;
  m.num_tokens = tokens;
  m.hidden = hidden;
  m.values.assign(static_cast<std::size_t>(tokens * hidden), 0.0f);
  m.validate();
  return m;
}

void TokenMatrix::validate() const {
  if (num_tokens < 0 || hidden < 1) {
    throw DimensionError("TokenMatrix requires T >= 0 and H >= 1");
  }
  if (values.size() != static_cast<std::size_t>(num_tokens * hidden)) {
    throw DimensionError("TokenMatrix values length must equal T*H");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericError("TokenMatrix contains NaN/Inf");
  }
}

NormResult rmsnorm_residual(const TokenMatrix& input, const TokenMatrix& residual,
                            const NormParams& params) {
  input.validate();
  residual.validate();
  if (!input.same_shape(residual)) {
    throw DimensionError("rmsnorm_residual: input and residual shapes differ");
  }
  if (static_cast<std::int64_t>(params.weight.size()) != input.hidden) {
    throw DimensionError("rmsnorm_residual: weight length must equal hidden size");
  }
  if (!(params.epsilon > 0.0f) && params.epsilon != 0.0f) {
    throw NumericError("rmsnorm_residual: epsilon must be nonnegative");
  }

  const std::int64_t T = input.num_tokens;
  const std::int64_t H = input.hidden;
  NormResult result;
  result.output = TokenMatrix::zeros(T, H);
  result.residual_out = TokenMatrix::zeros(T, H);

  for (std::int64_t t = 0; t < T; ++t) {
    double sum_sq = 0.0;  // float values, double accumulator
    for (std::int64_t j = 0; j < H; ++j) {
      const float r = input.at(t, j) + residual.at(t, j);
      result.residual_out.at(t, j) = r;
      sum_sq += static_cast<double>(r) * static_cast<double>(r);
    }
    const float inv_rms =
        1.0f / std::sqrt(static_cast<float>(sum_sq / static_cast<double>(H)) + params.epsilon);
    for (std::int64_t j = 0; j < H; ++j) {
      result.output.at(t, j) = result.residual_out.at(t, j) * inv_rms * params.weight[j];
    }
  }
  return result;
}

}  // namespace weavesim
