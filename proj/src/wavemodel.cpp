#include "weavesim/wavemodel.hpp"

#include <algorithm>
#include <cmath>

#include "weavesim/errors.hpp"

namespace weavesim {

void HardwareProfile::validate() const {
  if (num_sms < 1) throw ConfigError("HardwareProfile: num_sms must be >= 1");
  if (collective_sms >= num_sms) {
    throw ConfigError("HardwareProfile: collective_sms must be < num_sms");
  }
  if (tile_tokens < 1 || cta_columns < 1) {
    throw ConfigError("HardwareProfile: tile geometry must be positive");
  }
  if (sm_flops <= 0 || hbm_bandwidth_effective <= 0 || collective_per_token_time <= 0 ||
      collective_base_latency <= 0) {
    throw ConfigError("HardwareProfile: rates and latencies must be positive");
  }
}

void LayerSpec::validate() const {
  if (hidden < 1 || intermediate < 1 || num_layers < 1) {
    throw ConfigError("LayerSpec: dimensions must be positive");
  }
  if (num_attention_heads < 1 || num_kv_heads < 1 || head_dim < 1 ||
      num_attention_heads % num_kv_heads != 0) {
    throw ConfigError("LayerSpec: head structure invalid");
  }
  if (experts < 1 || top_k < 1 || top_k > experts) {
    throw ConfigError("LayerSpec: experts >= top_k >= 1 required");
  }
  if (tp_degree < 2) throw ConfigError("LayerSpec: tp_degree must be >= 2");
}

std::int64_t cta_count(std::int64_t num_tokens, const HardwareProfile& profile) {
  if (num_tokens < 0) throw DimensionError("cta_count: negative token count");
  if (num_tokens == 0) return 0;
  const std::int64_t row_tiles = (num_tokens + profile.tile_tokens - 1) / profile.tile_tokens;
  return row_tiles * profile.cta_columns;
}

std::int64_t wave_count(std::int64_t ctas, std::int64_t sms_available) {
  if (sms_available < 1) throw ConfigError("wave_count: sms_available must be >= 1");
  if (ctas < 0) throw DimensionError("wave_count: negative CTA count");
  return (ctas + sms_available - 1) / sms_available;
}

KernelCost gemm_time(std::int64_t num_tokens, std::int64_t m_cols, std::int64_t k_depth,
                     std::int64_t sms_available, const HardwareProfile& profile) {
  if (m_cols < 1 || k_depth < 1) throw DimensionError("gemm_time: dims must be positive");
  KernelCost cost;
  cost.ctas = cta_count(num_tokens, profile);
  cost.waves = wave_count(cost.ctas, sms_available);
  cost.sms_used = static_cast<int>(std::min<std::int64_t>(cost.ctas, sms_available));
  if (cost.ctas == 0) {
    cost.duration = 0.0;
    return cost;
  }
  // One CTA computes a tile_tokens x (m_cols / cta_columns) output tile.
  const double total_flops = 2.0 * static_cast<double>(num_tokens) * m_cols * k_depth;
  const double tile_flops = total_flops / static_cast<double>(cost.ctas);
  cost.duration = static_cast<double>(cost.waves) * tile_flops / profile.sm_flops +
                  profile.launch_overhead;
  return cost;
}

KernelCost rmsnorm_time(std::int64_t num_tokens, std::int64_t hidden,
                        const HardwareProfile& profile, bool sharded, int tp_degree) {
  if (hidden < 1 || num_tokens < 0) throw DimensionError("rmsnorm_time: bad dims");
  if (sharded && tp_degree < 1) throw ConfigError("rmsnorm_time: tp_degree must be >= 1");
  const double tokens = sharded ? static_cast<double>(num_tokens) / tp_degree
                                : static_cast<double>(num_tokens);
  // Two HBM reads + one write over the (sharded) tensor.
  const double bytes = 3.0 * tokens * static_cast<double>(hidden) * profile.bytes_per_element;
  KernelCost cost;
  cost.ctas = cta_count(num_tokens, profile);
  cost.waves = wave_count(cost.ctas, profile.num_sms);
  cost.sms_used = profile.num_sms;
  cost.duration = bytes / profile.hbm_bandwidth_effective + profile.rmsnorm_base_latency;
  return cost;
}

KernelCost collective_time(CollectiveKind kind, std::int64_t num_tokens, std::int64_t hidden,
                           int sms, const HardwareProfile& profile) {
  if (sms < 1) throw ConfigError("collective_time: sms must be >= 1");
  if (num_tokens < 0 || hidden < 1) throw DimensionError("collective_time: bad dims");
  // Per-token time scales with bytes per token relative to the calibration
  // shape (hidden size and element width).
  const double scale = static_cast<double>(hidden) / static_cast<double>(profile.calib_hidden);
  double base = 0.0;
  double slope = 0.0;
  switch (kind) {
    case CollectiveKind::AllReduce:
      base = profile.collective_base_latency;
      slope = profile.collective_per_token_time;
      break;
    case CollectiveKind::FusedARNorm: {
      base = profile.collective_base_latency;
      slope = profile.collective_per_token_time;
      break;
    }
    case CollectiveKind::ReduceScatter:
      base = profile.rs_base_latency;
      slope = profile.rs_per_token_time;
      break;
    case CollectiveKind::AllGather:
      base = profile.ag_base_latency;
      slope = profile.ag_per_token_time;
      break;
    default:
      throw ContractError("collective_time: unknown collective kind");
  }
  double duration = base + slope * static_cast<double>(num_tokens) * scale;
  if (kind == CollectiveKind::FusedARNorm) {
    // The fused kernel tracks AR with a small extra base, capped at 3%.
    duration += std::min(0.03 * duration, profile.fused_extra_latency);
  }
  // Saturation below the preferred SM allocation; flat at or beyond it.
  if (sms < profile.collective_sms) {
    const double ratio = static_cast<double>(profile.collective_sms) / sms;
    duration *= 1.0 + profile.sm_saturation_coeff * (ratio - 1.0);
  }
  KernelCost cost;
  cost.ctas = sms;
  cost.waves = num_tokens > 0 ? 1 : 0;
  cost.sms_used = sms;
  cost.duration = duration;
  return cost;
}

KernelCost attention_time(std::int64_t num_tokens, std::int64_t kv_context,
                          const LayerSpec& spec, std::int64_t sms_available,
                          const HardwareProfile& profile, std::int64_t kv_read_tokens) {
  spec.validate();
  if (num_tokens < 0 || kv_context < 0) throw DimensionError("attention_time: bad dims");
  if (kv_read_tokens < 0) kv_read_tokens = kv_context;
  KernelCost cost;
  cost.ctas = cta_count(num_tokens, profile);
  cost.waves = wave_count(cost.ctas, sms_available);
  cost.sms_used = static_cast<int>(std::min<std::int64_t>(cost.ctas, sms_available));
  if (num_tokens == 0) return cost;

  const double H = static_cast<double>(spec.hidden);
  const double N = spec.tp_degree;
  const double kv_width = static_cast<double>(spec.num_kv_heads) * spec.head_dim;
  const double heads_per_gpu = static_cast<double>(spec.num_attention_heads) / N;
  const double T = static_cast<double>(num_tokens);

  const double qkv_flops = 2.0 * T * H * (H + 2.0 * kv_width) / N;
  const double oproj_flops = 2.0 * T * H * H / N;
  // Causal self-attention over the batch plus the summed per-query context.
  const double sattn_flops =
      4.0 * heads_per_gpu * spec.head_dim * (T * T / 2.0 + static_cast<double>(kv_context));
  const double total_flops = qkv_flops + oproj_flops + sattn_flops;
  const double tile_flops = total_flops / static_cast<double>(cost.ctas);

  // Prior-context keys and values streamed from HBM.
  const double kv_bytes = static_cast<double>(kv_read_tokens) * 2.0 * (kv_width / N) *
                          profile.bytes_per_element;

  cost.duration = static_cast<double>(cost.waves) * tile_flops / profile.sm_flops +
                  kv_bytes / profile.hbm_bandwidth_effective + profile.launch_overhead;
  return cost;
}

KernelCost ffn_time(std::int64_t num_tokens, const LayerSpec& spec, std::int64_t sms_available,
                    const HardwareProfile& profile) {
  spec.validate();
  if (num_tokens < 0) throw DimensionError("ffn_time: negative token count");
  const std::int64_t m = 3 * spec.intermediate / spec.tp_degree;
  if (spec.experts == 1) {
    return gemm_time(num_tokens, m, spec.hidden, sms_available, profile);
  }
  // Tokens divide uniformly across experts; wave quantization per expert.
  const std::int64_t per_expert =
      (num_tokens * spec.top_k + spec.experts - 1) / spec.experts;
  KernelCost one = gemm_time(per_expert, m, spec.hidden, sms_available, profile);
  KernelCost cost = one;
  cost.ctas = one.ctas * spec.experts;
  cost.waves = one.waves * spec.experts;
  cost.duration = one.duration * spec.experts;
  return cost;
}

}  // namespace weavesim
