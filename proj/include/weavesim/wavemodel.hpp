#pragma once

#include <cstdint>
#include <string>

namespace weavesim {

// Analytic GPU cost model parameters. Times are seconds, rates bytes/s or
// flop/s. Collective timing is affine in tokens (base + per-token slope at
// the calibration hidden size), fitted from measured microbenchmark tables.
struct HardwareProfile {
  std::string name = "h100";

  int num_sms = 132;
  int tile_tokens = 128;   // tokens per CTA row-tile
  int cta_columns = 32;    // CTA grid columns per GEMM
  int collective_sms = 8;  // SMs a collective occupies during overlap
  int bytes_per_element = 2;

  double sm_flops = 4.2e12;  // effective per-SM throughput
  double hbm_bandwidth_effective = 2.24e12;

  double collective_base_latency = 13.5e-6;   // AllReduce intercept
  double collective_per_token_time = 6.0e-8;  // AllReduce slope at calib_hidden
  double fused_extra_latency = 0.9e-6;        // fused kernel base over AR, capped at 3%
  double rmsnorm_base_latency = 5.8e-6;
  double rs_base_latency = 12.0e-6;
  double rs_per_token_time = 3.0e-8;
  double ag_base_latency = 12.0e-6;
  double ag_per_token_time = 3.0e-8;
  double ring_collective_scale = 1.4;  // non-multimem AllReduce penalty

  double launch_overhead = 2.0e-6;
  double nonlayer_overhead = 20.0e-3;   // embedding/sampling/runtime per iteration
  double sm_saturation_coeff = 0.35;    // inflation shape below collective_sms
  std::int64_t calib_hidden = 8192;     // hidden size the collective fit refers to

  void validate() const;
};

struct KernelCost {
  std::int64_t ctas = 0;
  std::int64_t waves = 0;
  double duration = 0.0;  // seconds
  int sms_used = 0;
};

// Transformer layer shape; per-GPU work is derived via tp_degree.
struct LayerSpec {
  std::int64_t hidden = 8192;
  std::int64_t intermediate = 28672;
  int num_attention_heads = 64;
  int num_kv_heads = 8;
  int head_dim = 128;
  int num_layers = 80;
  int experts = 1;  // 1 = dense
  int top_k = 1;    // active experts per token
  int tp_degree = 8;

  void validate() const;
};

enum class CollectiveKind { AllReduce, ReduceScatter, AllGather, FusedARNorm };

std::int64_t cta_count(std::int64_t num_tokens, const HardwareProfile& profile);
std::int64_t wave_count(std::int64_t ctas, std::int64_t sms_available);

// Wave-quantized GEMM time: duration = waves x (one CTA tile's flop time).
// A partial final wave costs a full wave.
KernelCost gemm_time(std::int64_t num_tokens, std::int64_t m_cols, std::int64_t k_depth,
                     std::int64_t sms_available, const HardwareProfile& profile);

// Memory-bound RMSNorm: 2 HBM reads + 1 write over the tensor (or the 1/N
// token shard when sharded).
KernelCost rmsnorm_time(std::int64_t num_tokens, std::int64_t hidden,
                        const HardwareProfile& profile, bool sharded, int tp_degree = 1);

KernelCost collective_time(CollectiveKind kind, std::int64_t num_tokens, std::int64_t hidden,
                           int sms, const HardwareProfile& profile);

// Wave-quantized projection + self-attention flops of the TP-sharded head
// set, plus a KV-read memory term. kv_context is the sum over query tokens of
// their prior-context lengths (additive in the flop count, so it is conserved
// under batch splitting); kv_read_tokens is the count of distinct context
// tokens whose keys/values are streamed from HBM (-1 = same as kv_context).
KernelCost attention_time(std::int64_t num_tokens, std::int64_t kv_context,
                          const LayerSpec& spec, std::int64_t sms_available,
                          const HardwareProfile& profile, std::int64_t kv_read_tokens = -1);

// FFN time for dense and MoE layers. MoE divides tokens uniformly across
// experts (T * top_k / experts each) with wave quantization applied per expert.
KernelCost ffn_time(std::int64_t num_tokens, const LayerSpec& spec,
                    std::int64_t sms_available, const HardwareProfile& profile);

}  // namespace weavesim
