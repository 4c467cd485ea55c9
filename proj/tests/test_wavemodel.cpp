#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "weavesim/errors.hpp"
#include "weavesim/wavemodel.hpp"

using namespace weavesim;

TEST_CASE("cta_count rounds row tiles up and multiplies by grid columns") {
  HardwareProfile p;
  p.tile_tokens = 128;
  p.cta_columns = 4;
  CHECK(cta_count(0, p) == 0);
  CHECK(cta_count(1, p) == 4);
  CHECK(cta_count(128, p) == 4);
  CHECK(cta_count(129, p) == 8);
  CHECK(cta_count(9600, p) == 300);
  CHECK_THROWS_AS(cta_count(-1, p), DimensionError);
}

TEST_CASE("wave_count quantizes partial waves up") {
  CHECK(wave_count(0, 132) == 0);
  CHECK(wave_count(1, 132) == 1);
  CHECK(wave_count(132, 132) == 1);
  CHECK(wave_count(133, 132) == 2);
  CHECK(wave_count(300, 132) == 3);
  CHECK_THROWS_AS(wave_count(10, 0), ConfigError);
}

TEST_CASE("a partial final wave costs as much as a full one") {
  HardwareProfile p;
  // 132 SMs, 32 columns: 4 row tiles = 128 CTAs (1 wave), 5 = 160 (2 waves).
  const KernelCost one = gemm_time(4 * p.tile_tokens, 1024, 1024, p.num_sms, p);
  const KernelCost two = gemm_time(5 * p.tile_tokens, 1024, 1024, p.num_sms, p);
  CHECK(one.waves == 1);
  CHECK(two.waves == 2);
  // Same per-CTA tile, so the second kernel pays a full extra wave.
  const double tile_time = (one.duration - p.launch_overhead) / one.waves;
  CHECK(two.duration - p.launch_overhead == doctest::Approx(2.0 * tile_time).epsilon(1e-9));
}

TEST_CASE("gemm duration grows with waves, not raw flops, within a wave") {
  HardwareProfile p;
  // Both shapes land in one wave; flops per CTA are identical per row tile.
  const KernelCost a = gemm_time(64, 512, 512, p.num_sms, p);
  const KernelCost b = gemm_time(128, 512, 512, p.num_sms, p);
  CHECK(a.waves == b.waves);
  CHECK(b.duration > a.duration);  // bigger tile rows, more flops per CTA
}

TEST_CASE("sharded rmsnorm moves 1/N of the bytes") {
  HardwareProfile p;
  const double full = rmsnorm_time(4096, 8192, p, false).duration - p.rmsnorm_base_latency;
  const double shard = rmsnorm_time(4096, 8192, p, true, 8).duration - p.rmsnorm_base_latency;
  CHECK(shard == doctest::Approx(full / 8.0).epsilon(1e-12));
}

TEST_CASE("collective timing is affine in tokens and scales with hidden size") {
  HardwareProfile p;
  const double t1 = collective_time(CollectiveKind::AllReduce, 1024, 8192, 8, p).duration;
  const double t2 = collective_time(CollectiveKind::AllReduce, 2048, 8192, 8, p).duration;
  const double t3 = collective_time(CollectiveKind::AllReduce, 3072, 8192, 8, p).duration;
  CHECK(t3 - t2 == doctest::Approx(t2 - t1).epsilon(1e-12));

  // Halving hidden size halves the per-token term only.
  const double half = collective_time(CollectiveKind::AllReduce, 2048, 4096, 8, p).duration;
  CHECK(half - p.collective_base_latency ==
        doctest::Approx((t2 - p.collective_base_latency) / 2.0).epsilon(1e-12));
}

TEST_CASE("fused collective stays within 3 percent of plain allreduce") {
  HardwareProfile p;
  for (std::int64_t tokens : {64, 256, 1024, 8192, 32768}) {
    const double ar = collective_time(CollectiveKind::AllReduce, tokens, 8192, 8, p).duration;
    const double fused = collective_time(CollectiveKind::FusedARNorm, tokens, 8192, 8, p).duration;
    CHECK(fused >= ar);
    CHECK(fused <= ar * 1.03 + 1e-15);
  }
}

TEST_CASE("reduce-scatter plus all-gather exceeds one allreduce at small token counts") {
  HardwareProfile p;
  const double ar = collective_time(CollectiveKind::AllReduce, 64, 8192, 8, p).duration;
  const double rs = collective_time(CollectiveKind::ReduceScatter, 64, 8192, 8, p).duration;
  const double ag = collective_time(CollectiveKind::AllGather, 64, 8192, 8, p).duration;
  CHECK(rs + ag > ar);
}

TEST_CASE("collectives slow down below the preferred SM allocation and are flat beyond it") {
  HardwareProfile p;
  const double at8 = collective_time(CollectiveKind::AllReduce, 1024, 8192, 8, p).duration;
  const double at16 = collective_time(CollectiveKind::AllReduce, 1024, 8192, 16, p).duration;
  const double at4 = collective_time(CollectiveKind::AllReduce, 1024, 8192, 4, p).duration;
  const double at2 = collective_time(CollectiveKind::AllReduce, 1024, 8192, 2, p).duration;
  CHECK(at16 == at8);
  CHECK(at4 > at8);
  CHECK(at2 > at4);
}

TEST_CASE("attention cost is additive in summed query context") {
  LayerSpec spec;
  HardwareProfile p;
  const double base = attention_time(1024, 0, spec, p.num_sms, p).duration;
  const double c1 = attention_time(1024, 1 << 20, spec, p.num_sms, p).duration;
  const double c2 = attention_time(1024, 2 << 20, spec, p.num_sms, p).duration;
  CHECK(c2 - c1 == doctest::Approx(c1 - base).epsilon(1e-9));
}

TEST_CASE("splitting a batch conserves attention flops via the cross term") {
  LayerSpec spec;
  HardwareProfile p;
  const std::int64_t T = 4096, ta = 2176, tb = T - ta;
  // kv for the suffix includes the prefix cross-attention term ta*tb.
  const KernelCost whole = attention_time(T, 0, spec, p.num_sms, p, 0);
  const KernelCost prefix = attention_time(ta, 0, spec, p.num_sms, p, 0);
  const KernelCost suffix = attention_time(tb, ta * tb, spec, p.num_sms, p, 0);
  const double whole_flops = (whole.duration - p.launch_overhead) / whole.waves * whole.ctas;
  const double split_flops = (prefix.duration - p.launch_overhead) / prefix.waves * prefix.ctas +
                             (suffix.duration - p.launch_overhead) / suffix.waves * suffix.ctas;
  CHECK(split_flops == doctest::Approx(whole_flops).epsilon(1e-9));
}

TEST_CASE("moe ffn runs experts over uniformly divided tokens") {
  HardwareProfile p;
  LayerSpec dense;
  LayerSpec moe = dense;
  moe.experts = 8;
  moe.top_k = 2;

  const KernelCost d = ffn_time(4096, dense, p.num_sms, p);
  const KernelCost g = gemm_time(4096, 3 * dense.intermediate / dense.tp_degree, dense.hidden,
                                 p.num_sms, p);
  CHECK(d.duration == g.duration);

  const KernelCost m = ffn_time(4096, moe, p.num_sms, p);
  const KernelCost per = gemm_time(4096 * 2 / 8, 3 * moe.intermediate / moe.tp_degree, moe.hidden,
                                   p.num_sms, p);
  CHECK(m.duration == doctest::Approx(per.duration * 8).epsilon(1e-12));
  CHECK(m.waves == per.waves * 8);
}

TEST_CASE("profile and spec validation") {
  HardwareProfile p;
  CHECK_NOTHROW(p.validate());
  p.collective_sms = p.num_sms;
  CHECK_THROWS_AS(p.validate(), ConfigError);

  LayerSpec s;
  CHECK_NOTHROW(s.validate());
  s.num_attention_heads = 10;  // not divisible by kv heads
  s.num_kv_heads = 4;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = LayerSpec{};
  s.tp_degree = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = LayerSpec{};
  s.top_k = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}
