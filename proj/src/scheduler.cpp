#include "weavesim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "weavesim/errors.hpp"

namespace weavesim {

using nlohmann::json;

const char* to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::Default: return "default";
    case BaselineMode::Multimem: return "multimem";
    case BaselineMode::NoComm: return "nocomm";
    case BaselineMode::FuseOnly: return "fuseonly";
    case BaselineMode::TokenWeave: return "tokenweave";
  }
  return "?";
}

const char* to_string(OpKind op) {
  switch (op) {
    case OpKind::Attention: return "attention";
    case OpKind::Ffn: return "ffn";
    case OpKind::FusedARNorm: return "fused_ar_norm";
    case OpKind::AllReduce: return "allreduce";
    case OpKind::RmsNorm: return "rmsnorm";
    case OpKind::AllGatherOp: return "allgather";
    case OpKind::Misc: return "misc";
  }
  return "?";
}

BaselineMode baseline_mode_from_string(const std::string& name) {
  if (name == "default") return BaselineMode::Default;
  if (name == "multimem") return BaselineMode::Multimem;
  if (name == "nocomm") return BaselineMode::NoComm;
  if (name == "fuseonly") return BaselineMode::FuseOnly;
  if (name == "tokenweave") return BaselineMode::TokenWeave;
  throw ConfigError("unknown mode: " + name);
}

namespace {

struct EventBuilder {
  std::vector<StreamEvent> events;
  int next_id;

  explicit EventBuilder(int first_id) : next_id(first_id) {}

  int add(OpKind op, SplitId split, StreamId stream, double scalable, double fixed,
          std::vector<int> deps) {
    StreamEvent e;
    e.id = next_id++;
    e.op = op;
    e.split = split;
    e.stream = stream;
    e.scalable_seconds = scalable;
    e.fixed_seconds = fixed;
    e.depends_on = std::move(deps);
    events.push_back(std::move(e));
    return events.back().id;
  }
};

int add_attention(EventBuilder& b, SplitId split, std::int64_t tokens, std::int64_t kv,
                  std::int64_t kv_read, const LayerSpec& spec, const HardwareProfile& profile,
                  std::vector<int> deps) {
  const KernelCost cost = attention_time(tokens, kv, spec, profile.num_sms, profile, kv_read);
  const double kv_width = static_cast<double>(spec.num_kv_heads) * spec.head_dim;
  const double kv_bytes =
      static_cast<double>(kv_read) * 2.0 * (kv_width / spec.tp_degree) * profile.bytes_per_element;
  const double fixed =
      (tokens > 0 ? profile.launch_overhead : 0.0) + kv_bytes / profile.hbm_bandwidth_effective;
  return b.add(OpKind::Attention, split, StreamId::Compute,
               std::max(0.0, cost.duration - fixed), fixed, std::move(deps));
}

int add_ffn(EventBuilder& b, SplitId split, std::int64_t tokens, const LayerSpec& spec,
            const HardwareProfile& profile, std::vector<int> deps) {
  const KernelCost cost = ffn_time(tokens, spec, profile.num_sms, profile);
  const double fixed = tokens > 0 ? profile.launch_overhead * spec.experts : 0.0;
  return b.add(OpKind::Ffn, split, StreamId::Compute, std::max(0.0, cost.duration - fixed),
               fixed, std::move(deps));
}

int add_collective(EventBuilder& b, OpKind op, SplitId split, CollectiveKind kind,
                   std::int64_t tokens, const LayerSpec& spec, const HardwareProfile& profile,
                   double scale, std::vector<int> deps) {
  const double t =
      collective_time(kind, tokens, spec.hidden, profile.collective_sms, profile).duration;
  return b.add(op, split, StreamId::Comm, 0.0, t * scale, std::move(deps));
}

int add_rmsnorm(EventBuilder& b, SplitId split, std::int64_t tokens, const LayerSpec& spec,
                const HardwareProfile& profile, bool sharded, std::vector<int> deps) {
  const double t = rmsnorm_time(tokens, spec.hidden, profile, sharded, spec.tp_degree).duration;
  return b.add(OpKind::RmsNorm, split, StreamId::Compute, 0.0, t, std::move(deps));
}

}  // namespace

std::vector<StreamEvent> build_layer_graph(const SplitPlan& plan, const LayerSpec& spec,
                                           const HardwareProfile& profile, BaselineMode mode,
                                           std::int64_t kv_context, int first_id,
                                           const std::vector<int>& carry_deps_prefix,
                                           const std::vector<int>& carry_deps_suffix) {
  spec.validate();
  profile.validate();
  EventBuilder b(first_id);
  const std::int64_t T = plan.total_tokens;

  if (mode == BaselineMode::TokenWeave) {
    if (plan.mode != SplitMode::Overlap || plan.suffix_tokens == 0) {
      throw ContractError("build_layer_graph: TokenWeave requires an Overlap split plan");
    }
    const std::int64_t ta = plan.prefix_tokens;
    const std::int64_t tb = plan.suffix_tokens;
    const std::int64_t kv_a = T > 0 ? kv_context * ta / T : 0;
    const std::int64_t kv_b = kv_context - kv_a;

    const int aa =
        add_attention(b, SplitId::Prefix, ta, kv_a, kv_a, spec, profile, carry_deps_prefix);
    const int fa1 = add_collective(b, OpKind::FusedARNorm, SplitId::Prefix,
                                   CollectiveKind::FusedARNorm, ta, spec, profile, 1.0, {aa});
    // Chunked-attention edge: every suffix token attends over the prefix KV,
    // whose keys/values are streamed once.
    std::vector<int> ab_deps = carry_deps_suffix;
    ab_deps.push_back(aa);
    const int ab = add_attention(b, SplitId::Suffix, tb, kv_b + ta * tb, kv_b + ta, spec, profile,
                                 ab_deps);
    const int fb1 = add_collective(b, OpKind::FusedARNorm, SplitId::Suffix,
                                   CollectiveKind::FusedARNorm, tb, spec, profile, 1.0, {ab, fa1});
    const int ffa = add_ffn(b, SplitId::Prefix, ta, spec, profile, {fa1});
    const int fa2 = add_collective(b, OpKind::FusedARNorm, SplitId::Prefix,
                                   CollectiveKind::FusedARNorm, ta, spec, profile, 1.0, {ffa, fb1});
    const int ffb = add_ffn(b, SplitId::Suffix, tb, spec, profile, {fb1});
    add_collective(b, OpKind::FusedARNorm, SplitId::Suffix, CollectiveKind::FusedARNorm, tb, spec,
                   profile, 1.0, {ffb, fa2});
    return std::move(b.events);
  }

  // Sequential modes: one whole-batch chain.
  const int a =
      add_attention(b, SplitId::Whole, T, kv_context, kv_context, spec, profile, carry_deps_prefix);
  switch (mode) {
    case BaselineMode::Default:
    case BaselineMode::Multimem: {
      const double scale = mode == BaselineMode::Default ? profile.ring_collective_scale : 1.0;
      const int ar1 = add_collective(b, OpKind::AllReduce, SplitId::Whole,
                                     CollectiveKind::AllReduce, T, spec, profile, scale, {a});
      const int n1 = add_rmsnorm(b, SplitId::Whole, T, spec, profile, false, {ar1});
      const int f = add_ffn(b, SplitId::Whole, T, spec, profile, {n1});
      const int ar2 = add_collective(b, OpKind::AllReduce, SplitId::Whole,
                                     CollectiveKind::AllReduce, T, spec, profile, scale, {f});
      add_rmsnorm(b, SplitId::Whole, T, spec, profile, false, {ar2});
      break;
    }
    case BaselineMode::NoComm: {
      const int n1 = add_rmsnorm(b, SplitId::Whole, T, spec, profile, false, {a});
      const int f = add_ffn(b, SplitId::Whole, T, spec, profile, {n1});
      add_rmsnorm(b, SplitId::Whole, T, spec, profile, false, {f});
      break;
    }
    case BaselineMode::FuseOnly: {
      const int f1 = add_collective(b, OpKind::FusedARNorm, SplitId::Whole,
                                    CollectiveKind::FusedARNorm, T, spec, profile, 1.0, {a});
      const int f = add_ffn(b, SplitId::Whole, T, spec, profile, {f1});
      add_collective(b, OpKind::FusedARNorm, SplitId::Whole, CollectiveKind::FusedARNorm, T, spec,
                     profile, 1.0, {f});
      break;
    }
    default:
      throw ContractError("build_layer_graph: unhandled mode");
  }
  return std::move(b.events);
}

Timeline simulate(std::vector<StreamEvent> dag, const HardwareProfile& profile) {
  profile.validate();
  const int n = static_cast<int>(dag.size());
  if (n == 0) return Timeline{{}, 0.0};

  // Normalize ids to positions; dependencies must point backwards.
  int min_id = dag.front().id;
  for (const StreamEvent& e : dag) min_id = std::min(min_id, e.id);
  for (int i = 0; i < n; ++i) {
    if (dag[i].id - min_id != i) throw ContractError("simulate: event ids must be dense and ordered");
    for (int d : dag[i].depends_on) {
      if (d - min_id < 0 || d - min_id >= i) {
        throw ContractError("simulate: dependency cycle or forward reference");
      }
    }
  }

  std::vector<int> queue[2];
  for (int i = 0; i < n; ++i) queue[static_cast<int>(dag[i].stream)].push_back(i);
  std::size_t head[2] = {0, 0};

  std::vector<bool> done(n, false);
  std::vector<double> end_time(n, 0.0);
  struct Running {
    int idx = -1;
    double frac = 1.0;  // fraction of total duration remaining
  };
  Running running[2];
  int completed = 0;
  double now = 0.0;

  const double slow_rate =
      static_cast<double>(profile.num_sms - profile.collective_sms) / profile.num_sms;
  auto duration_of = [&](const StreamEvent& e, bool comm_active) {
    const double rate =
        (e.stream == StreamId::Compute && comm_active) ? slow_rate : 1.0;
    return e.fixed_seconds + e.scalable_seconds / rate;
  };

  auto startable = [&](int s, double* ready_time) -> int {
    if (running[s].idx >= 0 || head[s] >= queue[s].size()) return -1;
    const int idx = queue[s][head[s]];
    double ready = 0.0;
    for (int d : dag[idx].depends_on) {
      const int di = d - min_id;
      if (!done[di]) return -1;
      ready = std::max(ready, end_time[di]);
    }
    *ready_time = ready;
    return idx;
  };

  while (completed < n) {
    // Start events whose turn has come (comm first so contention is in
    // effect before compute durations are read).
    for (int s : {static_cast<int>(StreamId::Comm), static_cast<int>(StreamId::Compute)}) {
      double ready = 0.0;
      const int idx = startable(s, &ready);
      if (idx >= 0 && ready <= now) {
        dag[idx].start = now;
        running[s] = {idx, 1.0};
        ++head[s];
      }
    }

    const bool comm_active = running[static_cast<int>(StreamId::Comm)].idx >= 0;

    // Next interesting time: a running event finishing, or an idle stream's
    // next event becoming startable.
    double next = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 2; ++s) {
      if (running[s].idx >= 0) {
        const StreamEvent& e = dag[running[s].idx];
        next = std::min(next, now + running[s].frac * duration_of(e, comm_active));
      } else {
        double ready = 0.0;
        const int idx = startable(s, &ready);
        if (idx >= 0 && ready > now) next = std::min(next, ready);
      }
    }
    if (!std::isfinite(next)) throw ContractError("simulate: scheduler stalled (bad DAG)");

    // Advance remaining fractions to `next`, then retire finished events.
    for (int s = 0; s < 2; ++s) {
      if (running[s].idx < 0) continue;
      const StreamEvent& e = dag[running[s].idx];
      const double d = duration_of(e, comm_active);
      if (d <= 0.0) {
        running[s].frac = 0.0;
      } else {
        running[s].frac -= (next - now) / d;
      }
    }
    now = next;
    for (int s = 0; s < 2; ++s) {
      if (running[s].idx < 0) continue;
      if (running[s].frac <= 1e-12) {
        const int idx = running[s].idx;
        dag[idx].end = now;
        end_time[idx] = now;
        done[idx] = true;
        running[s].idx = -1;
        ++completed;
      }
    }
  }

  Timeline timeline;
  timeline.iteration_latency = 0.0;
  for (const StreamEvent& e : dag) {
    timeline.iteration_latency = std::max(timeline.iteration_latency, e.end);
  }
  timeline.events = std::move(dag);
  return timeline;
}

std::string Timeline::to_json() const {
  json j;
  j["iteration_latency"] = iteration_latency;
  j["events"] = json::array();
  for (const StreamEvent& e : events) {
    j["events"].push_back({{"id", e.id},
                           {"op", weavesim::to_string(e.op)},
                           {"split", e.split == SplitId::Prefix   ? "prefix"
                                     : e.split == SplitId::Suffix ? "suffix"
                                                                  : "whole"},
                           {"stream", e.stream == StreamId::Comm ? "comm" : "compute"},
                           {"start", e.start},
                           {"end", e.end},
                           {"depends_on", e.depends_on}});
  }
  return j.dump(2);
}

void Timeline::to_json_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write timeline: " + path);
  out << to_json() << "\n";
}

Timeline iteration_timeline(const BatchShape& batch, const LayerSpec& spec,
                            const HardwareProfile& profile, BaselineMode mode,
                            const SplitPolicy& policy, const SplitPlan* plan_override) {
  spec.validate();
  profile.validate();

  BaselineMode effective = mode;
  SplitPlan plan;
  plan.total_tokens = batch.total_tokens;
  plan.mode = SplitMode::NoSplit;
  plan.prefix_tokens = batch.total_tokens;
  if (mode == BaselineMode::TokenWeave) {
    if (batch.decode_only) {
      effective = BaselineMode::FuseOnly;  // Overlap never pays off for decode
    } else {
      plan = plan_override != nullptr ? *plan_override
                                      : make_split_plan(batch.total_tokens, profile, policy);
      if (plan.mode != SplitMode::Overlap) effective = BaselineMode::FuseOnly;
    }
    if (effective == BaselineMode::TokenWeave && !batch.sequence_lengths.empty()) {
      plan = place_sequence_boundaries(batch.sequence_lengths, plan);
    }
  }

  std::vector<StreamEvent> all;
  std::vector<int> carry_prefix;
  std::vector<int> carry_suffix;
  int next_id = 0;
  for (int layer = 0; layer < spec.num_layers; ++layer) {
    std::vector<StreamEvent> layer_events = build_layer_graph(
        plan, spec, profile, effective, batch.kv_context, next_id, carry_prefix, carry_suffix);
    next_id += static_cast<int>(layer_events.size());
    for (StreamEvent& e : layer_events) all.push_back(std::move(e));
    if (effective == BaselineMode::TokenWeave) {
      // Cross-layer edges are data dependencies only: the suffix collective
      // may overlap the next layer's prefix attention.
      carry_prefix = {next_id - 3};  // fused prefix (post-FFN)
      carry_suffix = {next_id - 1};  // fused suffix (post-FFN)
    } else {
      carry_prefix = {next_id - 1};
      carry_suffix.clear();
    }
  }

  if (effective == BaselineMode::TokenWeave || effective == BaselineMode::FuseOnly) {
    // Close the residual-sharding loop: final unsharded norm over the
    // gathered residual.
    std::vector<int> tail_deps = carry_prefix;
    for (int d : carry_suffix) tail_deps.push_back(d);
    EventBuilder b(next_id);
    const double ag = collective_time(CollectiveKind::AllGather, batch.total_tokens, spec.hidden,
                                      profile.collective_sms, profile)
                          .duration;
    const int g = b.add(OpKind::AllGatherOp, SplitId::Whole, StreamId::Comm, 0.0, ag, tail_deps);
    const double norm =
        rmsnorm_time(batch.total_tokens, spec.hidden, profile, false).duration;
    b.add(OpKind::RmsNorm, SplitId::Whole, StreamId::Compute, 0.0, norm, {g});
    for (StreamEvent& e : b.events) all.push_back(std::move(e));
  }

  Timeline timeline = simulate(std::move(all), profile);
  timeline.iteration_latency += profile.nonlayer_overhead;
  return timeline;
}

double iteration_latency(const BatchShape& batch, const LayerSpec& spec,
                         const HardwareProfile& profile, BaselineMode mode,
                         const SplitPolicy& policy) {
  return iteration_timeline(batch, spec, profile, mode, policy).iteration_latency;
}

}  // namespace weavesim
