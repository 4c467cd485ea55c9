#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weavesim/splitter.hpp"
#include "weavesim/wavemodel.hpp"

namespace weavesim {

enum class OpKind { Attention, Ffn, FusedARNorm, AllReduce, RmsNorm, AllGatherOp, Misc };
enum class SplitId { Prefix, Suffix, Whole };
enum class StreamId { Compute, Comm };
enum class BaselineMode { Default, Multimem, NoComm, FuseOnly, TokenWeave };

const char* to_string(BaselineMode mode);
const char* to_string(OpKind op);
BaselineMode baseline_mode_from_string(const std::string& name);

struct StreamEvent {
  int id = 0;
  OpKind op = OpKind::Misc;
  SplitId split = SplitId::Whole;
  StreamId stream = StreamId::Compute;
  std::vector<int> depends_on;  // ids of earlier events only

  // Work description. The scalable part runs at rate sms_available/num_sms
  // while a comm event is concurrently active; the fixed part never scales.
  double scalable_seconds = 0.0;
  double fixed_seconds = 0.0;

  // Filled by simulate().
  double start = 0.0;
  double end = 0.0;
};

struct Timeline {
  std::vector<StreamEvent> events;
  double iteration_latency = 0.0;  // makespan

  std::string to_json() const;
  void to_json_file(const std::string& path) const;
};

// Shape of one iteration's batch as seen by the cost model.
struct BatchShape {
  std::int64_t total_tokens = 0;
  std::int64_t kv_context = 0;  // prior-context tokens (sum over sequences)
  bool decode_only = false;
  std::vector<std::int64_t> sequence_lengths;  // optional; empty = single sequence
};

// Event DAG for one transformer layer. Sequential modes chain
// attn -> collective(+norm) -> FFN -> collective(+norm); TokenWeave emits the
// two-split weave with cross-stream dependencies and the chunked-attention
// edge attn(suffix) <- attn(prefix).
std::vector<StreamEvent> build_layer_graph(const SplitPlan& plan, const LayerSpec& spec,
                                           const HardwareProfile& profile, BaselineMode mode,
                                           std::int64_t kv_context = 0, int first_id = 0,
                                           const std::vector<int>& carry_deps_prefix = {},
                                           const std::vector<int>& carry_deps_suffix = {});

// List-schedules the DAG on the two streams. Events on one stream run in
// emission order as dependencies complete; in-flight compute events are
// re-scaled when a collective starts or ends. Throws ContractError on
// forward-referencing (cyclic) dependencies.
Timeline simulate(std::vector<StreamEvent> dag, const HardwareProfile& profile);

// Full-model iteration: num_layers chained layer DAGs, the final residual
// gather for sharded-residual modes, plus the configured non-layer overhead.
// plan_override replaces the computed split plan (ablations); it must carry
// mode Overlap to keep TokenWeave from degrading to FuseOnly.
Timeline iteration_timeline(const BatchShape& batch, const LayerSpec& spec,
                            const HardwareProfile& profile, BaselineMode mode,
                            const SplitPolicy& policy,
                            const SplitPlan* plan_override = nullptr);

double iteration_latency(const BatchShape& batch, const LayerSpec& spec,
                         const HardwareProfile& profile, BaselineMode mode,
                         const SplitPolicy& policy);

}  // namespace weavesim
