#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowbench/nn.hpp"
#include "flowbench/oracle.hpp"
#include "flowbench/state_space.hpp"
#include "flowbench/tape.hpp"

namespace flowbench {

struct ModelConfig {
  int layers = 3;       // MLP hidden layers (grid, sequence)
  int hidden = 128;     // MLP width
  int embedding = 64;   // message-passing width (graph)
  int rounds = 4;       // message-passing rounds
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;

  std::string describe() const;
};

/// Parameter nodes bound onto a tape for one forward pass.
struct BoundParams {
  Tape* tape = nullptr;
  ParamStore* store = nullptr;
  std::map<std::string, NodeId> nodes;

  NodeId bind(const std::string& name);
  GradMap grads() const;
};

/// Differentiable outputs for a batch of states. Layout: for batch state i
/// (in order), its canonical-child entries then, if terminable, one stop
/// entry. `raw` holds unnormalized logits (the edge-flow view: concrete
/// action logits log-sum-exp-aggregated onto canonical children);
/// `logp` is the per-state normalized log-distribution over children+stop.
struct PolicyBatch {
  NodeId raw = -1;
  NodeId logp = -1;
  NodeId log_flow = -1;  // [B x 1]
  std::vector<std::int32_t> block_offset;
  std::vector<std::int32_t> nchildren;
  std::vector<std::uint8_t> has_stop;
  int total = 0;

  int child_pos(int i, int slot) const { return block_offset[i] + slot; }
  int stop_pos(int i) const { return block_offset[i] + nchildren[i]; }
};

/// Forward policy with per-environment featurization: a LeakyReLU MLP for
/// grid/sequence states and a sum-aggregation message-passing network with
/// per-node and per-node-pair action heads for graphs. Heads: action
/// logits, stop logit, state log-flow, plus a scalar log_z parameter used
/// by the trajectory-balance objective.
class PolicyModel {
 public:
  PolicyModel(const EnvConfig& env, ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }

  /// Creates and initializes all parameters (seeded by cfg.seed).
  void init_params(ParamStore& store) const;

  PolicyBatch forward(Tape& tape, BoundParams& bp, const StateSpace& space,
                      std::span<const StateId> states) const;

 private:
  PolicyBatch forward_graph(Tape& tape, BoundParams& bp, const StateSpace& space,
                            std::span<const StateId> states) const;
  PolicyBatch forward_mlp(Tape& tape, BoundParams& bp, const StateSpace& space,
                          std::span<const StateId> states) const;
  PolicyBatch assemble(Tape& tape, const StateSpace& space, std::span<const StateId> states,
                       NodeId action_logits, NodeId stop_head, NodeId flow_head) const;

  EnvConfig env_;
  ModelConfig cfg_;
  int mlp_input_dim_ = 0;
};

/// Value-only policy rows for sampling and the exact DP; also exposes the
/// log-flow head for implicit-reward metrics.
class ModelPolicyEvaluator final : public PolicyEvaluator {
 public:
  ModelPolicyEvaluator(const PolicyModel& model, ParamStore& store, std::size_t batch_size = 256)
      : model_(&model), store_(&store), batch_size_(batch_size) {}

  std::vector<Row> evaluate(const StateSpace& space, std::span<const StateId> states) override;

  /// Like evaluate, but also returns log F(s; theta) per state.
  std::vector<Row> evaluate_with_flow(const StateSpace& space, std::span<const StateId> states,
                                      std::vector<double>& log_flow_out);

 private:
  const PolicyModel* model_;
  ParamStore* store_;
  std::size_t batch_size_;
};

}  // namespace flowbench
