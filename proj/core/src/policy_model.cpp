#include "flowbench/policy_model.hpp"

#include <sstream>

namespace flowbench {

std::string ModelConfig::describe() const {
  std::ostringstream os;
  os << "layers=" << layers << ",hidden=" << hidden << ",embedding=" << embedding
     << ",rounds=" << rounds << ",leaky_slope=" << leaky_slope << ",seed=" << seed;
  return os.str();
}

NodeId BoundParams::bind(const std::string& name) {
  auto it = nodes.find(name);
  if (it != nodes.end()) return it->second;
  NodeId id = tape->param(store->get(name));
  nodes.emplace(name, id);
  return id;
}

GradMap BoundParams::grads() const {
  GradMap out;
  for (const auto& [name, id] : nodes) out.emplace(name, tape->grad(id));
  return out;
}

PolicyModel::PolicyModel(const EnvConfig& env, ModelConfig cfg) : env_(env), cfg_(cfg) {
  switch (env.kind) {
    case EnvKind::graph: break;
    case EnvKind::grid: mlp_input_dim_ = 2 * env.grid.size; break;
    case EnvKind::sequence: mlp_input_dim_ = 3 * env.sequence.max_len; break;
  }
}

void PolicyModel::init_params(ParamStore& store) const {
  Rng rng(derive_seed(cfg_.seed, "model-init"));
  auto linear = [&](const std::string& name, int in, int out) {
    store.create(name + ".w", in, out);
    store.init_kaiming(name + ".w", rng);
    store.create(name + ".b", 1, out);
  };

  if (env_.kind == EnvKind::graph) {
    const int E = cfg_.embedding;
    linear("emb", 9, E);
    for (int r = 0; r < cfg_.rounds; ++r) {
      linear("mp" + std::to_string(r) + ".self", E, E);
      linear("mp" + std::to_string(r) + ".msg", E, E);
    }
    linear("read", E, E);
    linear("ctx", 2 * E, E);
    linear("addnode", E, 2);
    linear("edge1", E, E);
    linear("edge2", E, 1);
    linear("root", E, 2);
    linear("stop", E, 1);
    linear("flow", E, 1);
  } else {
    int in = mlp_input_dim_;
    for (int l = 0; l < cfg_.layers; ++l) {
      linear("l" + std::to_string(l), in, cfg_.hidden);
      in = cfg_.hidden;
    }
    linear("act", in, 2);
    linear("stop", in, 1);
    linear("flow", in, 1);
  }
  store.create("log_z", 1, 1);
}

namespace {

NodeId dense(Tape& tape, BoundParams& bp, const std::string& name, NodeId x) {
  NodeId w = bp.bind(name + ".w");
  NodeId b = bp.bind(name + ".b");
  return tape.add_rowvec(tape.matmul(x, w), b);
}

}  // namespace

PolicyBatch PolicyModel::forward(Tape& tape, BoundParams& bp, const StateSpace& space,
                                 std::span<const StateId> states) const {
  bp.tape = &tape;
  if (env_.kind == EnvKind::graph) return forward_graph(tape, bp, space, states);
  return forward_mlp(tape, bp, space, states);
}

PolicyBatch PolicyModel::forward_graph(Tape& tape, BoundParams& bp, const StateSpace& space,
                                       std::span<const StateId> states) const {
  const int B = static_cast<int>(states.size());
  const double slope = cfg_.leaky_slope;

  // Flatten nodes across the batch.
  std::vector<std::int32_t> node_base(B);
  std::vector<std::int32_t> node_graph;
  std::vector<ColoredGraph> graphs(B);
  int total_nodes = 0;
  for (int i = 0; i < B; ++i) {
    graphs[i] = decode_graph(space.states[states[i]]);
    node_base[i] = total_nodes;
    for (int v = 0; v < graphs[i].n; ++v) node_graph.push_back(i);
    total_nodes += graphs[i].n;
  }

  Tensor features(total_nodes, 9);
  std::vector<std::int32_t> msg_src, msg_dst;
  for (int i = 0; i < B; ++i) {
    const ColoredGraph& g = graphs[i];
    for (int v = 0; v < g.n; ++v) {
      int row = node_base[i] + v;
      features.at(row, color_of(g, v)) = 1.0;
      features.at(row, 2 + degree(g, v)) = 1.0;
      for (int u = 0; u < g.n; ++u) {
        if (u != v && has_edge(g, u, v)) {
          msg_src.push_back(node_base[i] + u);
          msg_dst.push_back(row);
        }
      }
    }
  }

  NodeId x = tape.constant(std::move(features));
  NodeId h = tape.leaky_relu(dense(tape, bp, "emb", x), slope);
  for (int r = 0; r < cfg_.rounds; ++r) {
    std::string mp = "mp" + std::to_string(r);
    NodeId gathered = tape.gather_rows(h, msg_src);
    NodeId msg = tape.segment_sum_rows(gathered, msg_dst, total_nodes);
    NodeId self_part = tape.matmul(h, bp.bind(mp + ".self.w"));
    NodeId msg_part = tape.matmul(msg, bp.bind(mp + ".msg.w"));
    h = tape.leaky_relu(
        tape.add_rowvec(tape.add(self_part, msg_part), bp.bind(mp + ".self.b")), slope);
  }

  NodeId readout = tape.segment_sum_rows(h, node_graph, B);
  NodeId g_emb = tape.leaky_relu(dense(tape, bp, "read", readout), slope);

  // Node context: local embedding joined with its graph's readout, so
  // action heads see global structure beyond the message radius.
  NodeId g_per_node = tape.gather_rows(g_emb, node_graph);
  NodeId hc = tape.leaky_relu(dense(tape, bp, "ctx", tape.concat_cols(h, g_per_node)), slope);

  NodeId addnode = dense(tape, bp, "addnode", hc);  // [N x 2]
  NodeId root2 = dense(tape, bp, "root", g_emb);    // [B x 2]
  NodeId stop_head = dense(tape, bp, "stop", g_emb);
  NodeId flow_head = dense(tape, bp, "flow", g_emb);

  // Pair rows for AddEdge actions, in stored action order.
  std::vector<std::int32_t> pair_u, pair_v;
  for (int i = 0; i < B; ++i) {
    StateId s = states[i];
    for (std::uint32_t a = space.action_offsets[s]; a < space.action_offsets[s + 1]; ++a) {
      GraphAction act = GraphAction::unpack(space.action_codes[a]);
      if (act.kind == GraphAction::Kind::add_edge) {
        pair_u.push_back(node_base[i] + act.a);
        pair_v.push_back(node_base[i] + act.b);
      }
    }
  }
  NodeId edge_logits(-1);
  if (!pair_u.empty()) {
    NodeId pair_h = tape.add(tape.gather_rows(hc, pair_u), tape.gather_rows(hc, pair_v));
    NodeId pe = tape.leaky_relu(dense(tape, bp, "edge1", pair_h), slope);
    edge_logits = dense(tape, bp, "edge2", pe);  // [P x 1]
  }

  // Flat concrete-action logits in stored order.
  std::vector<NodeId> sources{addnode, root2};
  if (edge_logits >= 0) sources.push_back(edge_logits);
  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  int pair_cursor = 0;
  for (int i = 0; i < B; ++i) {
    StateId s = states[i];
    for (std::uint32_t a = space.action_offsets[s]; a < space.action_offsets[s + 1]; ++a) {
      GraphAction act = GraphAction::unpack(space.action_codes[a]);
      if (act.kind == GraphAction::Kind::add_edge) {
        pick.emplace_back(2, pair_cursor++);
      } else if (act.a == 0xff) {
        pick.emplace_back(1, i * 2 + act.b);
      } else {
        pick.emplace_back(0, (node_base[i] + act.a) * 2 + act.b);
      }
    }
  }
  NodeId action_logits = tape.gather_flat(std::move(sources), std::move(pick));

  return assemble(tape, space, states, action_logits, stop_head, flow_head);
}

PolicyBatch PolicyModel::forward_mlp(Tape& tape, BoundParams& bp, const StateSpace& space,
                                     std::span<const StateId> states) const {
  const int B = static_cast<int>(states.size());
  const double slope = cfg_.leaky_slope;

  Tensor features(B, mlp_input_dim_);
  if (env_.kind == EnvKind::grid) {
    const int M = env_.grid.size;
    for (int i = 0; i < B; ++i) {
      GridCell c = decode_cell(space.states[states[i]]);
      features.at(i, c.x) = 1.0;
      features.at(i, M + c.y) = 1.0;
    }
  } else {
    const int L = env_.sequence.max_len;
    for (int i = 0; i < B; ++i) {
      BitString b = decode_bitstring(space.states[states[i]]);
      for (int p = 0; p < L; ++p) {
        int cls = p < b.length ? ((b.bits >> p) & 1) : 2;
        features.at(i, 3 * p + cls) = 1.0;
      }
    }
  }

  NodeId h = tape.constant(std::move(features));
  for (int l = 0; l < cfg_.layers; ++l) {
    h = tape.leaky_relu(dense(tape, bp, "l" + std::to_string(l), h), slope);
  }
  NodeId act = dense(tape, bp, "act", h);  // [B x 2]
  NodeId stop_head = dense(tape, bp, "stop", h);
  NodeId flow_head = dense(tape, bp, "flow", h);

  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  for (int i = 0; i < B; ++i) {
    StateId s = states[i];
    for (std::uint32_t a = space.action_offsets[s]; a < space.action_offsets[s + 1]; ++a) {
      pick.emplace_back(0, i * 2 + space.action_codes[a]);
    }
  }
  NodeId action_logits = tape.gather_flat({act}, std::move(pick));

  return assemble(tape, space, states, action_logits, stop_head, flow_head);
}

PolicyBatch PolicyModel::assemble(Tape& tape, const StateSpace& space,
                                  std::span<const StateId> states, NodeId action_logits,
                                  NodeId stop_head, NodeId flow_head) const {
  const int B = static_cast<int>(states.size());

  // Aggregate concrete actions onto canonical children: one group per
  // canonical edge, log-sum-exp over the actions that collapse onto it.
  std::vector<std::int32_t> group_offsets{0};
  std::vector<std::int32_t> group_members;
  std::vector<std::int32_t> edge_base(B);
  int action_base = 0;
  int total_edges = 0;
  for (int i = 0; i < B; ++i) {
    StateId s = states[i];
    edge_base[i] = total_edges;
    int nchild = static_cast<int>(space.num_children(s));
    int nactions = static_cast<int>(space.action_offsets[s + 1] - space.action_offsets[s]);
    for (int slot = 0; slot < nchild; ++slot) {
      for (int a = 0; a < nactions; ++a) {
        if (space.action_child_slot[space.action_offsets[s] + a] == slot) {
          group_members.push_back(action_base + a);
        }
      }
      group_offsets.push_back(static_cast<std::int32_t>(group_members.size()));
    }
    action_base += nactions;
    total_edges += nchild;
  }
  NodeId child_logits = tape.group_logsumexp(action_logits, std::move(group_offsets),
                                             std::move(group_members));

  // Combined block layout: per state, child entries then stop (terminable).
  PolicyBatch batch;
  batch.log_flow = flow_head;
  batch.block_offset.resize(B);
  batch.nchildren.resize(B);
  batch.has_stop.resize(B);
  std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  std::vector<std::int32_t> block_offsets{0};
  std::vector<std::int32_t> row_state;
  int pos = 0;
  for (int i = 0; i < B; ++i) {
    StateId s = states[i];
    int nchild = static_cast<int>(space.num_children(s));
    bool stop = space.is_terminable(s);
    batch.block_offset[i] = pos;
    batch.nchildren[i] = nchild;
    batch.has_stop[i] = stop ? 1 : 0;
    for (int k = 0; k < nchild; ++k) {
      pick.emplace_back(0, edge_base[i] + k);
      row_state.push_back(i);
    }
    if (stop) {
      pick.emplace_back(1, i);
      row_state.push_back(i);
    }
    pos += nchild + (stop ? 1 : 0);
    block_offsets.push_back(pos);
  }
  batch.total = pos;

  batch.raw = tape.gather_flat({child_logits, stop_head}, std::move(pick));

  std::vector<std::int32_t> block_members(pos);
  for (int k = 0; k < pos; ++k) block_members[k] = k;
  NodeId lse = tape.group_logsumexp(batch.raw, std::move(block_offsets), std::move(block_members));
  batch.logp = tape.sub_broadcast(batch.raw, lse, std::move(row_state));

  return batch;
}

std::vector<PolicyEvaluator::Row> ModelPolicyEvaluator::evaluate(const StateSpace& space,
                                                                 std::span<const StateId> states) {
  std::vector<double> flows;
  return evaluate_with_flow(space, states, flows);
}

std::vector<PolicyEvaluator::Row> ModelPolicyEvaluator::evaluate_with_flow(
    const StateSpace& space, std::span<const StateId> states, std::vector<double>& log_flow_out) {
  std::vector<Row> rows(states.size());
  log_flow_out.resize(states.size());
  Tape tape;
  for (std::size_t start = 0; start < states.size(); start += batch_size_) {
    std::size_t end = std::min(states.size(), start + batch_size_);
    std::span<const StateId> chunk = states.subspan(start, end - start);
    tape.clear();
    BoundParams bp{&tape, store_, {}};
    PolicyBatch pb = model_->forward(tape, bp, space, chunk);
    const Tensor& logp = tape.value(pb.logp);
    const Tensor& flow = tape.value(pb.log_flow);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      Row& row = rows[start + i];
      int nchild = pb.nchildren[i];
      row.child_logp.resize(nchild);
      for (int k = 0; k < nchild; ++k) row.child_logp[k] = logp.v[pb.child_pos(int(i), k)];
      row.stop_logp = pb.has_stop[i] ? logp.v[pb.stop_pos(int(i))] : kNegInf;
      log_flow_out[start + i] = flow.v[i];
    }
  }
  return rows;
}

}  // namespace flowbench
