#include "flowbench/tape.hpp"

#include <cmath>

#include "flowbench/thread_pool.hpp"

namespace flowbench {

namespace {

// C += A * B with the k-loop innermost over contiguous rows; parallel over
// rows of C, each row owned by exactly one worker.
void matmul_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.cols;
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* arow = a.v.data() + i * k;
      double* crow = c.v.data() + i * n;
      for (int kk = 0; kk < k; ++kk) {
        double av = arow[kk];
        if (av == 0.0) continue;
        const double* brow = b.v.data() + std::size_t(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// C += A^T * B; parallel over rows of C (columns of A).
void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.cols;
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t begin, std::size_t end) {
    for (std::size_t kk = begin; kk < end; ++kk) {
      double* crow = c.v.data() + kk * n;
      for (int i = 0; i < m; ++i) {
        double av = a.v[std::size_t(i) * k + kk];
        if (av == 0.0) continue;
        const double* brow = b.v.data() + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

// C += A * B^T; parallel over rows of C.
void matmul_bt_acc(const Tensor& a, const Tensor& b, Tensor& c) {
  const int m = a.rows, k = a.cols, n = b.rows;
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* arow = a.v.data() + i * k;
      double* crow = c.v.data() + i * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b.v.data() + std::size_t(j) * k;
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
        crow[j] += acc;
      }
    }
  });
}

}  // namespace

void Tape::clear() { nodes_.clear(); }

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor t) {
  Node n;
  n.op = Op::constant;
  n.val = std::move(t);
  return push(std::move(n));
}

NodeId Tape::param(const Tensor& t) {
  Node n;
  n.op = Op::param;
  n.val = t;
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tb = nodes_[b].val;
  if (ta.cols != tb.rows) throw FlowbenchError("matmul shape mismatch");
  Node n;
  n.op = Op::matmul;
  n.a = a;
  n.b = b;
  n.val = Tensor(ta.rows, tb.cols);
  matmul_acc(ta, tb, n.val);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tb = nodes_[b].val;
  if (ta.rows != tb.rows || ta.cols != tb.cols) throw FlowbenchError("add shape mismatch");
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.val = ta;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] += tb.v[i];
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tb = nodes_[b].val;
  if (ta.rows != tb.rows || ta.cols != tb.cols) throw FlowbenchError("sub shape mismatch");
  Node n;
  n.op = Op::sub;
  n.a = a;
  n.b = b;
  n.val = ta;
  for (std::size_t i = 0; i < n.val.size(); ++i) n.val.v[i] -= tb.v[i];
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::scale;
  n.a = a;
  n.c = c;
  n.val = nodes_[a].val;
  for (double& x : n.val.v) x *= c;
  return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId a, NodeId v) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tv = nodes_[v].val;
  if (tv.rows != 1 || tv.cols != ta.cols) throw FlowbenchError("add_rowvec shape mismatch");
  Node n;
  n.op = Op::add_rowvec;
  n.a = a;
  n.b = v;
  n.val = ta;
  for (int r = 0; r < ta.rows; ++r) {
    double* row = n.val.v.data() + std::size_t(r) * ta.cols;
    for (int c = 0; c < ta.cols; ++c) row[c] += tv.v[c];
  }
  return push(std::move(n));
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
  Node n;
  n.op = Op::leaky_relu;
  n.a = a;
  n.c = slope;
  n.val = nodes_[a].val;
  for (double& x : n.val.v) {
    if (x < 0.0) x *= slope;
  }
  return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId a, std::vector<std::int32_t> idx) {
  const Tensor& ta = nodes_[a].val;
  Node n;
  n.op = Op::gather_rows;
  n.a = a;
  n.val = Tensor(static_cast<int>(idx.size()), ta.cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double* src = ta.v.data() + std::size_t(idx[k]) * ta.cols;
    double* dst = n.val.v.data() + k * ta.cols;
    for (int c = 0; c < ta.cols; ++c) dst[c] = src[c];
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

NodeId Tape::segment_sum_rows(NodeId a, std::vector<std::int32_t> seg, int nseg) {
  const Tensor& ta = nodes_[a].val;
  if (seg.size() != static_cast<std::size_t>(ta.rows)) {
    throw FlowbenchError("segment_sum_rows index size mismatch");
  }
  Node n;
  n.op = Op::segment_sum_rows;
  n.a = a;
  n.val = Tensor(nseg, ta.cols);
  for (std::size_t k = 0; k < seg.size(); ++k) {
    double* dst = n.val.v.data() + std::size_t(seg[k]) * ta.cols;
    const double* src = ta.v.data() + k * ta.cols;
    for (int c = 0; c < ta.cols; ++c) dst[c] += src[c];
  }
  n.idx = std::move(seg);
  return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tb = nodes_[b].val;
  if (ta.rows != tb.rows) throw FlowbenchError("concat_cols row mismatch");
  Node n;
  n.op = Op::concat_cols;
  n.a = a;
  n.b = b;
  n.val = Tensor(ta.rows, ta.cols + tb.cols);
  for (int r = 0; r < ta.rows; ++r) {
    double* dst = n.val.v.data() + std::size_t(r) * n.val.cols;
    const double* sa = ta.v.data() + std::size_t(r) * ta.cols;
    const double* sb = tb.v.data() + std::size_t(r) * tb.cols;
    for (int c = 0; c < ta.cols; ++c) dst[c] = sa[c];
    for (int c = 0; c < tb.cols; ++c) dst[ta.cols + c] = sb[c];
  }
  return push(std::move(n));
}

NodeId Tape::gather_flat(std::vector<NodeId> sources,
                         std::vector<std::pair<std::int32_t, std::int32_t>> pick) {
  Node n;
  n.op = Op::gather_flat;
  n.val = Tensor(static_cast<int>(pick.size()), 1);
  for (std::size_t k = 0; k < pick.size(); ++k) {
    n.val.v[k] = nodes_[sources[pick[k].first]].val.v[pick[k].second];
  }
  n.sources = std::move(sources);
  n.pick = std::move(pick);
  return push(std::move(n));
}

NodeId Tape::group_logsumexp(NodeId a, std::vector<std::int32_t> offsets,
                             std::vector<std::int32_t> members, std::vector<double> extra) {
  const Tensor& ta = nodes_[a].val;
  if (ta.cols != 1) throw FlowbenchError("group_logsumexp expects a column vector");
  const int groups = static_cast<int>(offsets.size()) - 1;
  Node n;
  n.op = Op::group_logsumexp;
  n.a = a;
  n.val = Tensor(groups, 1);
  for (int g = 0; g < groups; ++g) {
    double acc = extra.empty() ? kNegInf : extra[g];
    for (std::int32_t k = offsets[g]; k < offsets[g + 1]; ++k) {
      acc = logaddexp(acc, ta.v[members[k]]);
    }
    n.val.v[g] = acc;
  }
  n.idx = std::move(offsets);
  n.idx2 = std::move(members);
  n.aux = std::move(extra);
  return push(std::move(n));
}

NodeId Tape::sub_broadcast(NodeId a, NodeId b, std::vector<std::int32_t> group_of) {
  const Tensor& ta = nodes_[a].val;
  const Tensor& tb = nodes_[b].val;
  if (ta.cols != 1 || tb.cols != 1) throw FlowbenchError("sub_broadcast expects column vectors");
  if (group_of.size() != static_cast<std::size_t>(ta.rows)) {
    throw FlowbenchError("sub_broadcast index size mismatch");
  }
  Node n;
  n.op = Op::sub_broadcast;
  n.a = a;
  n.b = b;
  n.val = ta;
  for (std::size_t k = 0; k < group_of.size(); ++k) n.val.v[k] -= tb.v[group_of[k]];
  n.idx = std::move(group_of);
  return push(std::move(n));
}

NodeId Tape::cumsum_exclusive(NodeId a) {
  const Tensor& ta = nodes_[a].val;
  if (ta.cols != 1) throw FlowbenchError("cumsum_exclusive expects a column vector");
  Node n;
  n.op = Op::cumsum_exclusive;
  n.a = a;
  n.val = Tensor(ta.rows + 1, 1);
  double acc = 0.0;
  for (int k = 0; k < ta.rows; ++k) {
    n.val.v[k] = acc;
    acc += ta.v[k];
  }
  n.val.v[ta.rows] = acc;
  return push(std::move(n));
}

NodeId Tape::pairdiff_sq_mean(NodeId a) {
  const Tensor& ta = nodes_[a].val;
  if (ta.cols != 1 || ta.rows < 2) throw FlowbenchError("pairdiff_sq_mean expects [K>=2 x 1]");
  const double K = double(ta.rows);
  double sum = 0.0, sumsq = 0.0;
  for (double x : ta.v) {
    sum += x;
    sumsq += x * x;
  }
  const double pairs = K * (K - 1.0) / 2.0;
  Node n;
  n.op = Op::pairdiff_sq_mean;
  n.a = a;
  n.val = Tensor::scalar((K * sumsq - sum * sum) / pairs);
  n.c = sum;
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
  Node n;
  n.op = Op::square;
  n.a = a;
  n.val = nodes_[a].val;
  for (double& x : n.val.v) x *= x;
  return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
  Node n;
  n.op = Op::sum_all;
  n.a = a;
  double acc = 0.0;
  for (double x : nodes_[a].val.v) acc += x;
  n.val = Tensor::scalar(acc);
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].val.rows != 1 || nodes_[loss].val.cols != 1) {
    throw FlowbenchError("backward expects a scalar loss node");
  }
  for (auto& n : nodes_) {
    n.adj = Tensor(n.val.rows, n.val.cols);
  }
  nodes_[loss].adj.v[0] = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    bool all_zero = true;
    for (double g : n.adj.v) {
      if (g != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;

    switch (n.op) {
      case Op::constant:
      case Op::param:
        break;
      case Op::matmul: {
        matmul_bt_acc(n.adj, nodes_[n.b].val, nodes_[n.a].adj);
        matmul_at_acc(nodes_[n.a].val, n.adj, nodes_[n.b].adj);
        break;
      }
      case Op::add: {
        Tensor& da = nodes_[n.a].adj;
        Tensor& db = nodes_[n.b].adj;
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          da.v[i] += n.adj.v[i];
          db.v[i] += n.adj.v[i];
        }
        break;
      }
      case Op::sub: {
        Tensor& da = nodes_[n.a].adj;
        Tensor& db = nodes_[n.b].adj;
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          da.v[i] += n.adj.v[i];
          db.v[i] -= n.adj.v[i];
        }
        break;
      }
      case Op::scale: {
        Tensor& da = nodes_[n.a].adj;
        for (std::size_t i = 0; i < n.adj.size(); ++i) da.v[i] += n.c * n.adj.v[i];
        break;
      }
      case Op::add_rowvec: {
        Tensor& da = nodes_[n.a].adj;
        Tensor& dv = nodes_[n.b].adj;
        const int cols = n.val.cols;
        for (int r = 0; r < n.val.rows; ++r) {
          const double* g = n.adj.v.data() + std::size_t(r) * cols;
          double* darow = da.v.data() + std::size_t(r) * cols;
          for (int c = 0; c < cols; ++c) {
            darow[c] += g[c];
            dv.v[c] += g[c];
          }
        }
        break;
      }
      case Op::leaky_relu: {
        Tensor& da = nodes_[n.a].adj;
        const Tensor& input = nodes_[n.a].val;
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          da.v[i] += n.adj.v[i] * (input.v[i] > 0.0 ? 1.0 : n.c);
        }
        break;
      }
      case Op::gather_rows: {
        Tensor& da = nodes_[n.a].adj;
        const int cols = n.val.cols;
        for (std::size_t k = 0; k < n.idx.size(); ++k) {
          double* dst = da.v.data() + std::size_t(n.idx[k]) * cols;
          const double* g = n.adj.v.data() + k * cols;
          for (int c = 0; c < cols; ++c) dst[c] += g[c];
        }
        break;
      }
      case Op::segment_sum_rows: {
        Tensor& da = nodes_[n.a].adj;
        const int cols = n.val.cols;
        for (std::size_t k = 0; k < n.idx.size(); ++k) {
          const double* g = n.adj.v.data() + std::size_t(n.idx[k]) * cols;
          double* dst = da.v.data() + k * cols;
          for (int c = 0; c < cols; ++c) dst[c] += g[c];
        }
        break;
      }
      case Op::concat_cols: {
        Tensor& da = nodes_[n.a].adj;
        Tensor& db = nodes_[n.b].adj;
        const int ca = da.cols, cb = db.cols;
        for (int r = 0; r < n.val.rows; ++r) {
          const double* g = n.adj.v.data() + std::size_t(r) * n.val.cols;
          double* ra = da.v.data() + std::size_t(r) * ca;
          double* rb = db.v.data() + std::size_t(r) * cb;
          for (int c = 0; c < ca; ++c) ra[c] += g[c];
          for (int c = 0; c < cb; ++c) rb[c] += g[ca + c];
        }
        break;
      }
      case Op::gather_flat: {
        for (std::size_t k = 0; k < n.pick.size(); ++k) {
          nodes_[n.sources[n.pick[k].first]].adj.v[n.pick[k].second] += n.adj.v[k];
        }
        break;
      }
      case Op::group_logsumexp: {
        Tensor& da = nodes_[n.a].adj;
        const Tensor& input = nodes_[n.a].val;
        const int groups = n.val.rows;
        for (int g = 0; g < groups; ++g) {
          double gout = n.adj.v[g];
          if (gout == 0.0) continue;
          double lse = n.val.v[g];
          if (!std::isfinite(lse)) continue;
          for (std::int32_t k = n.idx[g]; k < n.idx[g + 1]; ++k) {
            da.v[n.idx2[k]] += gout * std::exp(input.v[n.idx2[k]] - lse);
          }
        }
        break;
      }
      case Op::sub_broadcast: {
        Tensor& da = nodes_[n.a].adj;
        Tensor& db = nodes_[n.b].adj;
        for (std::size_t k = 0; k < n.idx.size(); ++k) {
          da.v[k] += n.adj.v[k];
          db.v[n.idx[k]] -= n.adj.v[k];
        }
        break;
      }
      case Op::cumsum_exclusive: {
        Tensor& da = nodes_[n.a].adj;
        // d in[i] = sum of d out[k] for k > i.
        double suffix = 0.0;
        for (int k = n.val.rows - 1; k >= 1; --k) {
          suffix += n.adj.v[k];
          da.v[k - 1] += suffix;
        }
        break;
      }
      case Op::pairdiff_sq_mean: {
        Tensor& da = nodes_[n.a].adj;
        const Tensor& input = nodes_[n.a].val;
        const double K = double(input.rows);
        const double pairs = K * (K - 1.0) / 2.0;
        double gout = n.adj.v[0];
        for (int k = 0; k < input.rows; ++k) {
          da.v[k] += gout * (2.0 * K * input.v[k] - 2.0 * n.c) / pairs;
        }
        break;
      }
      case Op::square: {
        Tensor& da = nodes_[n.a].adj;
        const Tensor& input = nodes_[n.a].val;
        for (std::size_t i = 0; i < n.adj.size(); ++i) {
          da.v[i] += 2.0 * input.v[i] * n.adj.v[i];
        }
        break;
      }
      case Op::sum_all: {
        Tensor& da = nodes_[n.a].adj;
        double gout = n.adj.v[0];
        for (double& x : da.v) x += gout;
        break;
      }
    }
  }
}

NodeId Tape::first_non_finite() const {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    // Constants may legitimately hold -inf (masked log-probabilities).
    if (nodes_[id].op == Op::constant) continue;
    for (double x : nodes_[id].val.v) {
      if (!std::isfinite(x)) return static_cast<NodeId>(id);
    }
  }
  return -1;
}

const char* Tape::op_name(NodeId id) const {
  switch (nodes_[id].op) {
    case Op::constant: return "constant";
    case Op::param: return "param";
    case Op::matmul: return "matmul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::scale: return "scale";
    case Op::add_rowvec: return "add_rowvec";
    case Op::leaky_relu: return "leaky_relu";
    case Op::gather_rows: return "gather_rows";
    case Op::segment_sum_rows: return "segment_sum_rows";
    case Op::concat_cols: return "concat_cols";
    case Op::gather_flat: return "gather_flat";
    case Op::group_logsumexp: return "group_logsumexp";
    case Op::sub_broadcast: return "sub_broadcast";
    case Op::cumsum_exclusive: return "cumsum_exclusive";
    case Op::pairdiff_sq_mean: return "pairdiff_sq_mean";
    case Op::square: return "square";
    case Op::sum_all: return "sum_all";
  }
  return "?";
}

}  // namespace flowbench
