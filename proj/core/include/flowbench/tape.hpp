#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowbench/common.hpp"

namespace flowbench {

/// Row-major dense matrix of doubles. Column vectors are [n x 1].
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(std::size_t(r) * std::size_t(c), 0.0) {}

  double& at(int r, int c) { return v[std::size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[std::size_t(r) * cols + c]; }
  std::size_t size() const { return v.size(); }

  static Tensor scalar(double x) {
    Tensor t(1, 1);
    t.v[0] = x;
    return t;
  }
  static Tensor column(std::vector<double> xs) {
    Tensor t;
    t.rows = static_cast<int>(xs.size());
    t.cols = 1;
    t.v = std::move(xs);
    return t;
  }
};

using NodeId = std::int32_t;

/// Reverse-mode tape over Tensor-valued nodes. Values are computed eagerly
/// at op creation; backward() allocates adjoints and walks the tape in
/// reverse. All reductions run in a fixed sequential order so results are
/// identical for any worker count.
class Tape {
 public:
  void clear();
  std::size_t num_nodes() const { return nodes_.size(); }

  NodeId constant(Tensor t);
  /// Leaf with gradient tracking (model parameters).
  NodeId param(const Tensor& t);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  /// a[r][c] + v[0][c] for every row (bias broadcast).
  NodeId add_rowvec(NodeId a, NodeId v);
  NodeId leaky_relu(NodeId a, double slope);
  /// out row k = a row idx[k].
  NodeId gather_rows(NodeId a, std::vector<std::int32_t> idx);
  /// out[seg[k]] += a row k; seg values in [0, nseg).
  NodeId segment_sum_rows(NodeId a, std::vector<std::int32_t> seg, int nseg);
  NodeId concat_cols(NodeId a, NodeId b);

  /// Column vector assembled from flat elements of several sources:
  /// out[k] = value(src[pick[k].first]).v[pick[k].second].
  NodeId gather_flat(std::vector<NodeId> sources,
                     std::vector<std::pair<std::int32_t, std::int32_t>> pick);

  /// Per-group log-sum-exp over a column vector. Group g covers member
  /// positions members[offsets[g]..offsets[g+1]); extra[g], when finite,
  /// joins the reduction as a constant member (no gradient).
  NodeId group_logsumexp(NodeId a, std::vector<std::int32_t> offsets,
                         std::vector<std::int32_t> members, std::vector<double> extra = {});

  /// out[k] = a[k] - b[group_of[k]] (column vectors).
  NodeId sub_broadcast(NodeId a, NodeId b, std::vector<std::int32_t> group_of);

  /// Exclusive prefix sums with an appended total: input [n x 1] ->
  /// output [(n+1) x 1], out[k] = sum of a[0..k).
  NodeId cumsum_exclusive(NodeId a);

  /// Mean over all ordered pairs n < m of (a[n] - a[m])^2 for a column
  /// vector; equals (K*sum(a^2) - sum(a)^2) / (K*(K-1)/2).
  NodeId pairdiff_sq_mean(NodeId a);

  NodeId square(NodeId a);
  NodeId sum_all(NodeId a);

  const Tensor& value(NodeId n) const { return nodes_[n].val; }
  const Tensor& grad(NodeId n) const { return nodes_[n].adj; }

  /// Reverse sweep from a [1 x 1] loss node.
  void backward(NodeId loss);

  /// Index of the first node with a non-finite value, or -1.
  NodeId first_non_finite() const;
  const char* op_name(NodeId n) const;

 private:
  enum class Op : std::uint8_t {
    constant,
    param,
    matmul,
    add,
    sub,
    scale,
    add_rowvec,
    leaky_relu,
    gather_rows,
    segment_sum_rows,
    concat_cols,
    gather_flat,
    group_logsumexp,
    sub_broadcast,
    cumsum_exclusive,
    pairdiff_sq_mean,
    square,
    sum_all,
  };

  struct Node {
    Op op;
    Tensor val;
    Tensor adj;
    NodeId a = -1;
    NodeId b = -1;
    double c = 0.0;
    std::vector<std::int32_t> idx;
    std::vector<std::int32_t> idx2;
    std::vector<double> aux;
    std::vector<NodeId> sources;
    std::vector<std::pair<std::int32_t, std::int32_t>> pick;
  };

  NodeId push(Node n);
  std::vector<Node> nodes_;
};

}  // namespace flowbench
