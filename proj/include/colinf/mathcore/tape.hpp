#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "colinf/mathcore/dense.hpp"

namespace colinf {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const { return id != npos; }
};

/// Block-aligned erasure pattern for every ordered (receiver, sender) pair in
/// `groups` independent groups of `nodes` members each. A vector of length
/// `dim` is cut into blocks of `block` entries and an erased block reads as
/// `fill` at the receiver. An empty `erased` vector means nothing was lost.
struct LinkMask {
  std::size_t groups = 0;
  std::size_t nodes = 0;
  std::size_t dim = 0;
  std::size_t block = 1;
  double fill = 0.0;
  std::vector<std::uint8_t> erased;  // [group][receiver][sender][block]

  std::size_t blocks() const { return block == 0 ? 0 : (dim + block - 1) / block; }
  bool clean() const { return erased.empty(); }
  std::size_t offset(std::size_t g, std::size_t receiver, std::size_t sender) const {
    return ((g * nodes + receiver) * nodes + sender) * blocks();
  }
  bool link_clean(std::size_t g, std::size_t receiver, std::size_t sender) const;

  static LinkMask lossless(std::size_t groups, std::size_t nodes, std::size_t dim,
                           std::size_t block, double fill = 0.0);
};

/// Minimal reverse-mode recorder over dense matrices. Row i of every 2-D value
/// is one sample. Nodes are appended in evaluation order, so reverse creation
/// order is a valid topological order for the backward sweep.
class Tape {
 public:
  Var constant(Matrix value);
  /// Tracked leaf. On backward its gradient is added into `grad_sink`, which
  /// must have as many entries as `value` (column-major).
  Var parameter(Matrix value, std::span<double> grad_sink);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// x * w^T (+ b), with b an out x 1 column.
  Var affine(Var x, Var w);
  Var affine(Var x, Var w, Var b);
  Var relu(Var x);
  Var row_softmax(Var scores);
  /// m * 1{m >= rho}, gradient passes through surviving entries.
  Var threshold(Var m, double rho);

  /// Scaled bilinear scores for each group of `mask.nodes` rows:
  /// out(g*n+i, j) = scale * <received_j(queries(g*n+i)), projected(g*n+j)>,
  /// where received_j applies the erasures of link i -> j. Diagonal entries use
  /// the local query.
  Var bilinear_scores(Var queries, Var projected, const LinkMask& mask, double scale);

  /// out(g*n+i) = sum_j weights(g*n+i, j) * received_i(features(g*n+j)), with
  /// erasures of link j -> i. The diagonal term uses the local row.
  Var weighted_sum(Var weights, Var features, const LinkMask& mask);

  /// Mean over rows of -log softmax(row)[label]. Result is 1 x 1.
  Var cross_entropy(Var logits, std::span<const std::size_t> labels);
  Var sum(Var x);
  /// sum(x .* coeffs), a scalar.
  Var dot(Var x, Matrix coeffs);

  /// Reverse sweep from a 1 x 1 node. Throws StateError if nothing was recorded
  /// or `loss` is not a scalar on this tape.
  void backward(Var loss);
  std::size_t last_backward_visits() const { return visits_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::span<double> sink;
    std::function<void(Tape&, std::size_t)> backprop;
  };

  Var push(Matrix value, bool requires_grad);
  Node& node(Var v);
  const Node& node(Var v) const;
  bool needs(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

/// Records the stack on `tape`. With `grads` null the layers are constants
/// (frozen): gradients flow through them to `x` but nothing accumulates for
/// their parameters.
Var mlp_forward(Tape& tape, const DenseParams& params, DenseParams* grads, Var x,
                std::size_t first = 0, std::size_t last = std::numeric_limits<std::size_t>::max());

}  // namespace colinf
