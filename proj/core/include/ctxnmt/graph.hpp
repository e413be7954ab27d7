#pragma once

#include <span>
#include <vector>

#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

/// Reverse-mode differentiation tape. Operations execute eagerly: each call
/// appends a record (kind, input ids, cached forward value) and returns the
/// id of the new node. Records are created in topological order by
/// construction, so backward() is a single reverse sweep.
///
/// Parameter leaves bind external tensors by pointer; those tensors must
/// outlive the graph and must not be mutated while it is alive. backward()
/// accumulates into their grad buffers, so callers zero grads between
/// optimizer steps (zero_grads()).
class Graph {
 public:
  using NodeId = int;

  enum class Op {
    kParam,
    kConstant,
    kMatMul,
    kAdd,
    kMul,
    kSigmoid,
    kTanh,
    kSoftmax,    // over the last axis
    kConcat,     // along a given axis, rank preserved
    kStackRows,  // concatenation of rank-1 tensors along a new leading axis
    kGatherRows, // embedding lookup
    kMeanRows,   // mean over the sequence (leading) axis
    kNll,        // negative log-likelihood of an index under softmax(logits)
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Leaf bound to an external tensor (no copy). Gradients flow back into
  /// t.grad when t.requires_grad is set.
  NodeId param(Tensor& t);
  /// Leaf owning a copy of the given value; never receives gradient.
  NodeId constant(Tensor t);
  NodeId constant(std::vector<int> shape, std::vector<double> values);

  /// (m x k)(k x n) -> m x n. Rank-1 operands are treated as a row (left) or
  /// column (right) and the result is squeezed accordingly; two rank-1
  /// operands give a dot product of shape {1}.
  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);       // element-wise, shapes must match
  NodeId mul(NodeId a, NodeId b);       // element-wise (Hadamard)
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId softmax(NodeId x);             // max-subtracted, last axis
  NodeId concat(const std::vector<NodeId>& xs, int axis);
  NodeId stack_rows(const std::vector<NodeId>& rows);  // k rank-1 (n) -> (k x n)
  NodeId gather_rows(NodeId matrix, std::vector<int> indices);  // (k x E)
  NodeId gather_row(NodeId matrix, int index);                  // (E)
  NodeId mean_rows(NodeId matrix);      // (T x C) -> (C)
  NodeId nll(NodeId logits, int index); // rank-1 logits -> {1}

  const Tensor& value(NodeId id) const {
    const Node& n = node(id);
    return n.bound ? *n.bound : n.out;
  }
  double scalar_value(NodeId id) const;

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
  /// into bound parameter tensors. loss must have exactly one element.
  void backward(NodeId loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor out;                // cached forward value (empty for param leaves)
    Tensor* bound = nullptr;   // param leaves only
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    int axis = 0;                 // concat axis; gather: 1 = squeeze to rank-1
    std::vector<int> indices;     // gather rows / nll target index
    std::vector<double> cache;    // nll: softmax probabilities
  };

  Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  NodeId push(Node n);
  std::vector<double>& grad_buf(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace ctxnmt
