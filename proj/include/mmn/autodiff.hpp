#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmn/tensor.hpp"

namespace mmn {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kMul,
  kTanh,
  kSigmoid,
  kConcat,
  kSoftmax,
  kCosineSim,
  kSum,
  kMean,
  kLog,
  kPick,
  kSelectRow,
  kSelectCol,
};

// One computation-graph record. Parents always precede the node in tape
// order; grad stays empty until backward materializes it (zero-filled,
// same shape as value).
struct Node {
  Op op = Op::kLeaf;
  NodeId a = 0;
  NodeId b = 0;
  std::uint32_t extra_begin = 0;  // concat parent list in Tape::extra_
  std::uint32_t extra_count = 0;
  std::int32_t aux = 0;    // pick/select index, concat axis
  double auxd = 0.0;       // log floor
  Tensor value;
  Tensor grad;
};

// Reverse-mode tape over the closed op set the model composes from.
// Single-writer: one thread builds and differentiates a given tape.
// Gradients accumulate (+=) across fan-out; callers reset between steps by
// building a fresh tape or calling clear().
class Tape {
 public:
  NodeId leaf(Tensor value);
  NodeId constant(double v) { return leaf(Tensor::scalar(v)); }

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // same shape, or either side scalar
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId concat(std::span<const NodeId> parts, int axis = 0);
  NodeId softmax(NodeId a);
  NodeId cosine_similarity(NodeId a, NodeId b);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId log(NodeId a, double floor = 0.0);
  NodeId pick(NodeId a, std::size_t index);
  NodeId select_row(NodeId a, std::size_t row);
  NodeId select_col(NodeId a, std::size_t col);

  NodeId neg(NodeId a) { return mul(a, constant(-1.0)); }

  // Reverse-topological accumulation from a scalar loss. After the call
  // grad(id) holds d(loss)/d(node) for every node on the tape.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Zero tensor of the node's shape if backward never reached it.
  const Tensor& grad(NodeId id) { return grad_buf(id); }

  std::size_t size() const { return nodes_.size(); }
  void clear();
  void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

 private:
  NodeId push(Node&& n);
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
  std::vector<NodeId> extra_;
};

}  // namespace mmn
