#ifndef SEQLAB_NUM_TAPE_HPP
#define SEQLAB_NUM_TAPE_HPP

#include <cstdint>
#include <vector>

#include "seqlab/num/matrix.hpp"

namespace seqlab::num {

enum class Op : std::uint8_t {
  kInput,
  kParam,
  kMatmul,
  kAdd,
  kSub,
  kAddRowVector,
  kScale,
  kHadamard,
  kRowScale,
  kRowSum,
  kSigmoid,
  kExp,
  kLog,
  kRelu,
  kReduceSum,
  kReduceMean,
  kMse,
  kTranspose,
  kDiv,
  kConcatCols,
};

const char* op_name(Op op);

struct ValueId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
};

// Reverse-mode tape over matrix ops. Recording an op evaluates it
// immediately, so nodes are stored in topological order and the backward
// sweep is a single reverse pass that visits each node exactly once. A tape
// lives for one training step and is then reset.
class Tape {
 public:
  ValueId input(Matrix value);
  ValueId param(Matrix value);

  ValueId matmul(ValueId a, ValueId b);
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId add_row_vector(ValueId a, ValueId row);
  ValueId scale(ValueId a, double c);
  ValueId hadamard(ValueId a, ValueId b);
  ValueId row_scale(ValueId a, ValueId s);
  ValueId row_sum(ValueId a);
  ValueId sigmoid(ValueId a);
  ValueId exp(ValueId a);
  ValueId log(ValueId a);
  ValueId relu(ValueId a);
  ValueId reduce_sum(ValueId a);
  ValueId reduce_mean(ValueId a);
  // Mean over all entries of (a-target)^2; the scalar loss node.
  ValueId mse(ValueId a, ValueId target);
  ValueId transpose(ValueId a);
  // Elementwise a / b.
  ValueId div(ValueId a, ValueId b);
  // [a | b] side by side; operands need equal row counts.
  ValueId concat_cols(ValueId a, ValueId b);

  const Matrix& value(ValueId id) const;
  double scalar(ValueId id) const;
  const Matrix& grad(ValueId id) const;

  // Seeds the root with 1 (root must be 1x1) and accumulates adjoints into
  // every node reachable below it. Requires a recorded forward pass.
  void backward(ValueId root);
  void backward(ValueId root, const Matrix& adjoint);

  std::size_t node_count() const { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    Op op;
    ValueId a;
    ValueId b;
    double c = 0.0;
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;

  ValueId push(Node node);
  const Node& at(ValueId id) const;
  void check_id(ValueId id, const char* who) const;
  void check_finite(const Matrix& value, Op op) const;
};

}  // namespace seqlab::num

#endif  // SEQLAB_NUM_TAPE_HPP
