#include "seqlab/num/tape.hpp"

#include <cmath>
#include <string>

namespace seqlab::num {

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParam: return "param";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kAddRowVector: return "add_row_vector";
    case Op::kScale: return "scale";
    case Op::kHadamard: return "hadamard";
    case Op::kRowScale: return "row_scale";
    case Op::kRowSum: return "row_sum";
    case Op::kSigmoid: return "sigmoid";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kRelu: return "relu";
    case Op::kReduceSum: return "reduce_sum";
    case Op::kReduceMean: return "reduce_mean";
    case Op::kMse: return "mse";
    case Op::kTranspose: return "transpose";
    case Op::kDiv: return "div";
    case Op::kConcatCols: return "concat_cols";
  }
  return "?";
}

void Tape::check_id(ValueId id, const char* who) const {
  if (!id.valid() || id.index >= nodes_.size()) {
    throw NumericError(std::string(who) + ": value id " + std::to_string(id.index) +
                       " not on this tape");
  }
}

const Tape::Node& Tape::at(ValueId id) const { return nodes_[id.index]; }

ValueId Tape::push(Node node) {
  check_finite(node.value, node.op);
  node.grad = Matrix(node.value.rows(), node.value.cols());
  nodes_.push_back(std::move(node));
  return ValueId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check_finite(const Matrix& value, Op op) const {
  if (!value.all_finite()) {
    throw NumericError(std::string("tape: non-finite values out of ") + op_name(op) +
                       " at node " + std::to_string(nodes_.size()));
  }
}

ValueId Tape::input(Matrix value) {
  return push(Node{Op::kInput, {}, {}, 0.0, std::move(value), {}, false});
}

ValueId Tape::param(Matrix value) {
  return push(Node{Op::kParam, {}, {}, 0.0, std::move(value), {}, true});
}

namespace {
std::string node_shapes(const Matrix& a, const Matrix& b) {
  return a.shape_str() + " and " + b.shape_str();
}
}  // namespace

ValueId Tape::matmul(ValueId a, ValueId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (va.cols() != vb.rows()) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (matmul): shapes " +
                     node_shapes(va, vb) + " do not chain");
  }
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kMatmul, a, b, 0.0, num::matmul(va, vb), {}, ng});
}

ValueId Tape::add(ValueId a, ValueId b) {
  check_id(a, "add");
  check_id(b, "add");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (!va.same_shape(vb)) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (add): shapes " +
                     node_shapes(va, vb) + " differ");
  }
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kAdd, a, b, 0.0, num::add(va, vb), {}, ng});
}

ValueId Tape::sub(ValueId a, ValueId b) {
  check_id(a, "sub");
  check_id(b, "sub");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (!va.same_shape(vb)) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (sub): shapes " +
                     node_shapes(va, vb) + " differ");
  }
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kSub, a, b, 0.0, num::sub(va, vb), {}, ng});
}

ValueId Tape::add_row_vector(ValueId a, ValueId row) {
  check_id(a, "add_row_vector");
  check_id(row, "add_row_vector");
  const Matrix& va = at(a).value;
  const Matrix& vr = at(row).value;
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) +
                     " (add_row_vector): bias " + vr.shape_str() +
                     " does not broadcast over " + va.shape_str());
  }
  bool ng = at(a).needs_grad || at(row).needs_grad;
  return push(Node{Op::kAddRowVector, a, row, 0.0, num::add_row_vector(va, vr), {}, ng});
}

ValueId Tape::scale(ValueId a, double c) {
  check_id(a, "scale");
  return push(Node{Op::kScale, a, {}, c, num::scale(at(a).value, c), {}, at(a).needs_grad});
}

ValueId Tape::hadamard(ValueId a, ValueId b) {
  check_id(a, "hadamard");
  check_id(b, "hadamard");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (!va.same_shape(vb)) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (hadamard): shapes " +
                     node_shapes(va, vb) + " differ");
  }
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kHadamard, a, b, 0.0, num::hadamard(va, vb), {}, ng});
}

ValueId Tape::row_scale(ValueId a, ValueId s) {
  check_id(a, "row_scale");
  check_id(s, "row_scale");
  const Matrix& va = at(a).value;
  const Matrix& vs = at(s).value;
  if (vs.cols() != 1 || vs.rows() != va.rows()) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (row_scale): scales " +
                     vs.shape_str() + " do not match rows of " + va.shape_str());
  }
  bool ng = at(a).needs_grad || at(s).needs_grad;
  return push(Node{Op::kRowScale, a, s, 0.0, num::row_scale(va, vs), {}, ng});
}

ValueId Tape::row_sum(ValueId a) {
  check_id(a, "row_sum");
  return push(Node{Op::kRowSum, a, {}, 0.0, num::row_sum(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::sigmoid(ValueId a) {
  check_id(a, "sigmoid");
  return push(Node{Op::kSigmoid, a, {}, 0.0, num::sigmoid(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::exp(ValueId a) {
  check_id(a, "exp");
  return push(Node{Op::kExp, a, {}, 0.0, num::exp(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::log(ValueId a) {
  check_id(a, "log");
  return push(Node{Op::kLog, a, {}, 0.0, num::log(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::relu(ValueId a) {
  check_id(a, "relu");
  return push(Node{Op::kRelu, a, {}, 0.0, num::relu(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::reduce_sum(ValueId a) {
  check_id(a, "reduce_sum");
  Matrix out(1, 1);
  out(0, 0) = num::reduce_sum(at(a).value);
  return push(Node{Op::kReduceSum, a, {}, 0.0, std::move(out), {}, at(a).needs_grad});
}

ValueId Tape::reduce_mean(ValueId a) {
  check_id(a, "reduce_mean");
  Matrix out(1, 1);
  out(0, 0) = num::reduce_mean(at(a).value);
  return push(Node{Op::kReduceMean, a, {}, 0.0, std::move(out), {}, at(a).needs_grad});
}

ValueId Tape::mse(ValueId a, ValueId target) {
  check_id(a, "mse");
  check_id(target, "mse");
  const Matrix& va = at(a).value;
  const Matrix& vt = at(target).value;
  if (!va.same_shape(vt)) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (mse): shapes " +
                     node_shapes(va, vt) + " differ");
  }
  Matrix out(1, 1);
  out(0, 0) = num::mean_squared_error(va, vt);
  bool ng = at(a).needs_grad || at(target).needs_grad;
  return push(Node{Op::kMse, a, target, 0.0, std::move(out), {}, ng});
}

ValueId Tape::transpose(ValueId a) {
  check_id(a, "transpose");
  return push(
      Node{Op::kTranspose, a, {}, 0.0, num::transpose(at(a).value), {}, at(a).needs_grad});
}

ValueId Tape::div(ValueId a, ValueId b) {
  check_id(a, "div");
  check_id(b, "div");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (!va.same_shape(vb)) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (div): shapes " +
                     node_shapes(va, vb) + " differ");
  }
  Matrix out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= vb.data()[i];
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kDiv, a, b, 0.0, std::move(out), {}, ng});
}

ValueId Tape::concat_cols(ValueId a, ValueId b) {
  check_id(a, "concat_cols");
  check_id(b, "concat_cols");
  const Matrix& va = at(a).value;
  const Matrix& vb = at(b).value;
  if (va.rows() != vb.rows()) {
    throw ShapeError("tape node " + std::to_string(nodes_.size()) + " (concat_cols): shapes " +
                     node_shapes(va, vb) + " have different row counts");
  }
  Matrix out(va.rows(), va.cols() + vb.cols());
  for (std::size_t r = 0; r < va.rows(); ++r) {
    for (std::size_t c = 0; c < va.cols(); ++c) out(r, c) = va(r, c);
    for (std::size_t c = 0; c < vb.cols(); ++c) out(r, va.cols() + c) = vb(r, c);
  }
  bool ng = at(a).needs_grad || at(b).needs_grad;
  return push(Node{Op::kConcatCols, a, b, 0.0, std::move(out), {}, ng});
}

const Matrix& Tape::value(ValueId id) const {
  check_id(id, "value");
  return at(id).value;
}

double Tape::scalar(ValueId id) const {
  check_id(id, "scalar");
  const Matrix& v = at(id).value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar: node is " + v.shape_str() + ", expected 1x1");
  }
  return v(0, 0);
}

const Matrix& Tape::grad(ValueId id) const {
  check_id(id, "grad");
  return at(id).grad;
}

void Tape::backward(ValueId root) {
  check_id(root, "backward");
  const Matrix& v = at(root).value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward: root node is " + v.shape_str() +
                     ", expected a 1x1 scalar (pass an explicit adjoint otherwise)");
  }
  Matrix seed(1, 1);
  seed(0, 0) = 1.0;
  backward(root, seed);
}

void Tape::backward(ValueId root, const Matrix& adjoint) {
  if (nodes_.empty()) {
    throw NumericError("backward: no forward pass has been recorded on this tape");
  }
  check_id(root, "backward");
  Node& root_node = nodes_[root.index];
  if (!adjoint.same_shape(root_node.value)) {
    throw ShapeError("backward: adjoint " + adjoint.shape_str() + " does not match root " +
                     root_node.value.shape_str());
  }
  root_node.grad = num::add(root_node.grad, adjoint);

  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad) continue;
    const Matrix& g = node.grad;
    switch (node.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kMatmul: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::matmul(g, num::transpose(b.value)));
        if (b.needs_grad) b.grad = num::add(b.grad, num::matmul(num::transpose(a.value), g));
        break;
      }
      case Op::kAdd: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, g);
        if (b.needs_grad) b.grad = num::add(b.grad, g);
        break;
      }
      case Op::kSub: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, g);
        if (b.needs_grad) b.grad = num::sub(b.grad, g);
        break;
      }
      case Op::kAddRowVector: {
        Node& a = nodes_[node.a.index];
        Node& row = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, g);
        if (row.needs_grad) {
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) row.grad(0, c) += g(r, c);
        }
        break;
      }
      case Op::kScale: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::scale(g, node.c));
        break;
      }
      case Op::kHadamard: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::hadamard(g, b.value));
        if (b.needs_grad) b.grad = num::add(b.grad, num::hadamard(g, a.value));
        break;
      }
      case Op::kRowScale: {
        Node& a = nodes_[node.a.index];
        Node& s = nodes_[node.b.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::row_scale(g, s.value));
        if (s.needs_grad) {
          for (std::size_t r = 0; r < g.rows(); ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < g.cols(); ++c) acc += g(r, c) * a.value(r, c);
            s.grad(r, 0) += acc;
          }
        }
        break;
      }
      case Op::kRowSum: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          for (std::size_t r = 0; r < a.value.rows(); ++r)
            for (std::size_t c = 0; c < a.value.cols(); ++c) a.grad(r, c) += g(r, 0);
        }
        break;
      }
      case Op::kSigmoid: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double y = node.value.data()[j];
            a.grad.data()[j] += g.data()[j] * y * (1.0 - y);
          }
        }
        break;
      }
      case Op::kExp: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::hadamard(g, node.value));
        break;
      }
      case Op::kLog: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          for (std::size_t j = 0; j < g.size(); ++j)
            a.grad.data()[j] += g.data()[j] / a.value.data()[j];
        }
        break;
      }
      case Op::kRelu: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          for (std::size_t j = 0; j < g.size(); ++j)
            a.grad.data()[j] += a.value.data()[j] > 0.0 ? g.data()[j] : 0.0;
        }
        break;
      }
      case Op::kReduceSum: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          const double gv = g(0, 0);
          for (std::size_t j = 0; j < a.grad.size(); ++j) a.grad.data()[j] += gv;
        }
        break;
      }
      case Op::kReduceMean: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) {
          const double gv = g(0, 0) / static_cast<double>(a.value.size());
          for (std::size_t j = 0; j < a.grad.size(); ++j) a.grad.data()[j] += gv;
        }
        break;
      }
      case Op::kMse: {
        Node& a = nodes_[node.a.index];
        Node& t = nodes_[node.b.index];
        const double gv = 2.0 * g(0, 0) / static_cast<double>(a.value.size());
        if (a.needs_grad) {
          for (std::size_t j = 0; j < a.grad.size(); ++j)
            a.grad.data()[j] += gv * (a.value.data()[j] - t.value.data()[j]);
        }
        if (t.needs_grad) {
          for (std::size_t j = 0; j < t.grad.size(); ++j)
            t.grad.data()[j] -= gv * (a.value.data()[j] - t.value.data()[j]);
        }
        break;
      }
      case Op::kTranspose: {
        Node& a = nodes_[node.a.index];
        if (a.needs_grad) a.grad = num::add(a.grad, num::transpose(g));
        break;
      }
      case Op::kDiv: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        if (a.needs_grad) {
          for (std::size_t j = 0; j < g.size(); ++j)
            a.grad.data()[j] += g.data()[j] / b.value.data()[j];
        }
        if (b.needs_grad) {
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double bv = b.value.data()[j];
            b.grad.data()[j] -= g.data()[j] * node.value.data()[j] / bv;
          }
        }
        break;
      }
      case Op::kConcatCols: {
        Node& a = nodes_[node.a.index];
        Node& b = nodes_[node.b.index];
        const std::size_t ca = a.value.cols();
        if (a.needs_grad) {
          for (std::size_t r = 0; r < a.value.rows(); ++r)
            for (std::size_t c = 0; c < ca; ++c) a.grad(r, c) += g(r, c);
        }
        if (b.needs_grad) {
          for (std::size_t r = 0; r < b.value.rows(); ++r)
            for (std::size_t c = 0; c < b.value.cols(); ++c) b.grad(r, c) += g(r, ca + c);
        }
        break;
      }
    }
  }
}

void Tape::reset() { nodes_.clear(); }

}  // namespace seqlab::num
