#include "trajad/nn/tape.hpp"

#include "trajad/errors.hpp"

namespace trajad::nn {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::input(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const Parameter& p, Parameter* sink) {
  Node n;
  n.external = &p.value;
  n.requires_grad = sink != nullptr;
  n.sink = sink;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backward backward) {
  Node n;
  n.owned = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw StateError("tape: operand recorded on a different tape");
    n.requires_grad = n.requires_grad || requires_grad(p);
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id_)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw StateError("tape: loss recorded on a different tape");
  const Matrix& lv = value(loss.id_);
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("tape: backward() needs a 1x1 loss");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[static_cast<std::size_t>(loss.id_)].grad = Matrix::Ones(1, 1);
  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad);
    if (n.sink) {
      if (n.sink->grad.size() == 0) n.sink->zero_grad();
      n.sink->grad += n.grad;
    }
  }
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.owned;
}

const Matrix& Tape::grad(int id) const {
  static const Matrix kEmpty;
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.grad.size() ? n.grad : kEmpty;
}

}  // namespace trajad::nn
