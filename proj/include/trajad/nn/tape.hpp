#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "trajad/types.hpp"

namespace trajad::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode recorder over dense Eigen matrices. Nodes are appended in
// evaluation order and back-propagated in reverse.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is kept for inspection after backward().
  Var input(Matrix value);
  // Leaf referencing a parameter without copying it. When `sink` is non-null
  // the gradient is added into sink->grad during backward().
  Var param(const Parameter& p, Parameter* sink = nullptr);

  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var record(Matrix value, const std::vector<Var>& parents, Backward backward);

  bool requires_grad(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id_)].requires_grad; }
  void accumulate(const Var& v, const Matrix& g);

  // Seeds d(loss)/d(loss) = 1 for a 1x1 loss and runs every backward closure.
  void backward(const Var& loss);

  const Matrix& value(int id) const;
  const Matrix& grad(int id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* sink = nullptr;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

}  // namespace trajad::nn
