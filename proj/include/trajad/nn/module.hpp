#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajad/nn/ops.hpp"
#include "trajad/nn/tape.hpp"

namespace trajad::nn {

// Owns a model's parameters. Layers address parameters by index, so copying
// a ParamSet yields an independent model with value semantics.
class ParamSet {
 public:
  int add(std::string name, Index rows, Index cols);

  Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return params_.size(); }
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;

  // FNV-1a over names, shapes and raw weight bytes.
  std::uint64_t hash() const;

  nlohmann::json to_json() const;
  // Throws ShapeError when names or shapes disagree with this set.
  void load_json(const nlohmann::json& j);

 private:
  std::vector<Parameter> params_;
};

// Binds a ParamSet to a tape; `train` decides whether gradients are collected.
struct Binding {
  Tape& tape;
  ParamSet& params;
  bool train = false;

  Var operator()(int index) {
    Parameter& p = params[index];
    return tape.param(p, train ? &p : nullptr);
  }
};

struct Linear {
  int weight = -1;  // in x out
  int bias = -1;    // 1 x out

  static Linear create(ParamSet& ps, const std::string& name, Index in, Index out);
  Var operator()(Binding& b, Var x) const { return add_row(matmul(x, b(weight)), b(bias)); }
};

struct Conv1d {
  int weight = -1;  // 3*in x out
  int bias = -1;
  Index dilation = 1;

  static Conv1d create(ParamSet& ps, const std::string& name, Index in, Index out, Index dilation);
  Var operator()(Binding& b, Var x, Index length) const { return conv1d(x, b(weight), b(bias), length, dilation); }
};

// Per-column affine standardisation fitted on training inputs.
struct Standardizer {
  Vector mean;
  Vector scale;  // standard deviation, floored

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

// Glorot-uniform weights and zero biases, drawn in parameter order.
void init_glorot(ParamSet& ps, std::mt19937_64& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 10.0;  // global L2 norm; <= 0 disables
};

class Adam {
 public:
  Adam(ParamSet& params, std::vector<int> indices, AdamConfig config = {});
  Adam(ParamSet& params, AdamConfig config = {});

  // Applies one update from the accumulated gradients and clears them.
  void step();
  void zero_grad();
  double last_grad_norm() const { return last_grad_norm_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  ParamSet* params_;
  std::vector<int> indices_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long step_count_ = 0;
  double last_grad_norm_ = 0.0;
};

}  // namespace trajad::nn
