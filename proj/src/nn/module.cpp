#include "trajad/nn/module.hpp"

#include <cmath>
#include <numeric>

#include "trajad/errors.hpp"
#include "trajad/rng.hpp"

namespace trajad::nn {

int ParamSet::add(std::string name, Index rows, Index cols) {
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

void ParamSet::zero_grad() {
  for (Parameter& p : params_) p.zero_grad();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::uint64_t ParamSet::hash() const {
  std::string bytes;
  for (const Parameter& p : params_) {
    bytes += p.name;
    bytes += std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols());
    bytes.append(reinterpret_cast<const char*>(p.value.data()),
                 static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  return fnv1a(bytes);
}

nlohmann::json ParamSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const Parameter& p : params_) {
    std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
    arr.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", data}});
  }
  return arr;
}

void ParamSet::load_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != params_.size()) {
    throw ShapeError("checkpoint: expected " + std::to_string(params_.size()) + " parameter tensors");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = params_[i];
    const auto& e = j[i];
    const std::string name = e.at("name").get<std::string>();
    const Index rows = e.at("rows").get<Index>();
    const Index cols = e.at("cols").get<Index>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw ShapeError("checkpoint: tensor '" + name + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not match expected '" + p.name + "' " + std::to_string(p.value.rows()) + "x" +
                       std::to_string(p.value.cols()));
    }
    const auto data = e.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) throw ShapeError("checkpoint: tensor '" + name + "' data size");
    p.value = Eigen::Map<const Matrix>(data.data(), rows, cols);
    p.zero_grad();
  }
}

Linear Linear::create(ParamSet& ps, const std::string& name, Index in, Index out) {
  return {ps.add(name + ".weight", in, out), ps.add(name + ".bias", 1, out)};
}

Conv1d Conv1d::create(ParamSet& ps, const std::string& name, Index in, Index out, Index dilation) {
  return {ps.add(name + ".weight", 3 * in, out), ps.add(name + ".bias", 1, out), dilation};
}

void init_glorot(ParamSet& ps, std::mt19937_64& rng) {
  for (Parameter& p : ps.all()) {
    if (p.value.rows() == 1) {
      p.value.setZero();
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index i = 0; i < p.value.size(); ++i) p.value(i) = dist(rng);
    p.zero_grad();
  }
}

Adam::Adam(ParamSet& params, std::vector<int> indices, AdamConfig config)
    : params_(&params), indices_(std::move(indices)), config_(config) {
  for (int i : indices_) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

namespace {
std::vector<int> all_indices(const ParamSet& ps) {
  std::vector<int> idx(ps.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}
}  // namespace

Adam::Adam(ParamSet& params, AdamConfig config) : Adam(params, all_indices(params), config) {}

void Adam::zero_grad() {
  for (int i : indices_) (*params_)[i].zero_grad();
}

void Adam::step() {
  double norm2 = 0.0;
  for (int i : indices_) {
    Parameter& p = (*params_)[i];
    if (p.grad.size() == 0) p.zero_grad();
    norm2 += p.grad.squaredNorm();
  }
  last_grad_norm_ = std::sqrt(norm2);
  if (!std::isfinite(last_grad_norm_)) throw TrainingError("non-finite gradient");
  const double clip = (config_.grad_clip > 0 && last_grad_norm_ > config_.grad_clip)
                          ? config_.grad_clip / last_grad_norm_
                          : 1.0;
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    Parameter& p = (*params_)[indices_[k]];
    const Matrix g = p.grad * clip;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value.array() -= config_.learning_rate * (m_[k].array() / bc1) /
                       ((v_[k].array() / bc2).sqrt() + config_.eps);
    p.zero_grad();
  }
}

Standardizer Standardizer::fit(const Matrix& x) {
  if (x.rows() < 1) throw DataError("standardizer: empty input");
  Standardizer st;
  st.mean = x.colwise().mean().transpose();
  st.scale = ((x.rowwise() - st.mean.transpose()).array().square().colwise().mean().sqrt()).matrix().transpose();
  st.scale = st.scale.cwiseMax(1e-6);
  return st;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw ShapeError("standardizer: expected " + std::to_string(mean.size()) + " columns, got " + std::to_string(x.cols()));
  }
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

nlohmann::json Standardizer::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw ShapeError("standardizer: mean and scale differ in length");
  Standardizer st;
  st.mean = Eigen::Map<const Vector>(m.data(), static_cast<Index>(m.size()));
  st.scale = Eigen::Map<const Vector>(s.data(), static_cast<Index>(s.size()));
  return st;
}

}  // namespace trajad::nn
