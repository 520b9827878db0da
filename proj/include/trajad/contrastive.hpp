#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trajad/nn/module.hpp"
#include "trajad/predictor.hpp"
#include "trajad/svm.hpp"

namespace trajad {

using EncodedRep = Eigen::Matrix<double, kEncodedDim, 1>;

struct CLConfig {
  double temperature = 0.1;
  int n_normals = 8;
  int m_anomalies = 8;
  int epochs = 20;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

// Throws ConfigError naming the offending field.
void validate(const CLConfig& cfg);

// 128 -> 64 -> 32 feed-forward encoder with L2-normalised output. Inputs are
// standardised with statistics fitted on the training features.
class ClEncoder {
 public:
  static ClEncoder initialize(std::uint64_t seed, nn::Standardizer input);

  EncodedRep encode(const FeatureVector& f) const;
  Matrix encode(const Matrix& features) const;  // B x 32; ShapeError unless B x 128

  const nn::ParamSet& params() const { return params_; }
  nlohmann::json to_json() const;
  static ClEncoder from_json(const nlohmann::json& j);

 private:
  friend class ClTrainer;
  ClEncoder() = default;
  void build();
  nn::Var forward(nn::Binding& bind, const Matrix& features) const;

  nn::ParamSet params_;
  nn::Linear hidden_, out_;
  nn::Standardizer input_;
};

struct ClTrainingLog {
  std::vector<double> epoch_loss;
};

// Seeded contrastive training. Each step draws N normals (epoch shuffle) and
// M anomalies uniformly from the pool.
ClEncoder train_cl_encoder(const Matrix& normal_features, const Matrix& anomalous_features, const CLConfig& cfg,
                           ClTrainingLog* log = nullptr);

// Mean within-normal cosine similarity minus mean normal-to-anomaly similarity.
double separation_margin(const Matrix& normal_reps, const Matrix& anomalous_reps);

struct Detection {
  double score = 0.0;  // higher = more anomalous
  bool anomalous = false;
};

// RBF C-SVC (C = 1, gamma = scale) on encoded reps; labels 1 = anomaly.
Svm fit_svm_head(const Matrix& reps, const std::vector<int>& labels, const SvmConfig& cfg = {});

struct ClDetector {
  ClEncoder encoder;
  Svm svm;

  Detection detect(const FeatureVector& f) const;
  Vector scores(const Matrix& features) const;

  void save(const std::filesystem::path& path, std::uint64_t extractor_hash) const;
  static ClDetector load(const std::filesystem::path& path);
};

}  // namespace trajad
