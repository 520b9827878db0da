#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "trajad/nn/module.hpp"
#include "trajad/scenario.hpp"

namespace trajad {

using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

enum class TrainingState { kTrainable, kFrozen };

struct PredictionResult {
  Trajectory predicted_future;  // 30 waypoints on the ground-truth time grid
};

struct PredictorHyperparams {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct PredictorTrainingLog {
  std::vector<double> epoch_loss;  // mean smooth-L1 per epoch
  std::vector<double> val_ade;     // per epoch; empty without a validation set
};

// Trajectory predictor whose encoder doubles as the 128-d scenario feature
// extractor. Inputs are re-expressed in the target-centric frame: origin at
// the last history waypoint, x-axis along the heading of the final 0.5 s.
class PredictorModel {
 public:
  static constexpr int kChannels = 64;
  static constexpr int kLanePoints = 10;

  // Glorot-initialised, trainable.
  static PredictorModel initialize(std::uint64_t seed);

  TrainingState state() const { return state_; }
  void freeze() { state_ = TrainingState::kFrozen; }
  bool frozen() const { return state_ == TrainingState::kFrozen; }

  // Detection-time feature extraction; throws StateError unless frozen.
  FeatureVector extract_features(const Scenario& s) const;
  Matrix extract_features(std::span<const Scenario> batch) const;  // B x 128

  PredictionResult predict_future(const Scenario& s) const;
  std::vector<PredictionResult> predict_future(std::span<const Scenario> batch) const;

  // Differentiable path used by the attack: maps target-history coordinates
  // ((B*20) x 2, scenario-major) to predicted world futures ((B*30) x 2).
  // Neighbours and lanes come from `batch` and are treated as constants.
  nn::Var forward_world(nn::Tape& tape, nn::Var target_history, std::span<const Scenario* const> batch) const;

  // Target-centric history coordinates ((B*20) x 2) used by reconstruction
  // and the trajectory-space baseline.
  static Matrix local_history(const Scenario& s);

  std::uint64_t weight_hash() const { return params_.hash(); }
  const nn::ParamSet& params() const { return params_; }

  // A non-empty config hash is recorded alongside the weights.
  void save(const std::filesystem::path& path, std::string_view config_hash = {}) const;
  // Validates schema version and every tensor shape.
  static PredictorModel load(const std::filesystem::path& path);

 private:
  friend PredictorModel train_predictor(std::span<const Scenario>, const PredictorHyperparams&,
                                        PredictorTrainingLog*, std::span<const Scenario>);
  struct Outputs {
    nn::Var features;      // B x 128
    nn::Var local_future;  // (B*30) x 2
    nn::Var frame;         // B x 4
  };

  PredictorModel() = default;
  void build();
  Outputs forward(nn::Binding& bind, nn::Var target_history, std::span<const Scenario* const> batch) const;

  nn::ParamSet params_;
  std::vector<nn::Conv1d> convs_;
  nn::Linear agent_proj_, lane_in_, lane_hidden_, mp_self_[2], dec_hidden_, dec_out_;
  int mp_neighbor_[2] = {-1, -1};
  TrainingState state_ = TrainingState::kTrainable;
};

// Minimises smooth-L1 between predicted and ground-truth futures (target
// frame). Throws DataError on non-normal scenarios, ConfigError for epochs < 1
// and TrainingError on a non-finite loss. Returns a frozen model.
PredictorModel train_predictor(std::span<const Scenario> dataset, const PredictorHyperparams& hp,
                               PredictorTrainingLog* log = nullptr, std::span<const Scenario> validation = {});

// Average displacement error of a prediction against a ground-truth future.
double average_displacement_error(const Trajectory& predicted, const Trajectory& truth);

// Mean ADE over a set; batched.
double mean_ade(const PredictorModel& model, std::span<const Scenario> scenarios);

// Runs fn over consecutive chunks of at most `chunk` scenarios.
void for_each_chunk(std::size_t count, std::size_t chunk, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace trajad
