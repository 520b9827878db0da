#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "trajad/nn/module.hpp"
#include "trajad/predictor.hpp"
#include "trajad/semantics.hpp"

namespace trajad {

// Semantic latent: softmax intention (3), aggressiveness code (1), residual (6).
struct LatentCode {
  Eigen::Vector3d intent = Eigen::Vector3d::Constant(1.0 / 3.0);
  double agg = 0.0;
  Eigen::Matrix<double, 6, 1> res = Eigen::Matrix<double, 6, 1>::Zero();

  Eigen::Matrix<double, kLatentDim, 1> flat() const;
};

double semantic_loss(const LatentCode& z, const SemanticLabels& g);

enum class LatentBlock { kIntent = 0, kAgg = 1, kRes = 2 };

// Draws samples of a block's target distribution: one-hot rows drawn from
// `intent_prior` for intent, standard normal otherwise.
Matrix sample_target(LatentBlock block, Index rows, std::mt19937_64& rng,
                     const Eigen::Vector3d& intent_prior = Eigen::Vector3d::Constant(1.0 / 3.0));
// Standard normal over all ten dimensions (naive latent).
Matrix sample_gaussian(Index rows, Index dim, std::mt19937_64& rng);

// BCE-with-logits discrimination loss (real -> 1, fake -> 0, averaged over both
// halves) and generator loss (fake -> 1).
std::pair<double, double> adversarial_losses(const Matrix& real_logits, const Matrix& fake_logits);

struct AAEConfig {
  int epochs = 300;
  int batch_size = 32;
  double learning_rate = 1e-3;  // peak; cosine-decayed to zero
  double adversarial_weight = 1.0;
  double semantic_weight = 1.0;
  double reconstruction_weight = 1.0;
  double threshold_quantile = 0.95;
  bool naive_latent = false;  // one Gaussian over all ten dims, no semantic loss
  AggressivenessEncoding encoding = AggressivenessEncoding::kLogHeadway;
  std::uint64_t seed = 1;
};

void validate(const AAEConfig& cfg);

// One training example: frozen-extractor feature, target-centric history and
// the semantics of the clean history.
struct AAESample {
  FeatureVector feature;
  Points2<double> local_history;  // 20 x 2, metres
  SemanticLabels semantics;
  AnomalyLabel label = AnomalyLabel::kNormal;
};

// Builds samples; throws ContractViolation if any scenario is not labelled normal.
std::vector<AAESample> make_aae_samples(const PredictorModel& extractor, std::span<const Scenario> normals,
                                        AggressivenessEncoding encoding = AggressivenessEncoding::kLogHeadway);

struct AAETrainingLog {
  std::vector<double> adv_loss;  // discriminator loss per epoch
  std::vector<double> gen_loss;
  std::vector<double> sem_loss;  // empty with naive_latent
  std::vector<double> recon_loss;
};

class AAEModel {
 public:
  static AAEModel initialize(const AAEConfig& cfg, nn::Standardizer input);

  const Eigen::Vector3d& intent_prior() const { return intent_prior_; }
  void set_intent_prior(const Eigen::Vector3d& p) { intent_prior_ = p; }

  bool naive_latent() const { return naive_; }
  int discriminator_count() const { return naive_ ? 1 : 3; }
  std::optional<double> threshold() const { return threshold_; }
  void set_threshold(double theta) { threshold_ = theta; }

  LatentCode encode_latent(const FeatureVector& f) const;
  // B x 10 latent rows (intent probabilities, agg, residual; raw for naive).
  Matrix encode(const Matrix& features) const;
  // B x 40 reconstructed histories (x0, y0, x1, y1, ...).
  Matrix reconstruct(const Matrix& features) const;

  // Mean smooth-L1 between history and reconstruction.
  double anomaly_score(const FeatureVector& f, const Points2<double>& local_history) const;
  Vector anomaly_scores(const Matrix& features, const std::vector<Points2<double>>& histories) const;

  const nn::ParamSet& params() const { return params_; }
  nlohmann::json to_json() const;
  static AAEModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path, std::uint64_t extractor_hash) const;
  static AAEModel load(const std::filesystem::path& path);

 private:
  friend class AAETrainer;
  struct Encoded {
    nn::Var logits;  // raw encoder output, B x 10
    nn::Var latent;  // as used downstream
  };

  AAEModel() = default;
  void build();
  Encoded encode_var(nn::Binding& bind, const Matrix& features) const;
  nn::Var block_var(nn::Var latent, int disc) const;
  nn::Var discriminate(nn::Binding& bind, int disc, nn::Var z) const;
  nn::Var decode(nn::Binding& bind, nn::Var latent) const;

  bool naive_ = false;
  AggressivenessEncoding encoding_ = AggressivenessEncoding::kLogHeadway;
  Eigen::Vector3d intent_prior_ = Eigen::Vector3d::Constant(1.0 / 3.0);
  nn::ParamSet params_;
  nn::Linear enc_hidden_, enc_out_, dec_hidden1_, dec_hidden2_, dec_out_;
  std::vector<nn::Linear> disc_hidden_, disc_out_;
  std::vector<int> encoder_idx_, decoder_idx_;
  std::vector<std::vector<int>> disc_idx_;
  nn::Standardizer input_;
  std::optional<double> threshold_;
};

// Optimiser state for the three update families. Holds a reference to the model.
class AAETrainer {
 public:
  AAETrainer(AAEModel& model, const AAEConfig& cfg);

  // Discriminator update on (real, encoded) followed by a generator update of
  // the encoder. Returns (disc_loss, gen_loss); only discriminator weights move
  // on the first, only encoder weights on the second.
  std::pair<double, double> discriminator_step(int disc, const Matrix& features, const Matrix& real);
  // Intention cross-entropy + squared aggressiveness error; encoder only.
  double semantic_step(const Matrix& features, const Matrix& intent_one_hot, const Vector& agg);
  // Smooth-L1 history reconstruction; encoder and decoder.
  double reconstruction_step(const Matrix& features, const Matrix& flat_histories);
  void set_learning_rate(double lr);

 private:
  AAEModel* model_;
  AAEConfig cfg_;
  std::vector<nn::Adam> disc_opt_;
  nn::Adam gen_opt_, sem_opt_, recon_opt_;
};

// Adversarial, semantic, then reconstruction updates per batch. Throws
// ContractViolation if any sample is labelled anomalous.
AAEModel train_aae(std::span<const AAESample> samples, const AAEConfig& cfg, AAETrainingLog* log = nullptr);

// Empirical q-quantile of validation reconstruction errors; stored in the
// model. Throws DataError for fewer than 50 scores or q outside (0, 1].
double calibrate_threshold(AAEModel& model, const Vector& validation_scores, double q);

// Fraction of samples whose argmax intention matches the labeller.
double intention_accuracy(const AAEModel& model, std::span<const AAESample> samples);

}  // namespace trajad
