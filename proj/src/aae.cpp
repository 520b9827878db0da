#include "trajad/aae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <numeric>

#include "trajad/errors.hpp"
#include "trajad/losses.hpp"

namespace trajad {

using nn::Var;

namespace {

constexpr int kAaeSchema = 1;
constexpr int kHidden = 64;
constexpr int kDiscHidden = 32;
constexpr double kOutputScale = 10.0;

struct BlockSpec {
  const char* name;
  Index start;
  Index dim;
  const char* target;
};
constexpr BlockSpec kBlocks[3] = {{"intent", 0, 3, "categorical"}, {"agg", 3, 1, "gaussian"}, {"res", 4, 6, "gaussian"}};

Matrix flatten_history(const Points2<double>& h) {
  Matrix row(1, 2 * h.rows());
  for (Index i = 0; i < h.rows(); ++i) {
    row(0, 2 * i) = h(i, 0);
    row(0, 2 * i + 1) = h(i, 1);
  }
  return row;
}

std::vector<int> concat(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

Eigen::Matrix<double, kLatentDim, 1> LatentCode::flat() const {
  Eigen::Matrix<double, kLatentDim, 1> v;
  v << intent, agg, res;
  return v;
}

double semantic_loss(const LatentCode& z, const SemanticLabels& g) {
  return semantic_loss(z.intent, z.agg, g.intention_one_hot(), g.aggressiveness);
}

Matrix sample_gaussian(Index rows, Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix out(rows, dim);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < dim; ++c) out(r, c) = n(rng);
  }
  return out;
}

Matrix sample_target(LatentBlock block, Index rows, std::mt19937_64& rng, const Eigen::Vector3d& intent_prior) {
  if (block != LatentBlock::kIntent) return sample_gaussian(rows, kBlocks[static_cast<int>(block)].dim, rng);
  std::discrete_distribution<int> cat({intent_prior(0), intent_prior(1), intent_prior(2)});
  Matrix out = Matrix::Zero(rows, 3);
  for (Index r = 0; r < rows; ++r) out(r, cat(rng)) = 1.0;
  return out;
}

std::pair<double, double> adversarial_losses(const Matrix& real_logits, const Matrix& fake_logits) {
  nn::Tape tape;
  Var real = tape.constant(real_logits), fake = tape.constant(fake_logits);
  const double disc = 0.5 * (nn::bce_with_logits_mean(real, Matrix::Ones(real.rows(), real.cols())).scalar() +
                             nn::bce_with_logits_mean(fake, Matrix::Zero(fake.rows(), fake.cols())).scalar());
  const double gen = nn::bce_with_logits_mean(fake, Matrix::Ones(fake.rows(), fake.cols())).scalar();
  return {disc, gen};
}

void validate(const AAEConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("aae.epochs", "must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("aae.batch_size", "must be >= 1");
  if (!(cfg.learning_rate > 0)) throw ConfigError("aae.learning_rate", "must be positive");
  if (cfg.adversarial_weight < 0 || cfg.semantic_weight < 0 || cfg.reconstruction_weight < 0) {
    throw ConfigError("aae.weights", "loss weights must be >= 0");
  }
  if (!(cfg.threshold_quantile > 0 && cfg.threshold_quantile <= 1)) {
    throw ConfigError("aae.threshold_quantile", "must lie in (0, 1]");
  }
}

std::vector<AAESample> make_aae_samples(const PredictorModel& extractor, std::span<const Scenario> normals,
                                        AggressivenessEncoding encoding) {
  for (const Scenario& s : normals) {
    if (s.anomaly_label != AnomalyLabel::kNormal) {
      throw ContractViolation("aae training received anomaly-labelled scenario '" + s.scenario_id + "'");
    }
  }
  const Matrix features = extractor.extract_features(normals);
  std::vector<AAESample> out;
  out.reserve(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    out.push_back({features.row(static_cast<Index>(i)).transpose(), PredictorModel::local_history(normals[i]),
                   extract_semantics(normals[i], encoding), normals[i].anomaly_label});
  }
  return out;
}

void AAEModel::build() {
  params_ = nn::ParamSet{};
  enc_hidden_ = nn::Linear::create(params_, "enc.hidden", kFeatureDim, kHidden);
  enc_out_ = nn::Linear::create(params_, "enc.out", kHidden, kLatentDim);
  encoder_idx_ = {enc_hidden_.weight, enc_hidden_.bias, enc_out_.weight, enc_out_.bias};
  dec_hidden1_ = nn::Linear::create(params_, "dec.hidden1", kLatentDim, kHidden);
  dec_hidden2_ = nn::Linear::create(params_, "dec.hidden2", kHidden, kHidden);
  dec_out_ = nn::Linear::create(params_, "dec.out", kHidden, 2 * kHistoryLength);
  decoder_idx_ = {dec_hidden1_.weight, dec_hidden1_.bias, dec_hidden2_.weight, dec_hidden2_.bias,
                  dec_out_.weight,     dec_out_.bias};
  disc_hidden_.clear();
  disc_out_.clear();
  disc_idx_.clear();
  for (int d = 0; d < discriminator_count(); ++d) {
    const std::string name = naive_ ? "disc.latent" : std::string("disc.") + kBlocks[d].name;
    const Index dim = naive_ ? kLatentDim : kBlocks[d].dim;
    disc_hidden_.push_back(nn::Linear::create(params_, name + ".hidden", dim, kDiscHidden));
    disc_out_.push_back(nn::Linear::create(params_, name + ".out", kDiscHidden, 1));
    disc_idx_.push_back({disc_hidden_.back().weight, disc_hidden_.back().bias, disc_out_.back().weight,
                         disc_out_.back().bias});
  }
}

AAEModel AAEModel::initialize(const AAEConfig& cfg, nn::Standardizer input) {
  validate(cfg);
  if (input.mean.size() != kFeatureDim) throw ShapeError("aae: standardizer must have 128 columns");
  AAEModel m;
  m.naive_ = cfg.naive_latent;
  m.encoding_ = cfg.encoding;
  m.build();
  m.input_ = std::move(input);
  std::mt19937_64 rng(cfg.seed);
  nn::init_glorot(m.params_, rng);
  return m;
}

AAEModel::Encoded AAEModel::encode_var(nn::Binding& bind, const Matrix& features) const {
  if (features.cols() != kFeatureDim) {
    throw ShapeError("aae encoder: expected 128 features, got " + std::to_string(features.cols()));
  }
  Var x = bind.tape.constant(input_.apply(features));
  Var logits = enc_out_(bind, nn::silu(enc_hidden_(bind, x)));
  if (naive_) return {logits, logits};
  Var latent = nn::concat_cols({nn::softmax_rows(nn::slice_cols(logits, 0, 3)), nn::slice_cols(logits, 3, kLatentDim - 3)});
  return {logits, latent};
}

Var AAEModel::block_var(Var latent, int disc) const {
  if (naive_) return latent;
  return nn::slice_cols(latent, kBlocks[disc].start, kBlocks[disc].dim);
}

Var AAEModel::discriminate(nn::Binding& bind, int disc, Var z) const {
  const auto d = static_cast<std::size_t>(disc);
  return disc_out_[d](bind, nn::silu(disc_hidden_[d](bind, z)));
}

Var AAEModel::decode(nn::Binding& bind, Var latent) const {
  Var h = nn::silu(dec_hidden2_(bind, nn::silu(dec_hidden1_(bind, latent))));
  return nn::scale(dec_out_(bind, h), kOutputScale);
}

Matrix AAEModel::encode(const Matrix& features) const {
  nn::Tape tape;
  nn::Binding bind{tape, const_cast<nn::ParamSet&>(params_), false};
  return encode_var(bind, features).latent.value();
}

LatentCode AAEModel::encode_latent(const FeatureVector& f) const {
  const Matrix z = encode(Matrix(f.transpose()));
  LatentCode code;
  code.intent = z.row(0).head<3>().transpose();
  code.agg = z(0, 3);
  code.res = z.row(0).tail<6>().transpose();
  return code;
}

Matrix AAEModel::reconstruct(const Matrix& features) const {
  nn::Tape tape;
  nn::Binding bind{tape, const_cast<nn::ParamSet&>(params_), false};
  return decode(bind, encode_var(bind, features).latent).value();
}

Vector AAEModel::anomaly_scores(const Matrix& features, const std::vector<Points2<double>>& histories) const {
  if (static_cast<Index>(histories.size()) != features.rows()) throw ShapeError("aae: one history per feature row required");
  const Matrix rec = reconstruct(features);
  Vector out(features.rows());
  for (Index i = 0; i < features.rows(); ++i) {
    out(i) = reconstruction_loss(flatten_history(histories[static_cast<std::size_t>(i)]), rec.row(i));
  }
  return out;
}

double AAEModel::anomaly_score(const FeatureVector& f, const Points2<double>& local_history) const {
  return anomaly_scores(Matrix(f.transpose()), {local_history})(0);
}

nlohmann::json AAEModel::to_json() const {
  nlohmann::json j;
  j["naive_latent"] = naive_;
  nlohmann::json blocks = nlohmann::json::array();
  if (naive_) {
    blocks.push_back({{"name", "latent"}, {"dim", kLatentDim}, {"target", "gaussian"}});
  } else {
    for (const BlockSpec& b : kBlocks) blocks.push_back({{"name", b.name}, {"dim", b.dim}, {"target", b.target}});
    j["aggressiveness_encoding"] = encoding_ == AggressivenessEncoding::kLogHeadway ? "log_headway" : "raw_headway";
    j["intent_prior"] = {intent_prior_(0), intent_prior_(1), intent_prior_(2)};
  }
  j["blocks"] = blocks;
  j["threshold"] = threshold_ ? nlohmann::json(*threshold_) : nlohmann::json(nullptr);
  j["input"] = input_.to_json();
  j["params"] = params_.to_json();
  return j;
}

AAEModel AAEModel::from_json(const nlohmann::json& j) {
  AAEModel m;
  m.naive_ = j.at("naive_latent").get<bool>();
  if (!m.naive_) {
    m.encoding_ = j.value("aggressiveness_encoding", "log_headway") == "raw_headway" ? AggressivenessEncoding::kRawHeadway
                                                                                  : AggressivenessEncoding::kLogHeadway;
    const auto p = j.at("intent_prior").get<std::vector<double>>();
    if (p.size() != 3) throw ShapeError("aae checkpoint: intent_prior must have three entries");
    m.intent_prior_ << p[0], p[1], p[2];
  }
  m.build();
  m.input_ = nn::Standardizer::from_json(j.at("input"));
  m.params_.load_json(j.at("params"));
  if (!j.at("threshold").is_null()) m.threshold_ = j.at("threshold").get<double>();
  return m;
}

void AAEModel::save(const std::filesystem::path& path, std::uint64_t extractor_hash) const {
  nlohmann::json j = to_json();
  j["schema_version"] = kAaeSchema;
  j["kind"] = "aae";
  j["extractor_hash"] = extractor_hash;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
}

AAEModel AAEModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("aae checkpoint: ") + e.what());
  }
  if (j.value("schema_version", -1) != kAaeSchema || j.value("kind", "") != "aae") {
    throw VersionError("aae checkpoint: unsupported schema or kind");
  }
  return from_json(j);
}

AAETrainer::AAETrainer(AAEModel& model, const AAEConfig& cfg)
    : model_(&model),
      cfg_(cfg),
      gen_opt_(model.params_, model.encoder_idx_, nn::AdamConfig{cfg.learning_rate}),
      sem_opt_(model.params_, model.encoder_idx_, nn::AdamConfig{cfg.learning_rate}),
      recon_opt_(model.params_, concat(model.encoder_idx_, model.decoder_idx_), nn::AdamConfig{cfg.learning_rate}) {
  for (const auto& idx : model.disc_idx_) disc_opt_.emplace_back(model.params_, idx, nn::AdamConfig{cfg.learning_rate});
}

void AAETrainer::set_learning_rate(double lr) {
  for (nn::Adam& opt : disc_opt_) opt.set_learning_rate(lr);
  gen_opt_.set_learning_rate(lr);
  sem_opt_.set_learning_rate(lr);
  recon_opt_.set_learning_rate(lr);
}

std::pair<double, double> AAETrainer::discriminator_step(int disc, const Matrix& features, const Matrix& real) {
  AAEModel& m = *model_;
  if (disc < 0 || disc >= m.discriminator_count()) throw ConfigError("disc", "no such discriminator");
  m.params_.zero_grad();
  double disc_loss, gen_loss;
  {
    // Encoded codes enter as constants: only the discriminator moves.
    nn::Tape tape;
    nn::Binding frozen{tape, m.params_, false};
    const Matrix fake = m.block_var(m.encode_var(frozen, features).latent, disc).value();
    if (real.cols() != fake.cols()) throw ShapeError("discriminator_step: real samples have the wrong width");
    nn::Binding bind{tape, m.params_, true};
    Var real_logits = m.discriminate(bind, disc, tape.constant(real));
    Var fake_logits = m.discriminate(bind, disc, tape.constant(fake));
    Var loss = nn::scale(nn::bce_with_logits_mean(real_logits, Matrix::Ones(real.rows(), 1)) +
                             nn::bce_with_logits_mean(fake_logits, Matrix::Zero(fake.rows(), 1)),
                         0.5);
    disc_loss = loss.scalar();
    if (!std::isfinite(disc_loss)) throw TrainingError("aae: discriminator loss diverged");
    tape.backward(loss);
    disc_opt_[static_cast<std::size_t>(disc)].step();
  }
  m.params_.zero_grad();
  {
    nn::Tape tape;
    nn::Binding bind{tape, m.params_, true};
    Var fake_logits = m.discriminate(bind, disc, m.block_var(m.encode_var(bind, features).latent, disc));
    Var loss = nn::bce_with_logits_mean(fake_logits, Matrix::Ones(fake_logits.rows(), 1));
    gen_loss = loss.scalar();
    if (!std::isfinite(gen_loss)) throw TrainingError("aae: generator loss diverged");
    tape.backward(nn::scale(loss, cfg_.adversarial_weight));
    gen_opt_.step();
  }
  m.params_.zero_grad();
  return {disc_loss, gen_loss};
}

double AAETrainer::semantic_step(const Matrix& features, const Matrix& intent_one_hot, const Vector& agg) {
  AAEModel& m = *model_;
  if (m.naive_) throw StateError("semantic_step: naive latent has no semantic blocks");
  m.params_.zero_grad();
  nn::Tape tape;
  nn::Binding bind{tape, m.params_, true};
  AAEModel::Encoded e = m.encode_var(bind, features);
  const double inv_b = 1.0 / static_cast<double>(features.rows());
  Var ce = nn::scale(nn::sum(nn::mul(nn::log_softmax_rows(nn::slice_cols(e.logits, 0, 3)), tape.constant(intent_one_hot))),
                     -inv_b);
  Var sq = nn::scale(nn::sum(nn::square(nn::slice_cols(e.latent, 3, 1) - tape.constant(agg))), inv_b);
  Var loss = ce + sq;
  if (!std::isfinite(loss.scalar())) throw TrainingError("aae: semantic loss diverged");
  tape.backward(nn::scale(loss, cfg_.semantic_weight));
  sem_opt_.step();
  m.params_.zero_grad();
  return loss.scalar();
}

double AAETrainer::reconstruction_step(const Matrix& features, const Matrix& flat_histories) {
  AAEModel& m = *model_;
  m.params_.zero_grad();
  nn::Tape tape;
  nn::Binding bind{tape, m.params_, true};
  Var loss = nn::smooth_l1_mean(m.decode(bind, m.encode_var(bind, features).latent), tape.constant(flat_histories));
  if (!std::isfinite(loss.scalar())) throw TrainingError("aae: reconstruction loss diverged");
  tape.backward(nn::scale(loss, cfg_.reconstruction_weight));
  recon_opt_.step();
  m.params_.zero_grad();
  return loss.scalar();
}

AAEModel train_aae(std::span<const AAESample> samples, const AAEConfig& cfg, AAETrainingLog* log) {
  validate(cfg);
  if (samples.empty()) throw DataError("train_aae: no training samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].label != AnomalyLabel::kNormal) {
      throw ContractViolation("train_aae: sample " + std::to_string(i) + " is labelled " +
                              std::string(to_string(samples[i].label)));
    }
  }
  const Index n = static_cast<Index>(samples.size());
  Matrix features(n, kFeatureDim), histories(n, 2 * kHistoryLength), intents(n, 3);
  Vector agg(n);
  for (Index i = 0; i < n; ++i) {
    const AAESample& s = samples[static_cast<std::size_t>(i)];
    if (s.local_history.rows() != kHistoryLength) throw ShapeError("train_aae: histories must have 20 waypoints");
    features.row(i) = s.feature.transpose();
    histories.row(i) = flatten_history(s.local_history);
    intents.row(i) = s.semantics.intention_one_hot().transpose();
    agg(i) = s.semantics.aggressiveness;
  }
  AAEModel model = AAEModel::initialize(cfg, nn::Standardizer::fit(features));
  // Categorical target follows the labeller's class frequencies (Laplace smoothed).
  model.set_intent_prior((intents.colwise().sum().transpose().array() + 1.0) / (static_cast<double>(n) + 3.0));
  AAETrainer trainer(model, cfg);
  std::mt19937_64 rng(cfg.seed ^ 0xaaeaaeULL);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Cosine decay to zero so the returned weights are a settled iterate.
    trainer.set_learning_rate(0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs)));
    std::shuffle(order.begin(), order.end(), rng);
    double adv = 0.0, gen = 0.0, sem = 0.0, rec = 0.0;
    int batches = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index b = std::min<Index>(cfg.batch_size, n - start);
      Matrix f(b, kFeatureDim), h(b, 2 * kHistoryLength), g(b, 3);
      Vector a(b);
      for (Index i = 0; i < b; ++i) {
        const Index k = order[static_cast<std::size_t>(start + i)];
        f.row(i) = features.row(k);
        h.row(i) = histories.row(k);
        g.row(i) = intents.row(k);
        a(i) = agg(k);
      }
      for (int d = 0; d < model.discriminator_count(); ++d) {
        const Matrix real = model.naive_latent() ? sample_gaussian(b, kLatentDim, rng)
                                                 : sample_target(static_cast<LatentBlock>(d), b, rng, model.intent_prior());
        const auto [dl, gl] = trainer.discriminator_step(d, f, real);
        adv += dl / model.discriminator_count();
        gen += gl / model.discriminator_count();
      }
      if (!model.naive_latent()) sem += trainer.semantic_step(f, g, a);
      rec += trainer.reconstruction_step(f, h);
      ++batches;
    }
    if (log) {
      log->adv_loss.push_back(adv / batches);
      log->gen_loss.push_back(gen / batches);
      if (!model.naive_latent()) log->sem_loss.push_back(sem / batches);
      log->recon_loss.push_back(rec / batches);
    }
  }
  return model;
}

double calibrate_threshold(AAEModel& model, const Vector& validation_scores, double q) {
  if (!(q > 0 && q <= 1)) throw ConfigError("threshold_quantile", "must lie in (0, 1]");
  if (validation_scores.size() < 50) {
    throw DataError("calibrate_threshold: need >= 50 validation normals, got " + std::to_string(validation_scores.size()));
  }
  std::vector<double> s(validation_scores.data(), validation_scores.data() + validation_scores.size());
  std::sort(s.begin(), s.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size())));
  const double theta = s[std::clamp<std::size_t>(rank, 1, s.size()) - 1];
  model.set_threshold(theta);
  return theta;
}

double intention_accuracy(const AAEModel& model, std::span<const AAESample> samples) {
  if (model.naive_latent()) throw StateError("intention_accuracy: naive latent has no intention block");
  if (samples.empty()) return 0.0;
  Matrix f(static_cast<Index>(samples.size()), kFeatureDim);
  for (std::size_t i = 0; i < samples.size(); ++i) f.row(static_cast<Index>(i)) = samples[i].feature.transpose();
  const Matrix z = model.encode(f);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Index arg;
    z.row(static_cast<Index>(i)).head<3>().maxCoeff(&arg);
    hits += arg == static_cast<Index>(samples[i].semantics.intention);
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace trajad
