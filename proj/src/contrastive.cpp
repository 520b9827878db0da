#include "trajad/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "trajad/errors.hpp"
#include "trajad/losses.hpp"

namespace trajad {

using nn::Var;

namespace {

constexpr int kClSchema = 1;
constexpr int kHiddenWidth = 64;

// Contrastive loss node over encoded normals (first n rows) and anomalies.
Var contrastive_loss(Var encoded, Index n, double tau) {
  const Matrix& z = encoded.value();
  BatchLossGrad lg = batch_loss_with_grad(z.topRows(n), z.bottomRows(z.rows() - n), tau);
  Matrix grad(z.rows(), z.cols());
  grad << lg.d_normals, lg.d_anomalies;
  nn::Tape* t = encoded.tape();
  Matrix value(1, 1);
  value(0, 0) = lg.loss;
  return t->record(std::move(value), {encoded}, [t, encoded, grad](const Matrix& g) {
    t->accumulate(encoded, grad * g(0, 0));
  });
}

}  // namespace

void validate(const CLConfig& cfg) {
  if (!(cfg.temperature > 0)) throw ConfigError("cl.temperature", "must be positive");
  if (cfg.n_normals < 2) throw ConfigError("cl.n_normals", "must be >= 2");
  if (cfg.m_anomalies < 1) throw ConfigError("cl.m_anomalies", "must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("cl.epochs", "must be >= 0");
  if (!(cfg.learning_rate > 0)) throw ConfigError("cl.learning_rate", "must be positive");
}

void ClEncoder::build() {
  params_ = nn::ParamSet{};
  hidden_ = nn::Linear::create(params_, "cl.hidden", kFeatureDim, kHiddenWidth);
  out_ = nn::Linear::create(params_, "cl.out", kHiddenWidth, kEncodedDim);
}

ClEncoder ClEncoder::initialize(std::uint64_t seed, nn::Standardizer input) {
  if (input.mean.size() != kFeatureDim) throw ShapeError("cl encoder: standardizer must have 128 columns");
  ClEncoder e;
  e.build();
  e.input_ = std::move(input);
  std::mt19937_64 rng(seed);
  nn::init_glorot(e.params_, rng);
  return e;
}

Var ClEncoder::forward(nn::Binding& bind, const Matrix& features) const {
  if (features.cols() != kFeatureDim) {
    throw ShapeError("cl encoder: expected 128 features, got " + std::to_string(features.cols()));
  }
  Var x = bind.tape.constant(input_.apply(features));
  return nn::l2_normalize_rows(out_(bind, nn::silu(hidden_(bind, x))));
}

Matrix ClEncoder::encode(const Matrix& features) const {
  nn::Tape tape;
  nn::Binding bind{tape, const_cast<nn::ParamSet&>(params_), false};
  return forward(bind, features).value();
}

EncodedRep ClEncoder::encode(const FeatureVector& f) const {
  return encode(Matrix(f.transpose())).row(0).transpose();
}

nlohmann::json ClEncoder::to_json() const {
  return {{"params", params_.to_json()}, {"input", input_.to_json()}};
}

ClEncoder ClEncoder::from_json(const nlohmann::json& j) {
  ClEncoder e;
  e.build();
  e.params_.load_json(j.at("params"));
  e.input_ = nn::Standardizer::from_json(j.at("input"));
  return e;
}

class ClTrainer {
 public:
  static ClEncoder train(const Matrix& normals, const Matrix& anomalies, const CLConfig& cfg, ClTrainingLog* log) {
    validate(cfg);
    if (normals.rows() < cfg.n_normals) throw DataError("train_cl_encoder: fewer normals than n_normals");
    if (anomalies.rows() < 1) throw DataError("train_cl_encoder: no anomalous features");
    Matrix pooled(normals.rows() + anomalies.rows(), kFeatureDim);
    pooled << normals, anomalies;
    ClEncoder enc = ClEncoder::initialize(cfg.seed, nn::Standardizer::fit(pooled));
    nn::Adam opt(enc.params_, nn::AdamConfig{cfg.learning_rate});
    std::mt19937_64 rng(cfg.seed ^ 0xc1c1c1c1ULL);
    std::vector<Index> order(static_cast<std::size_t>(normals.rows())), pool(static_cast<std::size_t>(anomalies.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    std::iota(pool.begin(), pool.end(), Index{0});
    const Index n = cfg.n_normals, m = cfg.m_anomalies;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      int steps = 0;
      for (Index start = 0; start + n <= normals.rows(); start += n) {
        Matrix batch(n + m, kFeatureDim);
        for (Index i = 0; i < n; ++i) batch.row(i) = normals.row(order[static_cast<std::size_t>(start + i)]);
        // Uniform draw without replacement when the pool allows it.
        if (anomalies.rows() >= m) {
          for (Index i = 0; i < m; ++i) {
            std::uniform_int_distribution<Index> pick(i, anomalies.rows() - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
            batch.row(n + i) = anomalies.row(pool[static_cast<std::size_t>(i)]);
          }
        } else {
          std::uniform_int_distribution<Index> pick(0, anomalies.rows() - 1);
          for (Index i = 0; i < m; ++i) batch.row(n + i) = anomalies.row(pick(rng));
        }
        nn::Tape tape;
        nn::Binding bind{tape, enc.params_, true};
        Var loss = contrastive_loss(enc.forward(bind, batch), n, cfg.temperature);
        if (!std::isfinite(loss.scalar())) throw TrainingError("train_cl_encoder: loss diverged at epoch " + std::to_string(epoch));
        tape.backward(loss);
        opt.step();
        total += loss.scalar();
        ++steps;
      }
      if (log) log->epoch_loss.push_back(total / std::max(steps, 1));
    }
    return enc;
  }
};

ClEncoder train_cl_encoder(const Matrix& normal_features, const Matrix& anomalous_features, const CLConfig& cfg,
                           ClTrainingLog* log) {
  return ClTrainer::train(normal_features, anomalous_features, cfg, log);
}

double separation_margin(const Matrix& normal_reps, const Matrix& anomalous_reps) {
  const Index n = normal_reps.rows();
  if (n < 2 || anomalous_reps.rows() < 1) throw DataError("separation_margin: need >= 2 normals and >= 1 anomaly");
  const Matrix nn_sim = normal_reps * normal_reps.transpose();
  const double within = (nn_sim.sum() - nn_sim.trace()) / static_cast<double>(n * (n - 1));
  const double across = (normal_reps * anomalous_reps.transpose()).mean();
  return within - across;
}

Svm fit_svm_head(const Matrix& reps, const std::vector<int>& labels, const SvmConfig& cfg) {
  return Svm::fit_classifier(reps, labels, cfg);
}

Detection ClDetector::detect(const FeatureVector& f) const {
  const double score = svm.decision(encoder.encode(f));
  return {score, score > 0};
}

Vector ClDetector::scores(const Matrix& features) const { return svm.decisions(encoder.encode(features)); }

void ClDetector::save(const std::filesystem::path& path, std::uint64_t extractor_hash) const {
  nlohmann::json j;
  j["schema_version"] = kClSchema;
  j["kind"] = "sup-cl";
  j["extractor_hash"] = extractor_hash;
  j["encoder"] = encoder.to_json();
  j["svm"] = svm.to_json();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
}

ClDetector ClDetector::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("cl checkpoint: ") + e.what());
  }
  if (j.value("schema_version", -1) != kClSchema || j.value("kind", "") != "sup-cl") {
    throw VersionError("cl checkpoint: unsupported schema or kind");
  }
  return {ClEncoder::from_json(j.at("encoder")), Svm::from_json(j.at("svm"))};
}

}  // namespace trajad
