#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "fixtures.hpp"
#include "gradchecks.hpp"
#include "trajad/aae.hpp"
#include "trajad/baselines.hpp"
#include "trajad/bench.hpp"
#include "trajad/contrastive.hpp"
#include "trajad/errors.hpp"
#include "trajad/svm.hpp"

using namespace trajad;

namespace {

// Two Gaussian blobs, label 1 shifted by `gap` along every axis.
std::pair<Matrix, std::vector<int>> blobs(int n, int dim, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix x = gradcheck::gaussian(2 * n, dim, rng);
  std::vector<int> y(2 * n, 0);
  for (int i = n; i < 2 * n; ++i) {
    x.row(i).array() += gap;
    y[i] = 1;
  }
  return {x, y};
}

// Small fully attacked benchmark shared by the bench tests.
struct MiniBench {
  std::vector<Scenario> random, directional;
  BenchData data;
};

const MiniBench& mini_bench() {
  static const MiniBench b = [] {
    MiniBench m;
    AttackConfig cfg;
    cfg.steps = 15;
    cfg.pattern = AttackPattern::kRandom;
    m.random = build_anomaly_dataset(fixtures::predictor(), fixtures::normals(), cfg, 80);
    cfg.pattern = AttackPattern::kDirectional;
    m.directional = build_anomaly_dataset(fixtures::predictor(), fixtures::normals(), cfg, 80);
    m.data = BenchData::build(fixtures::predictor(), fixtures::normals(),
                              {{AttackPattern::kRandom, m.random}, {AttackPattern::kDirectional, m.directional}});
    return m;
  }();
  return b;
}

BenchConfig quick_config() {
  BenchConfig cfg;
  cfg.cl.epochs = 3;
  cfg.aae.epochs = 3;
  return cfg;
}

}  // namespace

TEST(Svm, SeparatesBlobs) {
  const auto [x, y] = blobs(40, 3, 4.0, 1);
  const Svm svm = Svm::fit_classifier(x, y);
  const Vector d = svm.decisions(x);
  int correct = 0;
  for (Index i = 0; i < d.size(); ++i) correct += (d(i) > 0) == (y[static_cast<std::size_t>(i)] == 1);
  EXPECT_GE(correct, 78);
  EXPECT_NEAR(svm.gamma(), scale_gamma(x), 1e-15);
}

TEST(Svm, SingleClassIsDataError) {
  EXPECT_THROW(Svm::fit_classifier(Matrix::Ones(4, 2), {1, 1, 1, 1}), DataError);
}

TEST(Svm, OneClassNuBoundsTrainingOutliers) {
  std::mt19937_64 rng(2);
  const Matrix x = gradcheck::gaussian(300, 4, rng);
  for (double nu : {0.05, 0.1, 0.3}) {
    SvmConfig cfg;
    cfg.nu = nu;
    cfg.gamma = 0.25;
    const Vector d = Svm::fit_one_class(x, cfg).decisions(x);
    const double outliers = (d.array() < 0).cast<double>().mean();
    EXPECT_NEAR(outliers, nu, 0.05) << "nu " << nu;
  }
}

TEST(Svm, JsonRoundTrip) {
  const auto [x, y] = blobs(20, 2, 2.0, 3);
  const Svm a = Svm::fit_classifier(x, y);
  const Svm b = Svm::from_json(a.to_json());
  EXPECT_TRUE(a.decisions(x).isApprox(b.decisions(x)));
}

TEST(Svm, RbfKernelClosedForm) {
  Matrix a(1, 2), b(2, 2);
  a << 0, 0;
  b << 1, 0, 1, 1;
  const Matrix k = rbf_kernel(a, b, 0.5);
  EXPECT_NEAR(k(0, 0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(k(0, 1), std::exp(-1.0), 1e-15);
}

TEST(Contrastive, TrainingSeparatesClusters) {
  const auto [x, y] = blobs(60, kFeatureDim, 0.8, 4);
  const Matrix normals = x.topRows(60), anomalies = x.bottomRows(60);
  CLConfig cfg;
  cfg.epochs = 8;
  ClTrainingLog log;
  const ClEncoder enc = train_cl_encoder(normals, anomalies, cfg, &log);
  ASSERT_EQ(log.epoch_loss.size(), 8u);
  EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());
  const Matrix rn = enc.encode(normals), ra = enc.encode(anomalies);
  EXPECT_EQ(rn.cols(), kEncodedDim);
  EXPECT_NEAR(rn.row(0).norm(), 1.0, 1e-9);
  EXPECT_GT(separation_margin(rn, ra), 0.1);
}

TEST(Contrastive, DeterministicPerSeed) {
  const auto [x, y] = blobs(20, kFeatureDim, 0.8, 5);
  CLConfig cfg;
  cfg.epochs = 2;
  const ClEncoder a = train_cl_encoder(x.topRows(20), x.bottomRows(20), cfg);
  const ClEncoder b = train_cl_encoder(x.topRows(20), x.bottomRows(20), cfg);
  EXPECT_EQ(a.params().hash(), b.params().hash());
}

TEST(Contrastive, ValidatesConfig) {
  CLConfig cfg;
  cfg.temperature = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = CLConfig{};
  cfg.n_normals = 1;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Contrastive, DetectorCheckpointRoundTrip) {
  const auto [x, y] = blobs(30, kFeatureDim, 0.8, 6);
  CLConfig cfg;
  cfg.epochs = 2;
  const ClEncoder enc = train_cl_encoder(x.topRows(30), x.bottomRows(30), cfg);
  const ClDetector det{enc, fit_svm_head(enc.encode(x), y)};
  const auto p = std::filesystem::temp_directory_path() / "trajad_test_cl.json";
  det.save(p, 42);
  const ClDetector back = ClDetector::load(p);
  EXPECT_TRUE(det.scores(x).isApprox(back.scores(x)));
  const Detection d = det.detect(x.row(50).transpose());
  EXPECT_EQ(d.anomalous, d.score > 0);
}

TEST(Aae, TrainAaeRejectsAnomalousSamples) {
  auto samples = make_aae_samples(fixtures::predictor(), std::span<const Scenario>(fixtures::normals().data(), 60));
  samples[7].label = AnomalyLabel::kRandom;
  AAEConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train_aae(samples, cfg), ContractViolation);
  std::vector<Scenario> mixed(fixtures::normals().begin(), fixtures::normals().begin() + 5);
  mixed[3].anomaly_label = AnomalyLabel::kDirectional;
  EXPECT_THROW(make_aae_samples(fixtures::predictor(), mixed), ContractViolation);
}

TEST(Aae, LatentBlocksHaveDeclaredStructure) {
  const auto samples = make_aae_samples(fixtures::predictor(), fixtures::normals());
  AAEConfig cfg;
  cfg.epochs = 3;
  AAETrainingLog log;
  const AAEModel m = train_aae(samples, cfg, &log);
  EXPECT_EQ(log.recon_loss.size(), 3u);
  EXPECT_EQ(log.sem_loss.size(), 3u);
  EXPECT_EQ(m.discriminator_count(), 3);
  const LatentCode z = m.encode_latent(samples[0].feature);
  EXPECT_NEAR(z.intent.sum(), 1.0, 1e-12);
  EXPECT_GE(z.intent.minCoeff(), 0.0);
  const Matrix r = m.reconstruct(Matrix(samples[0].feature.transpose()));
  EXPECT_EQ(r.cols(), 2 * kHistoryLength);
}

TEST(Aae, NaiveLatentUsesOneDiscriminatorAndNoSemanticLoss) {
  const auto samples = make_aae_samples(fixtures::predictor(), fixtures::normals());
  AAEConfig cfg;
  cfg.epochs = 2;
  cfg.naive_latent = true;
  AAETrainingLog log;
  const AAEModel m = train_aae(samples, cfg, &log);
  EXPECT_EQ(m.discriminator_count(), 1);
  EXPECT_TRUE(log.sem_loss.empty());
}

TEST(Aae, ThresholdIsNearestRankQuantileAndPersists) {
  const auto samples = make_aae_samples(fixtures::predictor(), fixtures::normals());
  AAEConfig cfg;
  cfg.epochs = 1;
  AAEModel m = train_aae(samples, cfg);
  Vector scores(100);
  for (int i = 0; i < 100; ++i) scores(i) = 100 - i;
  EXPECT_DOUBLE_EQ(calibrate_threshold(m, scores, 0.95), 95.0);
  EXPECT_THROW(calibrate_threshold(m, scores.head(10), 0.95), DataError);
  const auto p = std::filesystem::temp_directory_path() / "trajad_test_aae.json";
  m.save(p, 7);
  const AAEModel back = AAEModel::load(p);
  EXPECT_EQ(back.threshold(), m.threshold());
  EXPECT_EQ(back.params().hash(), m.params().hash());
}

TEST(Aae, AdversarialLossClosedForm) {
  const auto [disc, gen] = adversarial_losses(Matrix::Zero(4, 1), Matrix::Zero(4, 1));
  EXPECT_NEAR(disc, std::log(2.0), 1e-12);
  EXPECT_NEAR(gen, std::log(2.0), 1e-12);
}

TEST(Aae, TargetSamplesFollowBlocks) {
  std::mt19937_64 rng(9);
  const Matrix intent = sample_target(LatentBlock::kIntent, 500, rng, Eigen::Vector3d(0.6, 0.3, 0.1));
  EXPECT_TRUE(intent.rowwise().sum().isApprox(Vector::Ones(500)));
  EXPECT_NEAR(intent.col(0).mean(), 0.6, 0.06);
  const Matrix res = sample_target(LatentBlock::kRes, 2000, rng);
  EXPECT_EQ(res.cols(), 6);
  EXPECT_NEAR(res.mean(), 0.0, 0.05);
}

TEST(Baselines, NaiveSvmSeparatesJerkyToyTrajectories) {
  std::vector<Scenario> train, test;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (std::size_t i = 0; i < 80; ++i) {
    Scenario s = fixtures::normals()[i];
    if (i % 2) {
      for (Index k = 0; k < kHistoryLength; ++k) s.target_history.points()(k, 1) += jitter(rng);
      s.anomaly_label = AnomalyLabel::kRandom;
    }
    (i < 50 ? train : test).push_back(s);
  }
  std::vector<const Scenario*> tr, te;
  for (const auto& s : train) tr.push_back(&s);
  for (const auto& s : test) te.push_back(&s);
  EXPECT_GT(roc_auc(naive_svm_baseline(tr, te)), 0.9);
}

TEST(Baselines, OcSvmRejectsAnomaliesAndFlagsAboutNu) {
  std::vector<const Scenario*> tr;
  for (const auto& s : fixtures::normals()) tr.push_back(&s);
  const ScoredSet self = oc_svm_baseline(tr, tr);
  const double flagged =
      static_cast<double>(std::count_if(self.scores.begin(), self.scores.end(), [](double s) { return s > 0; })) /
      static_cast<double>(self.size());
  EXPECT_NEAR(flagged, 0.1, 0.05);
  Scenario bad = fixtures::normals()[0];
  bad.anomaly_label = AnomalyLabel::kRandom;
  tr.push_back(&bad);
  EXPECT_THROW(oc_svm_baseline(tr, tr), ContractViolation);
}

TEST(Baselines, FeatureShapes) {
  EXPECT_EQ(acceleration_features(fixtures::normals()[0]).size(), 18);
  EXPECT_EQ(trajectory_features(fixtures::normals()[0]).size(), 40);
}

TEST(Bench, SplitIsStableAndRoughlySeventyTenTwenty) {
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 5000; ++i) ++counts[static_cast<int>(split_of("n1-" + std::to_string(i)))];
  EXPECT_NEAR(counts[0] / 5000.0, 0.7, 0.03);
  EXPECT_NEAR(counts[1] / 5000.0, 0.1, 0.02);
  EXPECT_NEAR(counts[2] / 5000.0, 0.2, 0.03);
  EXPECT_EQ(split_of("abc"), split_of("abc"));
}

TEST(Bench, MethodNamesRoundTrip) {
  for (Method m : all_methods()) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("ts2vec"), ConfigError);
  EXPECT_EQ(all_methods().size(), 7u);
}

TEST(Bench, MatrixCountsAndRanges) {
  const BenchData& data = mini_bench().data;
  const Method methods[] = {Method::kNnSvm, Method::kOcSvm};
  const auto cells = run_matrix(data, quick_config(), methods);
  ASSERT_EQ(cells.size(), 6u);
  for (const CellResult& c : cells) {
    for (double v : {c.report.roc_auc, c.report.pr_auc, c.report.f1_at_recall_0_8}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_GT(c.report.n_anomaly, 0u);
    EXPECT_EQ(c.scenario_ids.size(), c.scored.size());
  }
  EXPECT_EQ(cells[4].report.train_pattern, "none");
}

TEST(Bench, MissingPatternNamesTheCell) {
  const BenchData partial = BenchData::build(fixtures::predictor(), fixtures::normals(),
                                             {{AttackPattern::kRandom, mini_bench().random}});
  try {
    train_detector(Method::kNnSvm, AttackPattern::kDirectional, partial, quick_config());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("directional"), std::string::npos);
  }
}

TEST(Bench, DetectorTrainingLeavesExtractorUntouched) {
  const std::uint64_t before = fixtures::predictor().weight_hash();
  train_detector(Method::kSupCl, AttackPattern::kRandom, mini_bench().data, quick_config());
  train_detector(Method::kSemanticsSvm, AttackPattern::kDirectional, mini_bench().data, quick_config());
  EXPECT_EQ(fixtures::predictor().weight_hash(), before);
}

TEST(Bench, ReportCsvRoundTrip) {
  MetricsReport r{"sup-cl", "random", "directional", 0.5, 0.75, 0.625, 100, 20, 3};
  const std::vector<MetricsReport> rows{r};
  const std::string csv = report_csv(rows, "abc");
  EXPECT_EQ(csv.rfind("# config_hash=abc\nmethod,train_pattern,test_pattern,f1_at_r0.8,roc_auc,pr_auc,", 0), 0u);
  const auto back = parse_report_csv(csv);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].method, "sup-cl");
  EXPECT_DOUBLE_EQ(back[0].roc_auc, 0.75);
  EXPECT_EQ(report_csv(back, "abc"), csv);
}
