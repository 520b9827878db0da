#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <Eigen/Geometry>

#include "fixtures.hpp"
#include "gradchecks.hpp"
#include "trajad/errors.hpp"

using namespace trajad;

TEST(Predictor, FeaturesRequireFrozenModel) {
  const PredictorModel fresh = PredictorModel::initialize(1);
  EXPECT_THROW(fresh.extract_features(fixtures::normals()[0]), StateError);
  EXPECT_TRUE(fixtures::predictor().frozen());
}

TEST(Predictor, BatchMatchesSingle) {
  const auto& m = fixtures::predictor();
  const auto& data = fixtures::normals();
  const Matrix batch = m.extract_features(std::span<const Scenario>(data.data(), 5));
  ASSERT_EQ(batch.cols(), kFeatureDim);
  for (Index i = 0; i < 5; ++i) {
    EXPECT_TRUE(batch.row(i).transpose().isApprox(m.extract_features(data[static_cast<std::size_t>(i)]), 1e-10));
  }
}

TEST(Predictor, FeaturesInvariantUnderRigidMotion) {
  const auto& m = fixtures::predictor();
  for (int i = 0; i < 5; ++i) {
    const Scenario& s = fixtures::normals()[static_cast<std::size_t>(i)];
    const Scenario t = transformed(s, 1.1, Vec2(-40, 25));
    EXPECT_TRUE(m.extract_features(s).isApprox(m.extract_features(t), 1e-8));
    const Trajectory a = m.predict_future(s).predicted_future;
    const Trajectory b = m.predict_future(t).predicted_future;
    const Eigen::Rotation2Dd r(1.1);
    for (Index k = 0; k < a.size(); ++k) {
      EXPECT_TRUE((r * a.position(k) + Vec2(-40, 25)).isApprox(b.position(k), 1e-8));
    }
  }
}

TEST(Predictor, PredictionsHaveFutureShape) {
  const auto r = fixtures::predictor().predict_future(fixtures::normals()[0]);
  EXPECT_EQ(r.predicted_future.size(), kFutureLength);
}

TEST(Predictor, SaveLoadRoundTrip) {
  const auto p = std::filesystem::temp_directory_path() / "trajad_test_predictor.json";
  fixtures::predictor().save(p);
  const PredictorModel back = PredictorModel::load(p);
  EXPECT_EQ(back.weight_hash(), fixtures::predictor().weight_hash());
  EXPECT_TRUE(back.frozen());
  EXPECT_TRUE(back.extract_features(fixtures::normals()[1]).isApprox(
      fixtures::predictor().extract_features(fixtures::normals()[1])));
}

TEST(Predictor, TrainingRejectsAnomalies) {
  std::vector<Scenario> data(fixtures::normals().begin(), fixtures::normals().begin() + 4);
  data[2].anomaly_label = AnomalyLabel::kRandom;
  PredictorHyperparams hp;
  hp.epochs = 1;
  EXPECT_THROW(train_predictor(data, hp), DataError);
  hp.epochs = 0;
  EXPECT_THROW(train_predictor(fixtures::normals(), hp), ConfigError);
}

TEST(Predictor, TrainingReducesLoss) {
  PredictorHyperparams hp;
  hp.epochs = 3;
  PredictorTrainingLog log;
  train_predictor(std::span<const Scenario>(fixtures::normals().data(), 120), hp, &log);
  ASSERT_EQ(log.epoch_loss.size(), 3u);
  EXPECT_LT(log.epoch_loss.back(), log.epoch_loss.front());
}

TEST(GradientCheck, PredictionLossWrtHistory) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT(gradcheck::prediction(fixtures::predictor(), fixtures::normals()[static_cast<std::size_t>(i)], rng, 50),
              1e-4);
  }
}

TEST(Ade, ZeroForIdenticalAndPositiveOtherwise) {
  const Trajectory& f = fixtures::normals()[0].target_future;
  EXPECT_DOUBLE_EQ(average_displacement_error(f, f), 0.0);
  Trajectory g = f;
  g.points().col(0).array() += 3.0;
  EXPECT_NEAR(average_displacement_error(g, f), 3.0, 1e-12);
}
