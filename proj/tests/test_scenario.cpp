#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "trajad/dataset_io.hpp"
#include "trajad/errors.hpp"
#include "trajad/generator.hpp"
#include "trajad/semantics.hpp"

using namespace trajad;

namespace {

// Concatenated history + future without positional noise.
Points2<double> clean_path(const Scenario& s) {
  Points2<double> p(kHistoryLength + kFutureLength, 2);
  p << s.target_history.xy(), s.target_future.xy();
  return p;
}

Trajectory arc(double radius, double speed, double sign, int n) {
  Points2<double> xy(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = speed * kTimeStep * i / radius;
    xy(i, 0) = radius * std::sin(a);
    xy(i, 1) = sign * radius * (1 - std::cos(a));
  }
  return Trajectory::FromXY("t", xy, 0.0);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("trajad_test_" + name);
}

}  // namespace

class GeneratorLayout : public ::testing::TestWithParam<Layout> {};

TEST_P(GeneratorLayout, RespectsKinematicBounds) {
  GeneratorConfig cfg;
  cfg.noise_sigma = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scenario s = generate_synthetic_scenario(seed, GetParam(), cfg);
    ASSERT_NO_THROW(validate_scenario(s));
    EXPECT_EQ(s.target_history.size(), kHistoryLength);
    EXPECT_EQ(s.target_future.size(), kFutureLength);
    EXPECT_LE(static_cast<int>(s.neighbor_histories.size()), cfg.max_neighbors);
    const Points2<double> p = clean_path(s);
    for (Index i = 1; i + 1 < p.rows(); ++i) {
      const Vec2 acc = (p.row(i + 1) - 2 * p.row(i) + p.row(i - 1)).transpose() / (kTimeStep * kTimeStep);
      EXPECT_LE(acc.norm(), 4.0 + 1e-6) << "seed " << seed << " step " << i;
      const Vec2 a = (p.row(i) - p.row(i - 1)).transpose(), b = (p.row(i + 1) - p.row(i)).transpose();
      if (a.norm() > 0.05 && b.norm() > 0.05) {
        const double turn = std::abs(wrap_angle(std::atan2(b.y(), b.x()) - std::atan2(a.y(), a.x())));
        EXPECT_LE(turn / kTimeStep, 0.5 + 1e-6) << "seed " << seed << " step " << i;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllLayouts, GeneratorLayout,
                         ::testing::Values(Layout::kStraight, Layout::kCurve, Layout::kIntersection));

TEST(Generator, DeterministicPerSeed) {
  const GeneratorConfig cfg;
  EXPECT_EQ(serialize_scenario(generate_synthetic_scenario(7, Layout::kCurve, cfg)),
            serialize_scenario(generate_synthetic_scenario(7, Layout::kCurve, cfg)));
  EXPECT_NE(serialize_scenario(generate_synthetic_scenario(7, Layout::kCurve, cfg)),
            serialize_scenario(generate_synthetic_scenario(8, Layout::kCurve, cfg)));
}

TEST(Generator, DatasetIdsAndLabels) {
  const auto data = generate_dataset(5, 25, GeneratorConfig{});
  ASSERT_EQ(data.size(), 25u);
  EXPECT_EQ(data[3].scenario_id.rfind("n5-", 0), 0u);
  for (const Scenario& s : data) EXPECT_EQ(s.anomaly_label, AnomalyLabel::kNormal);
}

TEST(Generator, InvalidLayoutListsValidNames) {
  try {
    layout_from_string("roundabout");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("straight"), std::string::npos);
    EXPECT_NE(msg.find("intersection"), std::string::npos);
  }
}

TEST(Generator, RejectsOutOfRangeConfig) {
  GeneratorConfig cfg;
  cfg.noise_sigma = 0.2;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = GeneratorConfig{};
  cfg.speed_max = 30;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(DatasetIo, RoundTripIsByteIdentical) {
  const auto data = generate_dataset(9, 12, GeneratorConfig{});
  const auto a = temp_file("a.jsonl"), b = temp_file("b.jsonl");
  save_dataset(data, a);
  save_dataset(load_dataset(a), b);
  std::ifstream fa(a), fb(b);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
}

TEST(DatasetIo, MalformedLineReportsLineNumber) {
  const auto data = generate_dataset(9, 2, GeneratorConfig{});
  const auto p = temp_file("bad.jsonl");
  {
    std::ofstream out(p);
    out << serialize_scenario(data[0]) << "\n{not json\n";
  }
  try {
    load_dataset(p);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Validation, RejectsTeleportingTrajectory) {
  Scenario s = generate_dataset(3, 1, GeneratorConfig{})[0];
  s.target_history.points()(10, 0) += 50.0;
  EXPECT_THROW(validate_scenario(s), DataError);
}

TEST(Semantics, StraightLineIsForward) {
  EXPECT_EQ(label_lateral_intention(arc(1e6, 10, 1, 20)), Intention::kForward);
}

TEST(Semantics, TurningArcsAreLeftOrRight) {
  EXPECT_EQ(label_lateral_intention(arc(15, 8, 1, 20)), Intention::kLeft);
  EXPECT_EQ(label_lateral_intention(arc(15, 8, -1, 20)), Intention::kRight);
}

TEST(Semantics, ConstantVelocityHasZeroAcceleration) {
  const auto acc = acceleration_series(arc(1e6, 10, 1, 20));
  ASSERT_EQ(acc.size(), 18u);
  for (double a : acc) EXPECT_NEAR(a, 0.0, 1e-3);
  EXPECT_THROW(acceleration_series(arc(10, 1, 1, 2)), ShapeError);
}

TEST(Semantics, HeadwayIsClamped) {
  for (const Scenario& s : generate_dataset(11, 30, GeneratorConfig{})) {
    const double h = compute_time_headway(s);
    EXPECT_GE(h, kHeadwayMin);
    EXPECT_LE(h, kHeadwayMax);
    EXPECT_NEAR(extract_semantics(s).aggressiveness, std::log(h), 1e-12);
    EXPECT_NEAR(extract_semantics(s, AggressivenessEncoding::kRawHeadway).aggressiveness, h, 1e-12);
  }
}

TEST(Semantics, RigidTransformKeepsSemantics) {
  for (const Scenario& s : generate_dataset(12, 10, GeneratorConfig{})) {
    const Scenario t = transformed(s, 0.7, Vec2(30, -12));
    EXPECT_EQ(extract_semantics(s).intention, extract_semantics(t).intention);
    EXPECT_NEAR(compute_time_headway(s), compute_time_headway(t), 1e-6);
  }
}
