#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "trajad/predictor.hpp"

namespace trajad {

enum class AttackPattern { kRandom, kDirectional };
enum class Side { kLeft, kRight };

std::string_view to_string(AttackPattern pattern);
std::string_view to_string(Side side);
AttackPattern attack_pattern_from_string(std::string_view name);
Side side_from_string(std::string_view name);
AnomalyLabel label_for(AttackPattern pattern);

inline constexpr double kDirectionalThreshold = 1.5;  // m, mean lateral deviation
inline constexpr double kRandomThreshold = 5.0;       // m, ADE

struct AttackConfig {
  AttackPattern pattern = AttackPattern::kRandom;
  // Directional only. Unset: each scenario gets a side from hash(seed, id).
  std::optional<Side> side;
  double epsilon = 1.0;    // m, per-coordinate l-inf budget
  int steps = 50;
  double step_size = 0.1;  // m
  // Gaussian width (waypoints) of the perturbation basis; 0 gives plain PGD
  // on the raw coordinates.
  double smoothing = 5.0;
  std::uint64_t seed = 0;
};

// Throws ConfigError naming the offending field.
void validate(const AttackConfig& cfg);

Side resolve_side(const AttackConfig& cfg, const Scenario& s);

// Lateral unit vectors (30 x 2) from the ground-truth future headings.
Points2<double> lateral_directions(const Trajectory& truth, Side side);

// Mean over frames of (p - s)^T R; positive toward `side`.
double directional_objective(const Trajectory& predicted, const Trajectory& truth, Side side);
// Mean per-waypoint Euclidean error.
double random_objective(const Trajectory& predicted, const Trajectory& truth);

// Objective maximised by the attack.
double attack_objective(const Trajectory& predicted, const Trajectory& truth, AttackPattern pattern, Side side);

enum class Qualification { kQualified, kUnqualified };

struct AttackResult {
  Scenario perturbed;  // label = pattern if qualified, normal otherwise
  Side side = Side::kLeft;
  double objective_before = 0.0;
  double objective_after = 0.0;  // best iterate
  Qualification qualification = Qualification::kUnqualified;
};

// Row-normalised Gaussian smoother (20 x 20); identity for sigma <= 0.
Matrix smoothing_matrix(double sigma);

// Signed-gradient PGD from delta = 0 with l-inf projection; keeps the best
// iterate. Requires a frozen model and normal inputs.
AttackResult pgd_attack(const PredictorModel& model, const Scenario& s, const AttackConfig& cfg);
std::vector<AttackResult> pgd_attack(const PredictorModel& model, std::span<const Scenario> batch,
                                     const AttackConfig& cfg);

Scenario pgd_perturb(const PredictorModel& model, const Scenario& s, const AttackConfig& cfg);

// Thresholds: directional |mean lateral deviation| > 1.5 m, random ADE > 5 m.
Qualification label_anomaly(const PredictorModel& model, const Scenario& perturbed, const Scenario& clean,
                            AttackPattern pattern, Side side = Side::kLeft);

struct AnomalyReport {
  std::size_t attempted = 0;
  std::size_t improved = 0;  // objective strictly increased
  std::size_t qualified = 0;
  double qualification_rate() const { return attempted ? static_cast<double>(qualified) / attempted : 0.0; }
};

// Attacks normals in order until target_count anomalies qualify. Throws
// GenerationError when none qualify.
std::vector<Scenario> build_anomaly_dataset(const PredictorModel& model, std::span<const Scenario> normals,
                                            const AttackConfig& cfg, std::size_t target_count,
                                            AnomalyReport* report = nullptr);

}  // namespace trajad
