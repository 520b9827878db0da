#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "trajad/scenario.hpp"

namespace trajad {

enum class Layout { kStraight, kCurve, kIntersection };

std::string_view to_string(Layout layout);
// Throws ConfigError listing the valid names.
Layout layout_from_string(std::string_view name);

struct GeneratorConfig {
  double speed_min = 4.0;           // m/s, in [2, 20]
  double speed_max = 14.0;          // m/s, in [2, 20]
  double curve_radius_min = 20.0;   // m, >= 15
  double curve_radius_max = 60.0;   // m
  double noise_sigma = 0.05;        // m, in [0, 0.05]
  double accel_max = 1.5;           // m/s^2, in [0, 4]
  double lane_change_prob = 0.25;
  double lead_vehicle_prob = 0.85;
  int max_neighbors = 6;            // in [0, 8]
  double lane_width = 3.5;          // m
  bool random_pose = true;          // apply a seeded global rotation + translation
  // Relative layout frequencies used by generate_dataset.
  double weight_straight = 0.4;
  double weight_curve = 0.3;
  double weight_intersection = 0.3;
};

// Throws ConfigError naming the first invalid field.
void validate(const GeneratorConfig& config);

// Pure function of (seed, layout, config). Produces a normal scenario whose
// target follows a line/arc path with bounded acceleration and yaw rate.
Scenario generate_synthetic_scenario(std::uint64_t seed, Layout layout, const GeneratorConfig& config);

// Layouts drawn by the config weights; item i uses derive_seed(seed, i) and
// gets id "n<seed>-<i>".
std::vector<Scenario> generate_dataset(std::uint64_t seed, int count, const GeneratorConfig& config);

}  // namespace trajad
