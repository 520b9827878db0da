#pragma once

#include <vector>

#include "trajad/scenario.hpp"

namespace trajad {

inline constexpr double kHeadwayMin = 0.1;   // s
inline constexpr double kHeadwayMax = 10.0;  // s
inline constexpr double kIntentionThresholdDeg = 15.0;

// Longitudinal gap to the nearest leading neighbour in the target's lane (or
// its successors) divided by the target speed, clamped to [0.1, 10] s. With no
// leader or a near-stationary target the cap is returned.
double compute_time_headway(const Scenario& s);

// Heading change between the opening and closing stretch of the trajectory;
// beyond +/-15 degrees it is a left/right manoeuvre.
Intention label_lateral_intention(const Trajectory& t);

// |second difference| / dt^2 at each interior waypoint. Throws ShapeError for
// fewer than three waypoints.
std::vector<double> acceleration_series(const Trajectory& t);

enum class AggressivenessEncoding { kLogHeadway, kRawHeadway };

// Semantics of the (clean) target history.
SemanticLabels extract_semantics(const Scenario& s,
                                 AggressivenessEncoding encoding = AggressivenessEncoding::kLogHeadway);

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace trajad
