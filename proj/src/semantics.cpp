#include "trajad/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "trajad/errors.hpp"

namespace trajad {

namespace {

double point_to_polyline(const Vec2& p, const Points2<double>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i + 1 < line.rows(); ++i) {
    const Vec2 a = line.row(i).transpose();
    const Vec2 ab = line.row(i + 1).transpose() - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + u * ab - p).norm());
  }
  return best;
}

int nearest_lane(const LaneGraph& g, const Vec2& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.lanes.size(); ++i) {
    const double d = point_to_polyline(p, g.lanes[i].centerline);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::set<int> downstream_lanes(const LaneGraph& g, int start, int depth) {
  std::set<int> seen{start};
  std::vector<int> frontier{start};
  for (int d = 0; d < depth; ++d) {
    std::vector<int> next;
    for (int lane : frontier) {
      for (int succ : g.lanes[static_cast<std::size_t>(lane)].successors) {
        if (seen.insert(succ).second) next.push_back(succ);
      }
    }
    frontier = std::move(next);
  }
  return seen;
}

constexpr double kCorridorHalfWidth = 1.75;

}  // namespace

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

double compute_time_headway(const Scenario& s) {
  const Trajectory& h = s.target_history;
  if (h.size() < 2) return kHeadwayMax;
  const Vec2 last = h.position(h.size() - 1);
  const Vec2 step = last - h.position(h.size() - 2);
  const double speed = step.norm() / kTimeStep;
  if (speed < 0.5) return kHeadwayMax;
  const Vec2 heading = step.normalized();

  const LaneGraph& g = s.lane_graph;
  std::set<int> same_lane;
  if (!g.lanes.empty()) same_lane = downstream_lanes(g, nearest_lane(g, last), 4);

  double gap = std::numeric_limits<double>::infinity();
  for (const Trajectory& nb : s.neighbor_histories) {
    if (nb.empty()) continue;
    const Vec2 q = nb.position(nb.size() - 1);
    const Vec2 rel = q - last;
    const double longitudinal = rel.dot(heading);
    if (longitudinal <= 0.0) continue;
    if (g.lanes.empty()) {
      const double lateral = std::abs(heading.x() * rel.y() - heading.y() * rel.x());
      if (lateral > kCorridorHalfWidth) continue;
    } else if (!same_lane.contains(nearest_lane(g, q))) {
      continue;
    }
    gap = std::min(gap, longitudinal);
  }
  if (!std::isfinite(gap)) return kHeadwayMax;
  return std::clamp(gap / speed, kHeadwayMin, kHeadwayMax);
}

Intention label_lateral_intention(const Trajectory& t) {
  const Index n = t.size();
  if (n < 4 || t.arc_length() < 0.5) return Intention::kForward;
  // Opening and closing stretches span a quarter of the samples each, which
  // keeps positional jitter from dominating the heading estimate.
  const Index k = std::max<Index>(1, (n - 1) / 4);
  const Vec2 first = t.position(k) - t.position(0);
  const Vec2 last = t.position(n - 1) - t.position(n - 1 - k);
  if (first.norm() < 1e-9 || last.norm() < 1e-9) return Intention::kForward;
  const double dtheta = wrap_angle(std::atan2(last.y(), last.x()) - std::atan2(first.y(), first.x()));
  const double threshold = kIntentionThresholdDeg * std::numbers::pi / 180.0;
  if (dtheta > threshold) return Intention::kLeft;
  if (dtheta < -threshold) return Intention::kRight;
  return Intention::kForward;
}

std::vector<double> acceleration_series(const Trajectory& t) {
  if (t.size() < 3) throw ShapeError("acceleration_series needs at least 3 waypoints, got " + std::to_string(t.size()));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t.size() - 2));
  const double inv_dt2 = 1.0 / (kTimeStep * kTimeStep);
  for (Index i = 1; i + 1 < t.size(); ++i) {
    out.push_back(((t.position(i + 1) - 2.0 * t.position(i) + t.position(i - 1)) * inv_dt2).norm());
  }
  return out;
}

SemanticLabels extract_semantics(const Scenario& s, AggressivenessEncoding encoding) {
  SemanticLabels labels;
  labels.intention = label_lateral_intention(s.target_history);
  const double headway = compute_time_headway(s);
  labels.aggressiveness = encoding == AggressivenessEncoding::kLogHeadway ? std::log(headway) : headway;
  return labels;
}

}  // namespace trajad
