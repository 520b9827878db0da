#include "trajad/scenario.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "trajad/errors.hpp"

namespace trajad {

Trajectory Trajectory::FromXY(std::string agent_id, const Points2<double>& xy, double t0) {
  Storage pts(xy.rows(), 3);
  pts.leftCols<2>() = xy;
  for (Index i = 0; i < xy.rows(); ++i) pts(i, 2) = t0 + static_cast<double>(i) * kTimeStep;
  return Trajectory(std::move(agent_id), std::move(pts));
}

double Trajectory::arc_length() const {
  double len = 0.0;
  for (Index i = 1; i < size(); ++i) len += (position(i) - position(i - 1)).norm();
  return len;
}

std::string_view to_string(AnomalyLabel label) {
  switch (label) {
    case AnomalyLabel::kNormal: return "normal";
    case AnomalyLabel::kRandom: return "random";
    case AnomalyLabel::kDirectional: return "directional";
  }
  return "normal";
}

AnomalyLabel anomaly_label_from_string(std::string_view name) {
  if (name == "normal") return AnomalyLabel::kNormal;
  if (name == "random") return AnomalyLabel::kRandom;
  if (name == "directional") return AnomalyLabel::kDirectional;
  throw DataError("unknown anomaly label '" + std::string(name) + "'");
}

std::string_view to_string(Intention intention) {
  switch (intention) {
    case Intention::kForward: return "forward";
    case Intention::kLeft: return "left";
    case Intention::kRight: return "right";
  }
  return "forward";
}

void validate_trajectory(const Trajectory& traj, Index expected_length, std::string_view what) {
  const std::string name(what);
  if (traj.size() != expected_length) {
    throw DataError(name + ": expected " + std::to_string(expected_length) + " waypoints, got " +
                    std::to_string(traj.size()));
  }
  if (!traj.points().allFinite()) throw DataError(name + ": non-finite waypoint");
  for (Index i = 1; i < traj.size(); ++i) {
    const double dt = traj[i].t - traj[i - 1].t;
    if (std::abs(dt - kTimeStep) > 1e-6) {
      throw DataError(name + ": time step " + std::to_string(dt) + " at waypoint " + std::to_string(i));
    }
    const double step = (traj.position(i) - traj.position(i - 1)).norm();
    if (step > kMaxStepDisplacement) {
      throw DataError(name + ": displacement " + std::to_string(step) + " m exceeds cap at waypoint " +
                      std::to_string(i));
    }
  }
}

void validate_lane_graph(const LaneGraph& graph) {
  const int n = static_cast<int>(graph.lanes.size());
  auto check_index = [n](int idx, std::size_t lane) {
    if (idx < 0 || idx >= n) {
      throw DataError("lane " + std::to_string(lane) + ": adjacency index " + std::to_string(idx) +
                      " out of range");
    }
  };
  for (std::size_t i = 0; i < graph.lanes.size(); ++i) {
    const Lane& lane = graph.lanes[i];
    if (lane.centerline.rows() < 2) throw DataError("lane " + std::to_string(i) + ": fewer than 2 points");
    if (!lane.centerline.allFinite()) throw DataError("lane " + std::to_string(i) + ": non-finite point");
    for (int s : lane.successors) check_index(s, i);
    for (int p : lane.predecessors) check_index(p, i);
    if (lane.left) check_index(*lane.left, i);
    if (lane.right) check_index(*lane.right, i);
  }
}

void validate_scenario(const Scenario& s) {
  validate_trajectory(s.target_history, kHistoryLength, "target_history");
  validate_trajectory(s.target_future, kFutureLength, "target_future");
  if (s.neighbor_histories.size() > static_cast<std::size_t>(kMaxNeighbors)) {
    throw DataError("too many neighbors: " + std::to_string(s.neighbor_histories.size()));
  }
  for (std::size_t k = 0; k < s.neighbor_histories.size(); ++k) {
    const Trajectory& nb = s.neighbor_histories[k];
    validate_trajectory(nb, kHistoryLength, "neighbor " + std::to_string(k));
    if ((nb.times() - s.target_history.times()).cwiseAbs().maxCoeff() > 1e-6) {
      throw DataError("neighbor " + std::to_string(k) + ": timestamps differ from target history");
    }
  }
  validate_lane_graph(s.lane_graph);
  const double gap = s.target_future[0].t - s.target_history[kHistoryLength - 1].t;
  if (gap <= 0.0 || gap > kTimeStep + 1e-6) {
    throw DataError("target_future does not continue target_history (gap " + std::to_string(gap) + " s)");
  }
}

namespace {

void apply(Trajectory& traj, const Eigen::Matrix2d& rot, const Vec2& shift) {
  for (Index i = 0; i < traj.size(); ++i) {
    const Vec2 p = rot * traj.position(i) + shift;
    traj.points()(i, 0) = p.x();
    traj.points()(i, 1) = p.y();
  }
}

}  // namespace

Scenario transformed(const Scenario& s, double rotation_rad, const Vec2& translation) {
  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(rotation_rad).toRotationMatrix();
  Scenario out = s;
  apply(out.target_history, rot, translation);
  apply(out.target_future, rot, translation);
  for (auto& nb : out.neighbor_histories) apply(nb, rot, translation);
  for (auto& lane : out.lane_graph.lanes) {
    for (Index i = 0; i < lane.centerline.rows(); ++i) {
      const Vec2 p = rot * lane.centerline.row(i).transpose() + translation;
      lane.centerline.row(i) = p.transpose();
    }
  }
  return out;
}

}  // namespace trajad
