#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "trajad/types.hpp"

namespace trajad {

struct Waypoint {
  double x = 0.0;  // m
  double y = 0.0;  // m
  double t = 0.0;  // s, relative to scenario start
};

// Ordered waypoints stored row-wise as (x, y, t).
class Trajectory {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  Trajectory() = default;
  Trajectory(std::string agent_id, Storage points)
      : agent_id_(std::move(agent_id)), points_(std::move(points)) {}

  static Trajectory FromXY(std::string agent_id, const Points2<double>& xy, double t0);

  Index size() const { return points_.rows(); }
  bool empty() const { return points_.rows() == 0; }

  const std::string& agent_id() const { return agent_id_; }
  void set_agent_id(std::string id) { agent_id_ = std::move(id); }

  Waypoint operator[](Index i) const { return {points_(i, 0), points_(i, 1), points_(i, 2)}; }
  Vec2 position(Index i) const { return points_.row(i).head<2>().transpose(); }

  auto xy() { return points_.leftCols<2>(); }
  auto xy() const { return points_.leftCols<2>(); }
  auto times() const { return points_.col(2); }

  const Storage& points() const { return points_; }
  Storage& points() { return points_; }

  double arc_length() const;

 private:
  std::string agent_id_;
  Storage points_;
};

struct Lane {
  Points2<double> centerline;
  std::vector<int> successors;
  std::vector<int> predecessors;
  std::optional<int> left;
  std::optional<int> right;
};

struct LaneGraph {
  std::vector<Lane> lanes;
};

enum class AnomalyLabel { kNormal, kRandom, kDirectional };

std::string_view to_string(AnomalyLabel label);
AnomalyLabel anomaly_label_from_string(std::string_view name);

// Provenance of a PGD-generated anomaly.
struct AttackMeta {
  double epsilon = 0.0;
  int steps = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::string source_id;
};

struct Scenario {
  std::string scenario_id;
  Trajectory target_history;
  std::vector<Trajectory> neighbor_histories;
  LaneGraph lane_graph;
  Trajectory target_future;
  AnomalyLabel anomaly_label = AnomalyLabel::kNormal;
  std::optional<AttackMeta> attack_meta;

  // Id of the clean scenario this one derives from (itself for normals).
  const std::string& source_id() const {
    return attack_meta ? attack_meta->source_id : scenario_id;
  }
};

enum class Intention { kForward = 0, kLeft = 1, kRight = 2 };

std::string_view to_string(Intention intention);

struct SemanticLabels {
  Intention intention = Intention::kForward;
  double aggressiveness = 0.0;  // log of clamped time headway

  Eigen::Vector3d intention_one_hot() const {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    v(static_cast<int>(intention)) = 1.0;
    return v;
  }
};

// Throws DataError describing the first violated invariant.
void validate_trajectory(const Trajectory& traj, Index expected_length, std::string_view what);
void validate_lane_graph(const LaneGraph& graph);
void validate_scenario(const Scenario& s);

// Deterministic rigid transform of every coordinate in the scenario; used by
// invariance tests and data augmentation.
Scenario transformed(const Scenario& s, double rotation_rad, const Vec2& translation);

}  // namespace trajad
