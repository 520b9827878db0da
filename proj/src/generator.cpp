#include "trajad/generator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "trajad/errors.hpp"
#include "trajad/rng.hpp"

namespace trajad {

std::string_view to_string(Layout layout) {
  switch (layout) {
    case Layout::kStraight: return "straight";
    case Layout::kCurve: return "curve";
    case Layout::kIntersection: return "intersection";
  }
  return "straight";
}

Layout layout_from_string(std::string_view name) {
  if (name == "straight") return Layout::kStraight;
  if (name == "curve") return Layout::kCurve;
  if (name == "intersection") return Layout::kIntersection;
  throw ConfigError("layout", "unknown layout '" + std::string(name) +
                                  "' (valid layouts: straight, curve, intersection)");
}

void validate(const GeneratorConfig& c) {
  auto in_range = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  if (!in_range(c.speed_min, 2.0, 20.0)) throw ConfigError("speed_min", "must be in [2, 20] m/s");
  if (!in_range(c.speed_max, 2.0, 20.0)) throw ConfigError("speed_max", "must be in [2, 20] m/s");
  if (c.speed_min > c.speed_max) throw ConfigError("speed_min", "must not exceed speed_max");
  if (!in_range(c.curve_radius_min, 15.0, 1e6)) throw ConfigError("curve_radius_min", "must be >= 15 m");
  if (!in_range(c.curve_radius_max, c.curve_radius_min, 1e6)) {
    throw ConfigError("curve_radius_max", "must be >= curve_radius_min");
  }
  if (!in_range(c.noise_sigma, 0.0, 0.05)) throw ConfigError("noise_sigma", "must be in [0, 0.05] m");
  if (!in_range(c.accel_max, 0.0, 4.0)) throw ConfigError("accel_max", "must be in [0, 4] m/s^2");
  if (!in_range(c.lane_change_prob, 0.0, 1.0)) throw ConfigError("lane_change_prob", "must be in [0, 1]");
  if (!in_range(c.lead_vehicle_prob, 0.0, 1.0)) throw ConfigError("lead_vehicle_prob", "must be in [0, 1]");
  if (c.max_neighbors < 0 || c.max_neighbors > kMaxNeighbors) {
    throw ConfigError("max_neighbors", "must be in [0, 8]");
  }
  if (!in_range(c.lane_width, 2.0, 6.0)) throw ConfigError("lane_width", "must be in [2, 6] m");
  const double weights = c.weight_straight + c.weight_curve + c.weight_intersection;
  if (c.weight_straight < 0 || c.weight_curve < 0 || c.weight_intersection < 0 || !(weights > 0)) {
    throw ConfigError("weight_straight", "layout weights must be non-negative with a positive sum");
  }
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMaxLateralAccel = 3.0;  // keeps |a| <= 4 together with accel_max <= 1.5
constexpr double kMaxYawRate = 0.5;
constexpr double kLaneSampleStep = 2.0;
constexpr int kPointsPerLaneChunk = 15;

Vec2 direction(double heading) { return {std::cos(heading), std::sin(heading)}; }

// Reference path made of line and arc pieces, parametrised by arc length and
// extrapolated along the end headings outside [0, length].
class Path {
 public:
  Path(Vec2 start, double heading) : start_(start), heading_(heading) {}

  Path& line(double length) { return push(0.0, length); }
  Path& arc(double curvature, double length) { return push(curvature, length); }

  double length() const { return length_; }

  Vec2 position(double s) const {
    if (s <= 0.0 || segments_.empty()) return start_ + s * direction(heading_);
    for (const Segment& seg : segments_) {
      if (s <= seg.length) return seg.at(s);
      s -= seg.length;
    }
    const Segment& last = segments_.back();
    return last.at(last.length) + s * direction(last.heading_at(last.length));
  }

  double heading(double s) const {
    if (s <= 0.0 || segments_.empty()) return heading_;
    for (const Segment& seg : segments_) {
      if (s <= seg.length) return seg.heading_at(s);
      s -= seg.length;
    }
    return segments_.back().heading_at(segments_.back().length);
  }

  // Parallel offset; positive lateral is to the left of travel.
  Vec2 position(double s, double lateral) const {
    const double h = heading(s);
    return position(s) + lateral * Vec2(-std::sin(h), std::cos(h));
  }

  double max_abs_curvature() const {
    double k = 0.0;
    for (const Segment& seg : segments_) k = std::max(k, std::abs(seg.curvature));
    return k;
  }

 private:
  struct Segment {
    Vec2 start;
    double heading;
    double length;
    double curvature;

    Vec2 at(double u) const {
      if (curvature == 0.0) return start + u * direction(heading);
      const double h1 = heading + curvature * u;
      return start + Vec2(std::sin(h1) - std::sin(heading), std::cos(heading) - std::cos(h1)) / curvature;
    }
    double heading_at(double u) const { return heading + curvature * u; }
  };

  Path& push(double curvature, double length) {
    Vec2 p = start_;
    double h = heading_;
    if (!segments_.empty()) {
      p = segments_.back().at(segments_.back().length);
      h = segments_.back().heading_at(segments_.back().length);
    }
    segments_.push_back({p, h, length, curvature});
    length_ += length;
    return *this;
  }

  Vec2 start_;
  double heading_;
  double length_ = 0.0;
  std::vector<Segment> segments_;
};

// Speed v(t) = clamp(v0 + a t, lo, hi) for t >= 0 and v0 before the window.
struct SpeedProfile {
  double v0;
  double accel;
  double lo;
  double hi;

  double speed(double t) const { return t <= 0.0 ? v0 : std::clamp(v0 + accel * t, lo, hi); }

  double travel(double t) const {
    if (t <= 0.0 || accel == 0.0) return v0 * t;
    const double v_sat = accel > 0.0 ? hi : lo;
    const double t_sat = (v_sat - v0) / accel;
    if (t <= t_sat) return v0 * t + 0.5 * accel * t * t;
    return v0 * t_sat + 0.5 * accel * t_sat * t_sat + v_sat * (t - t_sat);
  }
};

double smoothstep_cos(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 * (1.0 - std::cos(kPi * u));
}

// Highest speed for which the path stays within the yaw-rate and lateral
// acceleration bounds.
double curvature_speed_cap(double curvature) {
  if (curvature <= 0.0) return 1e9;
  const double radius = 1.0 / curvature;
  return std::min(0.95 * kMaxYawRate * radius, std::sqrt(kMaxLateralAccel * radius));
}

std::vector<int> add_lane_chain(LaneGraph& graph, const Path& path, double lateral, double s0, double s1) {
  std::vector<Vec2> pts;
  const int n = std::max(2, static_cast<int>(std::ceil((s1 - s0) / kLaneSampleStep)) + 1);
  for (int i = 0; i < n; ++i) {
    const double s = s0 + (s1 - s0) * static_cast<double>(i) / (n - 1);
    pts.push_back(path.position(s, lateral));
  }
  std::vector<int> chain;
  for (std::size_t begin = 0; begin + 1 < pts.size(); begin += kPointsPerLaneChunk - 1) {
    const std::size_t end = std::min(pts.size(), begin + kPointsPerLaneChunk);
    Lane lane;
    lane.centerline.resize(static_cast<Index>(end - begin), 2);
    for (std::size_t k = begin; k < end; ++k) lane.centerline.row(static_cast<Index>(k - begin)) = pts[k];
    const int idx = static_cast<int>(graph.lanes.size());
    if (!chain.empty()) {
      graph.lanes[chain.back()].successors.push_back(idx);
      lane.predecessors.push_back(chain.back());
    }
    graph.lanes.push_back(std::move(lane));
    chain.push_back(idx);
  }
  return chain;
}

void link_side_by_side(LaneGraph& graph, const std::vector<int>& left, const std::vector<int>& right) {
  const std::size_t n = std::min(left.size(), right.size());
  for (std::size_t k = 0; k < n; ++k) {
    graph.lanes[right[k]].left = left[k];
    graph.lanes[left[k]].right = right[k];
  }
}

void link_chains(LaneGraph& graph, const std::vector<int>& from, const std::vector<int>& to) {
  graph.lanes[from.back()].successors.push_back(to.front());
  graph.lanes[to.front()].predecessors.push_back(from.back());
}

// An agent moving along a path at a given lateral offset.
struct Mover {
  const Path* path;
  double lateral;
  double s_at_zero;  // arc length at t = 0
  SpeedProfile speed;

  Vec2 at(double t) const { return path->position(s_at_zero + speed.travel(t), lateral); }
};

Points2<double> sample(const Mover& m, int count, double t0) {
  Points2<double> xy(count, 2);
  for (int k = 0; k < count; ++k) xy.row(k) = m.at(t0 + k * kTimeStep);
  return xy;
}

struct Candidate {
  const Path* path;
  double lateral;
  double curvature;
};

class Builder {
 public:
  Builder(std::uint64_t seed, const GeneratorConfig& config) : rng_(seed), config_(config) {}

  double uniform(double lo, double hi) {
    if (hi <= lo) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double mean, double sigma) { return std::normal_distribution<double>(mean, sigma)(rng_); }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  SpeedProfile speed_profile(double curvature) {
    const double hi = std::min(config_.speed_max, curvature_speed_cap(curvature));
    const double lo = std::min(config_.speed_min, hi);
    return {uniform(lo, hi), uniform(-config_.accel_max, config_.accel_max), lo, hi};
  }

  // Lead vehicle in the target's lane plus up to max_neighbors others on the
  // candidate paths.
  std::vector<Trajectory> neighbors(const Mover& lead_lane, double target_speed_end, double target_s_end,
                                    const std::vector<Candidate>& others) {
    std::vector<Points2<double>> tracks;
    int budget = config_.max_neighbors;
    if (budget > 0 && bernoulli(config_.lead_vehicle_prob)) {
      const double headway = std::clamp(std::exp(normal(-0.1, 0.7)), 0.3, 8.0);
      const double gap = headway * std::max(target_speed_end, 0.5);
      SpeedProfile sp = lead_lane.speed;
      sp.v0 = std::clamp(target_speed_end + uniform(-1.0, 1.0), sp.lo, sp.hi);
      sp.accel = 0.0;
      const double t_end = (kHistoryLength - 1) * kTimeStep;
      Mover lead{lead_lane.path, lead_lane.lateral, target_s_end + gap - sp.travel(t_end), sp};
      tracks.push_back(sample(lead, kHistoryLength, 0.0));
      --budget;
    }
    const int extra = others.empty() ? 0 : uniform_int(0, budget);
    const double t_end = (kHistoryLength - 1) * kTimeStep;
    for (int k = 0; k < extra; ++k) {
      const Candidate& c = others[static_cast<std::size_t>(uniform_int(0, static_cast<int>(others.size()) - 1))];
      SpeedProfile sp = speed_profile(c.curvature);
      const double s_end = target_s_end + uniform(-40.0, 40.0);
      Mover m{c.path, c.lateral, s_end - sp.travel(t_end), sp};
      tracks.push_back(sample(m, kHistoryLength, 0.0));
    }
    std::vector<Trajectory> out;
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      out.push_back(Trajectory::FromXY("nbr-" + std::to_string(k), tracks[k], 0.0));
    }
    return out;
  }

  void add_noise(Trajectory& traj) {
    if (config_.noise_sigma <= 0.0) return;
    for (Index i = 0; i < traj.size(); ++i) {
      traj.points()(i, 0) += normal(0.0, config_.noise_sigma);
      traj.points()(i, 1) += normal(0.0, config_.noise_sigma);
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  const GeneratorConfig& config_;
};

constexpr double kHistoryEnd = (kHistoryLength - 1) * kTimeStep;

Scenario straight_scenario(Builder& b, const GeneratorConfig& c) {
  const double w = c.lane_width;
  Path road(Vec2::Zero(), 0.0);
  road.line(1000.0);
  const std::array<double, 3> offsets{-w, 0.0, w};
  const int lane_index = b.uniform_int(0, 2);

  SpeedProfile sp = b.speed_profile(0.0);
  const double s0 = 100.0;
  double lc_dir = 0.0;
  double lc_start = 0.0;
  double lc_duration = 1.0;
  if (b.bernoulli(c.lane_change_prob)) {
    if (lane_index == 0) lc_dir = 1.0;
    else if (lane_index == 2) lc_dir = -1.0;
    else lc_dir = b.bernoulli(0.5) ? 1.0 : -1.0;
    lc_duration = b.uniform(5.0, 7.0);
    lc_start = b.uniform(-3.0, 0.5);
  }
  auto target_at = [&](double t) {
    const double lateral = offsets[static_cast<std::size_t>(lane_index)] +
                           lc_dir * w * smoothstep_cos((t - lc_start) / lc_duration);
    return road.position(s0 + sp.travel(t), lateral);
  };

  Scenario s;
  Points2<double> hist(kHistoryLength, 2), fut(kFutureLength, 2);
  for (int k = 0; k < kHistoryLength; ++k) hist.row(k) = target_at(k * kTimeStep);
  for (int k = 0; k < kFutureLength; ++k) fut.row(k) = target_at(kHistoryEnd + (k + 1) * kTimeStep);
  s.target_history = Trajectory::FromXY("target", hist, 0.0);
  s.target_future = Trajectory::FromXY("target", fut, kHistoryEnd + kTimeStep);

  const double s_end = s0 + sp.travel(kHistoryEnd);
  std::array<std::vector<int>, 3> chains;
  for (std::size_t i = 0; i < 3; ++i) chains[i] = add_lane_chain(s.lane_graph, road, offsets[i], s_end - 60.0, s_end + 80.0);
  link_side_by_side(s.lane_graph, chains[1], chains[0]);
  link_side_by_side(s.lane_graph, chains[2], chains[1]);

  const double lateral_end = offsets[static_cast<std::size_t>(lane_index)] +
                             lc_dir * w * smoothstep_cos((kHistoryEnd - lc_start) / lc_duration);
  const int current_lane = std::clamp(static_cast<int>(std::lround(lateral_end / w)) + 1, 0, 2);
  Mover lead_lane{&road, offsets[static_cast<std::size_t>(current_lane)], 0.0, b.speed_profile(0.0)};
  std::vector<Candidate> others;
  for (int i = 0; i < 3; ++i) {
    if (i != current_lane) others.push_back({&road, offsets[static_cast<std::size_t>(i)], 0.0});
  }
  s.neighbor_histories = b.neighbors(lead_lane, sp.speed(kHistoryEnd), s_end, others);
  return s;
}

Scenario curve_scenario(Builder& b, const GeneratorConfig& c) {
  const double w = c.lane_width;
  const double radius = b.uniform(c.curve_radius_min, c.curve_radius_max);
  const double sign = b.bernoulli(0.5) ? 1.0 : -1.0;
  Path road(Vec2::Zero(), 0.0);
  road.arc(sign / radius, 1.8 * kPi * radius);

  SpeedProfile sp = b.speed_profile(1.0 / radius);
  const double s0 = std::min(20.0, 0.1 * kPi * radius);
  Mover target{&road, 0.0, s0, sp};

  Scenario s;
  s.target_history = Trajectory::FromXY("target", sample(target, kHistoryLength, 0.0), 0.0);
  s.target_future = Trajectory::FromXY("target", sample(target, kFutureLength, kHistoryEnd + kTimeStep),
                                       kHistoryEnd + kTimeStep);

  const double s_end = s0 + sp.travel(kHistoryEnd);
  const double lane_lo = std::max(0.0, s_end - 60.0);
  const double lane_hi = std::min(road.length(), s_end + 80.0);
  // Positive lateral moves toward the centre of a left curve.
  const std::array<double, 3> offsets{-w, 0.0, w};
  std::array<std::vector<int>, 3> chains;
  for (std::size_t i = 0; i < 3; ++i) chains[i] = add_lane_chain(s.lane_graph, road, offsets[i], lane_lo, lane_hi);
  link_side_by_side(s.lane_graph, chains[1], chains[0]);
  link_side_by_side(s.lane_graph, chains[2], chains[1]);

  std::vector<Candidate> others;
  for (double off : {-w, w}) others.push_back({&road, off, 1.0 / (radius - sign * off)});
  s.neighbor_histories = b.neighbors(target, sp.speed(kHistoryEnd), s_end, others);
  return s;
}

Scenario intersection_scenario(Builder& b, const GeneratorConfig& c) {
  const double w = c.lane_width;
  const double turn_radius = b.uniform(c.curve_radius_min, std::max(c.curve_radius_min, std::min(c.curve_radius_max, 30.0)));
  const double approach = 100.0;
  const double quarter = 0.5 * kPi * turn_radius;

  Path straight_path(Vec2(0.0, -approach), 0.5 * kPi);
  straight_path.line(approach).line(quarter + 200.0);
  Path left_path(Vec2(0.0, -approach), 0.5 * kPi);
  left_path.line(approach).arc(1.0 / turn_radius, quarter).line(200.0);
  Path right_path(Vec2(0.0, -approach), 0.5 * kPi);
  right_path.line(approach).arc(-1.0 / turn_radius, quarter).line(200.0);
  Path oncoming(Vec2(w, approach + turn_radius), -0.5 * kPi);
  oncoming.line(2.0 * approach + 2.0 * turn_radius);
  Path cross_east(Vec2(-approach, turn_radius - w), 0.0);
  cross_east.line(2.0 * approach);
  Path cross_west(Vec2(approach, turn_radius), kPi);
  cross_west.line(2.0 * approach);

  const double pick = b.uniform(0.0, 1.0);
  const Path* path = pick < 0.4 ? &left_path : (pick < 0.8 ? &right_path : &straight_path);

  SpeedProfile sp = b.speed_profile(1.0 / turn_radius);
  const double turn_time = b.uniform(-1.0, 1.2);
  Mover target{path, 0.0, approach - sp.travel(turn_time), sp};

  Scenario s;
  s.target_history = Trajectory::FromXY("target", sample(target, kHistoryLength, 0.0), 0.0);
  s.target_future = Trajectory::FromXY("target", sample(target, kFutureLength, kHistoryEnd + kTimeStep),
                                       kHistoryEnd + kTimeStep);

  const double s_end = target.s_at_zero + sp.travel(kHistoryEnd);
  LaneGraph& g = s.lane_graph;
  const auto in_lane = add_lane_chain(g, straight_path, 0.0, std::min(s_end - 60.0, approach - 20.0), approach);
  const auto thru = add_lane_chain(g, straight_path, 0.0, approach, approach + turn_radius + 30.0);
  const auto left = add_lane_chain(g, left_path, 0.0, approach, approach + quarter + 30.0);
  const auto right = add_lane_chain(g, right_path, 0.0, approach, approach + quarter + 30.0);
  link_chains(g, in_lane, thru);
  link_chains(g, in_lane, left);
  link_chains(g, in_lane, right);
  add_lane_chain(g, oncoming, 0.0, approach - 40.0, approach + 2.0 * turn_radius + 40.0);
  add_lane_chain(g, cross_east, 0.0, approach - 50.0, approach + 50.0);
  add_lane_chain(g, cross_west, 0.0, approach - 50.0, approach + 50.0);

  std::vector<Candidate> others{{&oncoming, 0.0, 0.0}, {&cross_east, 0.0, 0.0}, {&cross_west, 0.0, 0.0}};
  s.neighbor_histories = b.neighbors(target, sp.speed(kHistoryEnd), s_end, others);
  return s;
}

}  // namespace

Scenario generate_synthetic_scenario(std::uint64_t seed, Layout layout, const GeneratorConfig& config) {
  validate(config);
  Builder builder(seed, config);
  Scenario s;
  switch (layout) {
    case Layout::kStraight: s = straight_scenario(builder, config); break;
    case Layout::kCurve: s = curve_scenario(builder, config); break;
    case Layout::kIntersection: s = intersection_scenario(builder, config); break;
  }
  builder.add_noise(s.target_history);
  for (auto& nb : s.neighbor_histories) builder.add_noise(nb);
  if (config.random_pose) {
    const double theta = builder.uniform(-kPi, kPi);
    const Vec2 shift(builder.uniform(-500.0, 500.0), builder.uniform(-500.0, 500.0));
    s = transformed(s, theta, shift);
  }
  char id[32];
  std::snprintf(id, sizeof(id), "syn-%016llx", static_cast<unsigned long long>(seed));
  s.scenario_id = id;
  s.anomaly_label = AnomalyLabel::kNormal;
  validate_scenario(s);
  return s;
}

std::vector<Scenario> generate_dataset(std::uint64_t seed, int count, const GeneratorConfig& config) {
  validate(config);
  if (count < 0) throw ConfigError("count", "must be non-negative");
  const double total = config.weight_straight + config.weight_curve + config.weight_intersection;
  std::vector<Scenario> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t item_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const double u = static_cast<double>(splitmix64(item_seed) >> 11) * 0x1.0p-53 * total;
    Layout layout = Layout::kIntersection;
    if (u < config.weight_straight) layout = Layout::kStraight;
    else if (u < config.weight_straight + config.weight_curve) layout = Layout::kCurve;
    Scenario s = generate_synthetic_scenario(item_seed, layout, config);
    char id[48];
    std::snprintf(id, sizeof(id), "n%llu-%05d", static_cast<unsigned long long>(seed), i);
    s.scenario_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trajad
