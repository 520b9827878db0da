#include "trajad/attack.hpp"

#include <cmath>
#include <limits>

#include "trajad/errors.hpp"
#include "trajad/rng.hpp"

namespace trajad {

using nn::Var;

std::string_view to_string(AttackPattern pattern) {
  return pattern == AttackPattern::kRandom ? "random" : "directional";
}

std::string_view to_string(Side side) { return side == Side::kLeft ? "left" : "right"; }

AttackPattern attack_pattern_from_string(std::string_view name) {
  if (name == "random") return AttackPattern::kRandom;
  if (name == "directional") return AttackPattern::kDirectional;
  throw ConfigError("pattern", "unknown pattern '" + std::string(name) + "' (valid: random, directional)");
}

Side side_from_string(std::string_view name) {
  if (name == "left") return Side::kLeft;
  if (name == "right") return Side::kRight;
  throw ConfigError("side", "unknown side '" + std::string(name) + "' (valid: left, right)");
}

AnomalyLabel label_for(AttackPattern pattern) {
  return pattern == AttackPattern::kRandom ? AnomalyLabel::kRandom : AnomalyLabel::kDirectional;
}

void validate(const AttackConfig& cfg) {
  if (!(cfg.epsilon > 0) || !std::isfinite(cfg.epsilon)) throw ConfigError("epsilon", "must be positive");
  if (cfg.steps < 1) throw ConfigError("steps", "must be >= 1");
  if (!(cfg.step_size > 0) || cfg.step_size > cfg.epsilon) throw ConfigError("step_size", "must lie in (0, epsilon]");
  if (!(cfg.smoothing >= 0) || !std::isfinite(cfg.smoothing)) throw ConfigError("smoothing", "must be >= 0");
}

Side resolve_side(const AttackConfig& cfg, const Scenario& s) {
  if (cfg.side) return *cfg.side;
  return (splitmix64(fnv1a(s.source_id()) ^ cfg.seed) & 1U) ? Side::kRight : Side::kLeft;
}

Points2<double> lateral_directions(const Trajectory& truth, Side side) {
  const Index n = truth.size();
  Points2<double> heading(n, 2);
  std::vector<bool> defined(static_cast<std::size_t>(n), false);
  for (Index a = 0; a < n; ++a) {
    const Index from = a + 1 < n ? a : a - 1;
    if (from < 0) break;
    const Vec2 d = truth.position(from + 1) - truth.position(from);
    if (d.norm() > 1e-9) {
      heading.row(a) = d.normalized().transpose();
      defined[static_cast<std::size_t>(a)] = true;
    }
  }
  // Undefined segments reuse the previous defined heading (or the next one at the start).
  Index first = -1;
  for (Index a = 0; a < n && first < 0; ++a) {
    if (defined[static_cast<std::size_t>(a)]) first = a;
  }
  for (Index a = 0; a < n; ++a) {
    if (defined[static_cast<std::size_t>(a)]) continue;
    if (first < 0) {
      heading.row(a) << 1.0, 0.0;
    } else {
      heading.row(a) = a < first ? heading.row(first) : heading.row(a - 1);
    }
  }
  Points2<double> r(n, 2);
  const double sgn = side == Side::kLeft ? 1.0 : -1.0;
  r.col(0) = -sgn * heading.col(1);
  r.col(1) = sgn * heading.col(0);
  return r;
}

namespace {

void check_frames(const Trajectory& predicted, const Trajectory& truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw ShapeError("objective: prediction has " + std::to_string(predicted.size()) + " frames, ground truth " +
                     std::to_string(truth.size()));
  }
}

// Per-row Euclidean norm (R x 1); zero rows get a zero gradient.
Var row_norms(Var a) {
  const Vector n = a.value().rowwise().norm();
  nn::Tape* t = a.tape();
  return t->record(n, {a}, [t, a, n](const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (Index r = 0; r < a.rows(); ++r) {
      if (n(r) > 0) d.row(r) = a.value().row(r) * (g(r, 0) / n(r));
    }
    t->accumulate(a, d);
  });
}

std::string anomaly_id(const Scenario& s, AttackPattern pattern) {
  return s.scenario_id + (pattern == AttackPattern::kRandom ? "-rnd" : "-dir");
}

// Largest representable value within [clean - eps, clean + eps] nearest to v.
double project_exact(double clean, double v, double eps) {
  double x = std::clamp(v, clean - eps, clean + eps);
  while (std::abs(x - clean) > eps) x = std::nextafter(x, clean);
  return x;
}

}  // namespace

Matrix smoothing_matrix(double sigma) {
  if (sigma <= 0) return Matrix::Identity(kHistoryLength, kHistoryLength);
  Matrix s(kHistoryLength, kHistoryLength);
  for (Index i = 0; i < kHistoryLength; ++i) {
    for (Index j = 0; j < kHistoryLength; ++j) {
      const double d = static_cast<double>(i - j) / sigma;
      s(i, j) = std::exp(-0.5 * d * d);
    }
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

double directional_objective(const Trajectory& predicted, const Trajectory& truth, Side side) {
  check_frames(predicted, truth);
  const Points2<double> r = lateral_directions(truth, side);
  return ((predicted.xy() - truth.xy()).array() * r.array()).rowwise().sum().mean();
}

double random_objective(const Trajectory& predicted, const Trajectory& truth) {
  check_frames(predicted, truth);
  return (predicted.xy() - truth.xy()).rowwise().norm().mean();
}

double attack_objective(const Trajectory& predicted, const Trajectory& truth, AttackPattern pattern, Side side) {
  return pattern == AttackPattern::kRandom ? random_objective(predicted, truth)
                                           : directional_objective(predicted, truth, side);
}

Qualification label_anomaly(const PredictorModel& model, const Scenario& perturbed, const Scenario& clean,
                            AttackPattern pattern, Side side) {
  if (perturbed.anomaly_label != AnomalyLabel::kNormal && perturbed.anomaly_label != label_for(pattern)) {
    throw ConfigError("pattern", "scenario '" + perturbed.scenario_id + "' is labelled " +
                                     std::string(to_string(perturbed.anomaly_label)) + ", not " +
                                     std::string(to_string(pattern)));
  }
  if (perturbed.target_future.size() != clean.target_future.size() ||
      perturbed.target_future.points() != clean.target_future.points()) {
    throw ShapeError("label_anomaly: perturbed and clean scenarios must share the ground-truth future");
  }
  const Trajectory pred = model.predict_future(perturbed).predicted_future;
  if (pattern == AttackPattern::kRandom) {
    return random_objective(pred, clean.target_future) > kRandomThreshold ? Qualification::kQualified
                                                                          : Qualification::kUnqualified;
  }
  return std::abs(directional_objective(pred, clean.target_future, side)) > kDirectionalThreshold
             ? Qualification::kQualified
             : Qualification::kUnqualified;
}

std::vector<AttackResult> pgd_attack(const PredictorModel& model, std::span<const Scenario> batch,
                                     const AttackConfig& cfg) {
  validate(cfg);
  if (!model.frozen()) throw StateError("pgd: predictor must be frozen");
  const Index B = static_cast<Index>(batch.size());
  if (B == 0) return {};
  std::vector<const Scenario*> ptrs;
  std::vector<Side> sides;
  Matrix clean(B * kHistoryLength, 2), truth(B * kFutureLength, 2), lateral(B * kFutureLength, 2);
  for (Index b = 0; b < B; ++b) {
    const Scenario& s = batch[static_cast<std::size_t>(b)];
    if (s.anomaly_label != AnomalyLabel::kNormal) throw DataError("pgd: scenario '" + s.scenario_id + "' is not normal");
    validate_trajectory(s.target_future, kFutureLength, "target_future");
    ptrs.push_back(&s);
    sides.push_back(resolve_side(cfg, s));
    clean.middleRows(b * kHistoryLength, kHistoryLength) = s.target_history.xy();
    truth.middleRows(b * kFutureLength, kFutureLength) = s.target_future.xy();
    lateral.middleRows(b * kFutureLength, kFutureLength) = lateral_directions(s.target_future, sides.back());
  }

  // PGD runs on coefficients c with delta = S c. S has nonnegative rows
  // summing to one, so |c| <= eps implies |delta| <= eps.
  const Matrix smoother = smoothing_matrix(cfg.smoothing);
  Matrix coef = Matrix::Zero(B * kHistoryLength, 2);
  Matrix delta = coef;
  Matrix best_delta = delta;
  Vector best = Vector::Constant(B, -std::numeric_limits<double>::infinity());
  Vector before(B);
  for (int k = 0; k <= cfg.steps; ++k) {
    nn::Tape tape;
    Var x = tape.input(clean + delta);
    Var err = model.forward_world(tape, x, ptrs) - tape.constant(truth);
    Var per_frame = cfg.pattern == AttackPattern::kRandom ? row_norms(err)
                                                          : nn::row_sums(nn::mul(err, tape.constant(lateral)));
    for (Index b = 0; b < B; ++b) {
      const double obj = per_frame.value().col(0).segment(b * kFutureLength, kFutureLength).mean();
      if (k == 0) before(b) = obj;
      if (obj > best(b)) {
        best(b) = obj;
        best_delta.middleRows(b * kHistoryLength, kHistoryLength) = delta.middleRows(b * kHistoryLength, kHistoryLength);
      }
    }
    if (k == cfg.steps) break;
    tape.backward(nn::scale(nn::sum(per_frame), 1.0 / kFutureLength));
    const Matrix& g = x.grad();
    if (g.size() == 0) throw CapabilityError("pgd: predictor output is not differentiable w.r.t. the history");
    for (Index b = 0; b < B; ++b) {
      auto c = coef.middleRows(b * kHistoryLength, kHistoryLength);
      const Matrix gc = smoother.transpose() * g.middleRows(b * kHistoryLength, kHistoryLength);
      c = (c + cfg.step_size * gc.cwiseSign()).cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
      delta.middleRows(b * kHistoryLength, kHistoryLength) = smoother * c;
    }
  }

  std::vector<Scenario> out(batch.begin(), batch.end());
  for (Index b = 0; b < B; ++b) {
    Trajectory& h = out[static_cast<std::size_t>(b)].target_history;
    for (Index i = 0; i < kHistoryLength; ++i) {
      for (Index c = 0; c < 2; ++c) {
        const double c0 = clean(b * kHistoryLength + i, c);
        h.points()(i, c) = project_exact(c0, c0 + best_delta(b * kHistoryLength + i, c), cfg.epsilon);
      }
    }
  }
  // Objectives of the returned histories, evaluated afresh.
  const auto preds = model.predict_future(out);
  std::vector<AttackResult> results;
  results.reserve(batch.size());
  for (Index b = 0; b < B; ++b) {
    const auto i = static_cast<std::size_t>(b);
    AttackResult r;
    r.side = sides[i];
    r.objective_before = before(b);
    r.objective_after = attack_objective(preds[i].predicted_future, batch[i].target_future, cfg.pattern, sides[i]);
    const bool qualified = cfg.pattern == AttackPattern::kRandom ? r.objective_after > kRandomThreshold
                                                                 : std::abs(r.objective_after) > kDirectionalThreshold;
    r.qualification = qualified ? Qualification::kQualified : Qualification::kUnqualified;
    Scenario& s = out[i];
    s.attack_meta = AttackMeta{cfg.epsilon, cfg.steps, r.objective_before, r.objective_after, batch[i].scenario_id};
    if (qualified) {
      s.scenario_id = anomaly_id(batch[i], cfg.pattern);
      s.anomaly_label = label_for(cfg.pattern);
    }
    r.perturbed = std::move(s);
    results.push_back(std::move(r));
  }
  return results;
}

AttackResult pgd_attack(const PredictorModel& model, const Scenario& s, const AttackConfig& cfg) {
  return std::move(pgd_attack(model, std::span<const Scenario>(&s, 1), cfg).front());
}

Scenario pgd_perturb(const PredictorModel& model, const Scenario& s, const AttackConfig& cfg) {
  return pgd_attack(model, s, cfg).perturbed;
}

std::vector<Scenario> build_anomaly_dataset(const PredictorModel& model, std::span<const Scenario> normals,
                                            const AttackConfig& cfg, std::size_t target_count,
                                            AnomalyReport* report) {
  validate(cfg);
  if (target_count < 1) throw ConfigError("target_count", "must be >= 1");
  constexpr std::size_t kChunk = 32;
  AnomalyReport local;
  std::vector<Scenario> out;
  for (std::size_t begin = 0; begin < normals.size() && out.size() < target_count; begin += kChunk) {
    const std::size_t end = std::min(normals.size(), begin + kChunk);
    for (AttackResult& r : pgd_attack(model, normals.subspan(begin, end - begin), cfg)) {
      ++local.attempted;
      if (r.objective_after > r.objective_before) ++local.improved;
      if (r.qualification == Qualification::kQualified) {
        ++local.qualified;
        if (out.size() < target_count) out.push_back(std::move(r.perturbed));
      }
    }
  }
  if (report) *report = local;
  if (out.empty()) {
    throw GenerationError("no " + std::string(to_string(cfg.pattern)) + " anomaly qualified after attacking " +
                          std::to_string(local.attempted) + " normals (improved " + std::to_string(local.improved) +
                          ", epsilon " + std::to_string(cfg.epsilon) + ", steps " + std::to_string(cfg.steps) + ")");
  }
  return out;
}

}  // namespace trajad
