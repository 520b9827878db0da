#include "trajad/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "trajad/errors.hpp"

namespace trajad {

using nn::Var;

namespace {

constexpr int kHeadingBaseline = 5;  // waypoints spanned by the frame heading
constexpr double kPositionScale = 0.1;
constexpr double kOutputScale = 10.0;
constexpr int kPredictorSchema = 1;

// Per-scenario frame rows (ox, oy, c, s) from the target history rows.
Var frame_op(Var history) {
  const Index batch = history.rows() / kHistoryLength;
  const Matrix& h = history.value();
  Matrix frame(batch, 4);
  Vector norms(batch);
  for (Index b = 0; b < batch; ++b) {
    const Index last = b * kHistoryLength + kHistoryLength - 1;
    const Vec2 o = h.row(last).transpose();
    const Vec2 d = o - h.row(last - kHeadingBaseline).transpose();
    const double n = d.norm();
    norms(b) = n;
    frame.row(b) << o.x(), o.y(), n > 1e-9 ? d.x() / n : 1.0, n > 1e-9 ? d.y() / n : 0.0;
  }
  nn::Tape* t = history.tape();
  return t->record(frame, {history}, [t, history, batch, norms, frame](const Matrix& g) {
    Matrix d = Matrix::Zero(history.rows(), 2);
    for (Index b = 0; b < batch; ++b) {
      const Index last = b * kHistoryLength + kHistoryLength - 1;
      d(last, 0) += g(b, 0);
      d(last, 1) += g(b, 1);
      if (norms(b) <= 1e-9) continue;
      const Vec2 u(frame(b, 2), frame(b, 3));
      const Vec2 gu(g(b, 2), g(b, 3));
      const Vec2 gd = (gu - u * u.dot(gu)) / norms(b);
      d.row(last) += gd.transpose();
      d.row(last - kHeadingBaseline) -= gd.transpose();
    }
    t->accumulate(history, d);
  });
}

// World -> target frame for rows belonging to scene[r].
Var to_local(Var frame, Var points, const std::vector<Index>& scene) {
  const Matrix& f = frame.value();
  const Matrix& p = points.value();
  Matrix out(p.rows(), 2);
  for (Index r = 0; r < p.rows(); ++r) {
    const Index b = scene[static_cast<std::size_t>(r)];
    const double dx = p(r, 0) - f(b, 0), dy = p(r, 1) - f(b, 1), c = f(b, 2), s = f(b, 3);
    out(r, 0) = c * dx + s * dy;
    out(r, 1) = -s * dx + c * dy;
  }
  nn::Tape* t = frame.tape();
  return t->record(std::move(out), {frame, points}, [t, frame, points, scene](const Matrix& g) {
    const Matrix& f = frame.value();
    const Matrix& p = points.value();
    Matrix dp(p.rows(), 2);
    Matrix df = Matrix::Zero(f.rows(), 4);
    for (Index r = 0; r < p.rows(); ++r) {
      const Index b = scene[static_cast<std::size_t>(r)];
      const double dx = p(r, 0) - f(b, 0), dy = p(r, 1) - f(b, 1), c = f(b, 2), s = f(b, 3);
      const double gx = g(r, 0), gy = g(r, 1);
      dp(r, 0) = c * gx - s * gy;
      dp(r, 1) = s * gx + c * gy;
      df(b, 0) -= dp(r, 0);
      df(b, 1) -= dp(r, 1);
      df(b, 2) += gx * dx + gy * dy;
      df(b, 3) += gx * dy - gy * dx;
    }
    if (t->requires_grad(points)) t->accumulate(points, dp);
    if (t->requires_grad(frame)) t->accumulate(frame, df);
  });
}

// Target frame -> world.
Var to_world(Var frame, Var local, const std::vector<Index>& scene) {
  const Matrix& f = frame.value();
  const Matrix& l = local.value();
  Matrix out(l.rows(), 2);
  for (Index r = 0; r < l.rows(); ++r) {
    const Index b = scene[static_cast<std::size_t>(r)];
    const double c = f(b, 2), s = f(b, 3);
    out(r, 0) = c * l(r, 0) - s * l(r, 1) + f(b, 0);
    out(r, 1) = s * l(r, 0) + c * l(r, 1) + f(b, 1);
  }
  nn::Tape* t = frame.tape();
  return t->record(std::move(out), {frame, local}, [t, frame, local, scene](const Matrix& g) {
    const Matrix& f = frame.value();
    const Matrix& l = local.value();
    Matrix dl(l.rows(), 2);
    Matrix df = Matrix::Zero(f.rows(), 4);
    for (Index r = 0; r < l.rows(); ++r) {
      const Index b = scene[static_cast<std::size_t>(r)];
      const double c = f(b, 2), s = f(b, 3), gx = g(r, 0), gy = g(r, 1);
      dl(r, 0) = c * gx + s * gy;
      dl(r, 1) = -s * gx + c * gy;
      df(b, 0) += gx;
      df(b, 1) += gy;
      df(b, 2) += gx * l(r, 0) + gy * l(r, 1);
      df(b, 3) += -gx * l(r, 1) + gy * l(r, 0);
    }
    if (t->requires_grad(local)) t->accumulate(local, dl);
    if (t->requires_grad(frame)) t->accumulate(frame, df);
  });
}

Points2<double> resample_polyline(const Points2<double>& line, int count) {
  std::vector<double> cum(static_cast<std::size_t>(line.rows()), 0.0);
  for (Index i = 1; i < line.rows(); ++i) {
    cum[static_cast<std::size_t>(i)] = cum[static_cast<std::size_t>(i - 1)] + (line.row(i) - line.row(i - 1)).norm();
  }
  const double total = cum.back();
  Points2<double> out(count, 2);
  Index seg = 0;
  for (int k = 0; k < count; ++k) {
    const double target = total * k / (count - 1);
    while (seg + 2 < line.rows() && cum[static_cast<std::size_t>(seg + 1)] < target) ++seg;
    const double a = cum[static_cast<std::size_t>(seg)];
    const double len = cum[static_cast<std::size_t>(seg + 1)] - a;
    const double u = len > 0 ? std::clamp((target - a) / len, 0.0, 1.0) : 0.0;
    out.row(k) = (1.0 - u) * line.row(seg) + u * line.row(seg + 1);
  }
  return out;
}

struct BatchContext {
  std::vector<Index> target_row_scene;   // (B*20)
  std::vector<Index> future_row_scene;   // (B*30)
  Matrix neighbor_xy;                    // (N*20) x 2
  std::vector<Index> neighbor_row_scene;
  std::vector<Index> neighbor_scene;     // per neighbour
  Matrix lane_xy;                        // (L*10) x 2
  std::vector<Index> lane_row_scene;
  std::vector<Index> lane_scene;         // per lane
};

BatchContext make_context(std::span<const Scenario* const> batch) {
  BatchContext ctx;
  Index neighbors = 0, lanes = 0;
  for (const Scenario* s : batch) {
    neighbors += static_cast<Index>(s->neighbor_histories.size());
    lanes += static_cast<Index>(s->lane_graph.lanes.size());
  }
  ctx.neighbor_xy.resize(neighbors * kHistoryLength, 2);
  ctx.lane_xy.resize(lanes * PredictorModel::kLanePoints, 2);
  Index nrow = 0, lrow = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Index scene = static_cast<Index>(b);
    for (int k = 0; k < kHistoryLength; ++k) ctx.target_row_scene.push_back(scene);
    for (int k = 0; k < kFutureLength; ++k) ctx.future_row_scene.push_back(scene);
    for (const Trajectory& nb : batch[b]->neighbor_histories) {
      ctx.neighbor_xy.middleRows(nrow, kHistoryLength) = nb.xy();
      nrow += kHistoryLength;
      ctx.neighbor_scene.push_back(scene);
      for (int k = 0; k < kHistoryLength; ++k) ctx.neighbor_row_scene.push_back(scene);
    }
    for (const Lane& lane : batch[b]->lane_graph.lanes) {
      ctx.lane_xy.middleRows(lrow, PredictorModel::kLanePoints) = resample_polyline(lane.centerline, PredictorModel::kLanePoints);
      lrow += PredictorModel::kLanePoints;
      ctx.lane_scene.push_back(scene);
      for (int k = 0; k < PredictorModel::kLanePoints; ++k) ctx.lane_row_scene.push_back(scene);
    }
  }
  return ctx;
}

Matrix stack_histories(std::span<const Scenario* const> batch) {
  Matrix xy(static_cast<Index>(batch.size()) * kHistoryLength, 2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    xy.middleRows(static_cast<Index>(b) * kHistoryLength, kHistoryLength) = batch[b]->target_history.xy();
  }
  return xy;
}

std::vector<const Scenario*> pointers(std::span<const Scenario> batch) {
  std::vector<const Scenario*> out;
  out.reserve(batch.size());
  for (const Scenario& s : batch) out.push_back(&s);
  return out;
}

Trajectory to_trajectory(const Matrix& world_rows, Index first_row, const Scenario& s) {
  Trajectory::Storage pts(kFutureLength, 3);
  pts.leftCols<2>() = world_rows.middleRows(first_row, kFutureLength);
  const double t_last = s.target_history[kHistoryLength - 1].t;
  for (int k = 0; k < kFutureLength; ++k) {
    pts(k, 2) = s.target_future.size() == kFutureLength ? s.target_future[k].t : t_last + (k + 1) * kTimeStep;
  }
  return Trajectory(s.target_history.agent_id(), std::move(pts));
}

}  // namespace

void for_each_chunk(std::size_t count, std::size_t chunk, const std::function<void(std::size_t, std::size_t)>& fn) {
  for (std::size_t begin = 0; begin < count; begin += chunk) fn(begin, std::min(count, begin + chunk));
}

void PredictorModel::build() {
  params_ = nn::ParamSet{};
  convs_ = {nn::Conv1d::create(params_, "conv0", 4, kChannels, 1),
            nn::Conv1d::create(params_, "conv1", kChannels, kChannels, 2),
            nn::Conv1d::create(params_, "conv2", kChannels, kChannels, 4)};
  agent_proj_ = nn::Linear::create(params_, "agent_proj", 2 * kChannels, kChannels);
  lane_in_ = nn::Linear::create(params_, "lane_in", 2 * kLanePoints, kChannels);
  lane_hidden_ = nn::Linear::create(params_, "lane_hidden", kChannels, kChannels);
  for (int r = 0; r < 2; ++r) {
    mp_self_[r] = nn::Linear::create(params_, "mp" + std::to_string(r) + ".self", kChannels, kChannels);
    mp_neighbor_[r] = params_.add("mp" + std::to_string(r) + ".neighbor.weight", kChannels, kChannels);
  }
  dec_hidden_ = nn::Linear::create(params_, "dec_hidden", kFeatureDim, kFeatureDim);
  dec_out_ = nn::Linear::create(params_, "dec_out", kFeatureDim, 2 * kFutureLength);
}

PredictorModel PredictorModel::initialize(std::uint64_t seed) {
  PredictorModel m;
  m.build();
  std::mt19937_64 rng(seed);
  nn::init_glorot(m.params_, rng);
  return m;
}

PredictorModel::Outputs PredictorModel::forward(nn::Binding& bind, Var target_history,
                                                std::span<const Scenario* const> batch) const {
  const Index B = static_cast<Index>(batch.size());
  if (B == 0) throw ShapeError("predictor: empty batch");
  if (target_history.rows() != B * kHistoryLength || target_history.cols() != 2) {
    throw ShapeError("predictor: target history must be (B*20) x 2");
  }
  nn::Tape& tape = bind.tape;
  const BatchContext ctx = make_context(batch);
  const Index N = static_cast<Index>(ctx.neighbor_scene.size());
  const Index L = static_cast<Index>(ctx.lane_scene.size());

  Var frame = frame_op(target_history);
  Var agents = to_local(frame, target_history, ctx.target_row_scene);
  if (N > 0) {
    agents = nn::concat_rows({agents, to_local(frame, tape.constant(ctx.neighbor_xy), ctx.neighbor_row_scene)});
  }
  const Index A = B + N;

  Var h = nn::concat_cols({nn::scale(agents, kPositionScale), nn::temporal_diff(agents, kHistoryLength)});
  for (const nn::Conv1d& conv : convs_) h = nn::silu(conv(bind, h, kHistoryLength));

  std::vector<Index> last_rows(static_cast<std::size_t>(A)), row_agent(static_cast<std::size_t>(A * kHistoryLength));
  for (Index a = 0; a < A; ++a) {
    last_rows[static_cast<std::size_t>(a)] = a * kHistoryLength + kHistoryLength - 1;
    for (Index k = 0; k < kHistoryLength; ++k) row_agent[static_cast<std::size_t>(a * kHistoryLength + k)] = a;
  }
  Var agent_emb = nn::silu(agent_proj_(bind, nn::concat_cols({nn::gather_rows(h, last_rows), nn::segment_mean(h, row_agent, A)})));

  std::vector<Index> node_scene;
  for (Index b = 0; b < B; ++b) node_scene.push_back(b);
  node_scene.insert(node_scene.end(), ctx.neighbor_scene.begin(), ctx.neighbor_scene.end());
  Var nodes = agent_emb;
  if (L > 0) {
    Var lane_local = to_local(frame, tape.constant(ctx.lane_xy), ctx.lane_row_scene);
    Var lane_emb = nn::silu(lane_hidden_(bind, nn::silu(lane_in_(bind, nn::group_rows(nn::scale(lane_local, kPositionScale), kLanePoints)))));
    nodes = nn::concat_rows({agent_emb, lane_emb});
    node_scene.insert(node_scene.end(), ctx.lane_scene.begin(), ctx.lane_scene.end());
  }
  for (int r = 0; r < 2; ++r) {
    Var context = nn::gather_rows(nn::segment_mean(nodes, node_scene, B), node_scene);
    nodes = nodes + nn::silu(mp_self_[r](bind, nodes) + nn::matmul(context, bind(mp_neighbor_[r])));
  }
  Var features = nn::concat_cols({nn::slice_rows(nodes, 0, B), nn::slice_rows(agent_emb, 0, B)});
  Var decoded = dec_out_(bind, nn::silu(dec_hidden_(bind, features)));
  Var local_future = nn::ungroup_rows(nn::scale(decoded, kOutputScale), kFutureLength);
  return {features, local_future, frame};
}

Var PredictorModel::forward_world(nn::Tape& tape, Var target_history, std::span<const Scenario* const> batch) const {
  auto& self = const_cast<PredictorModel&>(*this);
  nn::Binding bind{tape, self.params_, false};
  Outputs out = forward(bind, target_history, batch);
  std::vector<Index> scene;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (int k = 0; k < kFutureLength; ++k) scene.push_back(static_cast<Index>(b));
  }
  return to_world(out.frame, out.local_future, scene);
}

Matrix PredictorModel::extract_features(std::span<const Scenario> batch) const {
  if (!frozen()) throw StateError("extract_features: predictor must be frozen before detection use");
  Matrix out(static_cast<Index>(batch.size()), kFeatureDim);
  auto& self = const_cast<PredictorModel&>(*this);
  for_each_chunk(batch.size(), 64, [&](std::size_t begin, std::size_t end) {
    const auto ptrs = pointers(batch.subspan(begin, end - begin));
    nn::Tape tape;
    nn::Binding bind{tape, self.params_, false};
    Outputs o = forward(bind, tape.constant(stack_histories(ptrs)), ptrs);
    out.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)) = o.features.value();
  });
  return out;
}

FeatureVector PredictorModel::extract_features(const Scenario& s) const {
  return extract_features(std::span<const Scenario>(&s, 1)).row(0).transpose();
}

std::vector<PredictionResult> PredictorModel::predict_future(std::span<const Scenario> batch) const {
  std::vector<PredictionResult> out;
  out.reserve(batch.size());
  for_each_chunk(batch.size(), 64, [&](std::size_t begin, std::size_t end) {
    const auto ptrs = pointers(batch.subspan(begin, end - begin));
    nn::Tape tape;
    Var world = forward_world(tape, tape.constant(stack_histories(ptrs)), ptrs);
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      out.push_back({to_trajectory(world.value(), static_cast<Index>(b) * kFutureLength, *ptrs[b])});
    }
  });
  return out;
}

PredictionResult PredictorModel::predict_future(const Scenario& s) const {
  return predict_future(std::span<const Scenario>(&s, 1)).front();
}

Matrix PredictorModel::local_history(const Scenario& s) {
  const auto ptrs = std::vector<const Scenario*>{&s};
  nn::Tape tape;
  Var hist = tape.constant(stack_histories(ptrs));
  std::vector<Index> scene(kHistoryLength, 0);
  return to_local(frame_op(hist), hist, scene).value();
}

void PredictorModel::save(const std::filesystem::path& path, std::string_view config_hash) const {
  nlohmann::json j;
  j["schema_version"] = kPredictorSchema;
  j["kind"] = "predictor";
  j["frozen"] = frozen();
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["params"] = params_.to_json();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump() << '\n';
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("predictor checkpoint: ") + e.what());
  }
  if (j.value("schema_version", -1) != kPredictorSchema || j.value("kind", "") != "predictor") {
    throw VersionError("predictor checkpoint: unsupported schema or kind");
  }
  PredictorModel m;
  m.build();
  m.params_.load_json(j.at("params"));
  m.state_ = j.value("frozen", false) ? TrainingState::kFrozen : TrainingState::kTrainable;
  return m;
}

double average_displacement_error(const Trajectory& predicted, const Trajectory& truth) {
  if (predicted.size() != truth.size() || predicted.empty()) throw ShapeError("ADE: trajectories differ in length");
  return (predicted.xy() - truth.xy()).rowwise().norm().mean();
}

double mean_ade(const PredictorModel& model, std::span<const Scenario> scenarios) {
  if (scenarios.empty()) return 0.0;
  const auto preds = model.predict_future(scenarios);
  double total = 0.0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    total += average_displacement_error(preds[i].predicted_future, scenarios[i].target_future);
  }
  return total / static_cast<double>(scenarios.size());
}

PredictorModel train_predictor(std::span<const Scenario> dataset, const PredictorHyperparams& hp,
                               PredictorTrainingLog* log, std::span<const Scenario> validation) {
  if (hp.epochs < 1) throw ConfigError("predictor.epochs", "must be >= 1");
  if (hp.batch_size < 1) throw ConfigError("predictor.batch_size", "must be >= 1");
  if (!(hp.learning_rate > 0)) throw ConfigError("predictor.learning_rate", "must be positive");
  if (dataset.empty()) throw DataError("train_predictor: empty dataset");
  for (const Scenario& s : dataset) {
    if (s.anomaly_label != AnomalyLabel::kNormal) {
      throw DataError("train_predictor: scenario '" + s.scenario_id + "' is not labelled normal");
    }
  }
  PredictorModel model = PredictorModel::initialize(hp.seed);
  nn::Adam opt(model.params_, nn::AdamConfig{hp.learning_rate});
  std::mt19937_64 rng(hp.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for_each_chunk(order.size(), static_cast<std::size_t>(hp.batch_size), [&](std::size_t begin, std::size_t end) {
      std::vector<const Scenario*> ptrs;
      for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&dataset[order[i]]);
      nn::Tape tape;
      nn::Binding bind{tape, model.params_, true};
      PredictorModel::Outputs out = model.forward(bind, tape.constant(stack_histories(ptrs)), ptrs);
      // Ground truth expressed in each scenario's own frame.
      const Matrix& f = out.frame.value();
      Matrix gt(static_cast<Index>(ptrs.size()) * kFutureLength, 2);
      for (std::size_t b = 0; b < ptrs.size(); ++b) {
        const double c = f(static_cast<Index>(b), 2), s = f(static_cast<Index>(b), 3);
        for (int k = 0; k < kFutureLength; ++k) {
          const Vec2 d = ptrs[b]->target_future.position(k) - Vec2(f(static_cast<Index>(b), 0), f(static_cast<Index>(b), 1));
          gt.row(static_cast<Index>(b) * kFutureLength + k) << c * d.x() + s * d.y(), -s * d.x() + c * d.y();
        }
      }
      Var loss = nn::smooth_l1_mean(out.local_future, tape.constant(gt));
      if (!std::isfinite(loss.scalar())) throw TrainingError("train_predictor: loss diverged at epoch " + std::to_string(epoch));
      tape.backward(loss);
      opt.step();
      loss_sum += loss.scalar();
      ++batches;
    });
    if (log) {
      log->epoch_loss.push_back(loss_sum / static_cast<double>(batches));
      if (!validation.empty()) log->val_ade.push_back(mean_ade(model, validation));
    }
  }
  model.freeze();
  return model;
}

}  // namespace trajad
