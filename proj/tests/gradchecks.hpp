#pragma once

// Gradient checks shared by the unit tests and the acceptance run. Each
// returns the worst relative error over `count` random coordinates.

#include <random>

#include "oracles.hpp"
#include "trajad/losses.hpp"
#include "trajad/nn/ops.hpp"
#include "trajad/predictor.hpp"

namespace trajad::gradcheck {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// NCE batch loss: analytic normal and anomaly gradients.
inline double nce(std::mt19937_64& rng, int count) {
  const Matrix normals = gaussian(6, 8, rng), anomalies = gaussian(5, 8, rng);
  const double tau = 0.5;
  const BatchLossGrad g = batch_loss_with_grad(normals, anomalies, tau);
  const double e1 = oracle::max_gradcheck_error([&](const Matrix& x) { return batch_loss(x, anomalies, tau); },
                                                normals, g.d_normals, count, rng);
  const double e2 = oracle::max_gradcheck_error([&](const Matrix& x) { return batch_loss(normals, x, tau); },
                                                anomalies, g.d_anomalies, count, rng);
  return std::max(e1, e2);
}

// Semantic loss through the tape (softmax intention logits + aggressiveness)
// against the closed-form scalar loss.
inline double semantic(std::mt19937_64& rng, int count) {
  const Index b = 6;
  const Matrix logits = gaussian(b, 4, rng);
  Matrix one_hot = Matrix::Zero(b, 3);
  Matrix agg = gaussian(b, 1, rng);
  for (Index i = 0; i < b; ++i) one_hot(i, i % 3) = 1.0;

  nn::Tape tape;
  nn::Var x = tape.input(logits);
  nn::Var ce = nn::scale(nn::sum(nn::mul(nn::log_softmax_rows(nn::slice_cols(x, 0, 3)), tape.constant(one_hot))),
                         -1.0 / b);
  nn::Var sq = nn::scale(nn::sum(nn::square(nn::slice_cols(x, 3, 1) - tape.constant(agg))), 1.0 / b);
  tape.backward(ce + sq);

  const auto f = [&](const Matrix& z) {
    double total = 0.0;
    for (Index i = 0; i < b; ++i) {
      const Eigen::Vector3d e = z.row(i).head<3>().transpose().array().exp();
      total += semantic_loss(e / e.sum(), z(i, 3), one_hot.row(i).transpose(), agg(i, 0));
    }
    return total / b;
  };
  return oracle::max_gradcheck_error(f, logits, x.grad(), count, rng);
}

// Mean smooth-L1 through the tape against the closed-form reconstruction loss.
// Residuals straddle the |d| = 1 switch but stay away from it.
inline double smooth_l1(std::mt19937_64& rng, int count) {
  Matrix pred = gaussian(10, 4, rng, 1.5);
  const Matrix target = gaussian(10, 4, rng, 1.5);
  for (Index i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    if (std::abs(std::abs(d) - 1.0) < 1e-3) pred.data()[i] += 0.01;
  }
  nn::Tape tape;
  nn::Var x = tape.input(pred);
  tape.backward(nn::smooth_l1_mean(x, tape.constant(target)));
  return oracle::max_gradcheck_error([&](const Matrix& p) { return reconstruction_loss(p, target); }, pred, x.grad(),
                                     count, rng);
}

// Prediction loss (smooth-L1 of the world-frame future) with respect to the
// target history coordinates.
inline double prediction(const PredictorModel& model, const Scenario& s, std::mt19937_64& rng, int count) {
  const std::vector<const Scenario*> batch{&s};
  const Matrix truth = s.target_future.xy();
  const Matrix history = s.target_history.xy();
  const auto loss = [&](nn::Tape& tape, nn::Var h) {
    return nn::smooth_l1_mean(model.forward_world(tape, h, batch), tape.constant(truth));
  };
  nn::Tape tape;
  nn::Var h = tape.input(history);
  tape.backward(loss(tape, h));
  const auto f = [&](const Matrix& x) {
    nn::Tape t;
    return loss(t, t.constant(x)).scalar();
  };
  return oracle::max_gradcheck_error(f, history, h.grad(), count, rng);
}

}  // namespace trajad::gradcheck
