#include "trajad/losses.hpp"

#include <string>

namespace trajad {

namespace {

void check_tau(double tau) {
  if (!(tau > 0) || !std::isfinite(tau)) throw ConfigError("temperature", "must be positive");
}

// Pair loss and softmax probabilities (positive first).
double pair_terms(const Eigen::Ref<const Vector>& sn_i, const Eigen::Ref<const Vector>& sn_j, const Matrix& anomalies,
                  double tau, Vector* probs) {
  Vector logits(anomalies.rows() + 1);
  logits(0) = sn_i.dot(sn_j) / tau;
  logits.tail(anomalies.rows()) = anomalies * sn_i / tau;
  const double top = logits.maxCoeff();
  const Vector e = (logits.array() - top).exp();
  const double z = e.sum();
  if (probs) *probs = e / z;
  return -(logits(0) - top - std::log(z));
}

}  // namespace

double reconstruction_loss(const Trajectory& y, const Trajectory& y_hat) {
  if (y.size() != y_hat.size()) {
    throw ShapeError("reconstruction_loss: " + std::to_string(y.size()) + " vs " + std::to_string(y_hat.size()) +
                     " waypoints");
  }
  return reconstruction_loss(y.xy(), y_hat.xy());
}

double nce_pair_loss(const Eigen::Ref<const Vector>& sn_i, const Eigen::Ref<const Vector>& sn_j,
                     const Matrix& anomalies, double tau) {
  check_tau(tau);
  if (anomalies.rows() < 1) throw ConfigError("m_anomalies", "at least one negative is required");
  if (sn_i.size() != sn_j.size() || anomalies.cols() != sn_i.size()) throw ShapeError("nce_pair_loss: width mismatch");
  return pair_terms(sn_i, sn_j, anomalies, tau, nullptr);
}

double batch_loss(const Matrix& normals, const Matrix& anomalies, double tau) {
  return batch_loss_with_grad(normals, anomalies, tau).loss;
}

BatchLossGrad batch_loss_with_grad(const Matrix& normals, const Matrix& anomalies, double tau) {
  check_tau(tau);
  const Index n = normals.rows();
  if (n < 2) throw ConfigError("n_normals", "at least two normals are required");
  if (anomalies.rows() < 1) throw ConfigError("m_anomalies", "at least one anomaly is required");
  if (anomalies.cols() != normals.cols()) throw ShapeError("batch_loss: width mismatch");
  BatchLossGrad out;
  out.d_normals = Matrix::Zero(n, normals.cols());
  out.d_anomalies = Matrix::Zero(anomalies.rows(), anomalies.cols());
  const double w = 1.0 / static_cast<double>(n * (n - 1));
  Vector p;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      out.loss += w * pair_terms(normals.row(i).transpose(), normals.row(j).transpose(), anomalies, tau, &p);
      const double c = w / tau;
      out.d_normals.row(i) += c * ((p(0) - 1.0) * normals.row(j) + p.tail(anomalies.rows()).transpose() * anomalies);
      out.d_normals.row(j) += c * (p(0) - 1.0) * normals.row(i);
      out.d_anomalies += c * p.tail(anomalies.rows()) * normals.row(i);
    }
  }
  return out;
}

double semantic_loss(const Eigen::Vector3d& z_intent, double z_agg, const Eigen::Vector3d& g_intent, double g_agg) {
  const bool one_hot = (g_intent.array() == 0.0 || g_intent.array() == 1.0).all() && g_intent.sum() == 1.0;
  if (!one_hot) throw DataError("semantic_loss: intention label must be one-hot");
  const double ce = -g_intent.dot(z_intent.cwiseMax(1e-300).array().log().matrix());
  return ce + (g_agg - z_agg) * (g_agg - z_agg);
}

}  // namespace trajad
