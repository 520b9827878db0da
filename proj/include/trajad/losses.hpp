#pragma once

#include <cmath>

#include <Eigen/Core>

#include "trajad/errors.hpp"
#include "trajad/scenario.hpp"

namespace trajad {

// 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
template <typename Scalar>
Scalar smooth_l1(Scalar d) {
  const Scalar a = std::abs(d);
  return a < Scalar(1) ? Scalar(0.5) * a * a : a - Scalar(0.5);
}

// Mean smooth-L1 over every coordinate of two equally shaped arrays.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar reconstruction_loss(const Eigen::MatrixBase<DerivedA>& y,
                                              const Eigen::MatrixBase<DerivedB>& y_hat) {
  using Scalar = typename DerivedA::Scalar;
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw ShapeError("reconstruction_loss: shapes differ");
  }
  return (y - y_hat).unaryExpr([](Scalar d) { return smooth_l1(d); }).mean();
}

// Waypoint coordinates only; timestamps are ignored.
double reconstruction_loss(const Trajectory& y, const Trajectory& y_hat);

// -log softmax of the positive similarity against M negatives. Encodings are
// rows; throws ConfigError for tau <= 0.
double nce_pair_loss(const Eigen::Ref<const Vector>& sn_i, const Eigen::Ref<const Vector>& sn_j,
                     const Matrix& anomalies, double tau);

// Average of nce_pair_loss over the N(N-1) ordered normal pairs.
double batch_loss(const Matrix& normals, const Matrix& anomalies, double tau);

struct BatchLossGrad {
  double loss = 0.0;
  Matrix d_normals;    // N x d
  Matrix d_anomalies;  // M x d
};
BatchLossGrad batch_loss_with_grad(const Matrix& normals, const Matrix& anomalies, double tau);

// Cross-entropy over the intention probabilities plus squared error on the
// aggressiveness code. Throws DataError unless g_intent is one-hot.
double semantic_loss(const Eigen::Vector3d& z_intent, double z_agg, const Eigen::Vector3d& g_intent, double g_agg);

}  // namespace trajad
