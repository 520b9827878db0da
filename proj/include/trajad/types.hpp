#pragma once

#include <Eigen/Core>

namespace trajad {

using Index = Eigen::Index;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;
using Vec2 = Eigen::Vector2d;

inline constexpr int kHistoryLength = 20;
inline constexpr int kFutureLength = 30;
inline constexpr double kTimeStep = 0.1;
inline constexpr double kMaxStepDisplacement = 5.0;
inline constexpr int kMaxNeighbors = 8;
inline constexpr int kFeatureDim = 128;
inline constexpr int kEncodedDim = 32;
inline constexpr int kLatentDim = 10;

}  // namespace trajad
