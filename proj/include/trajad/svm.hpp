#pragma once

#include <vector>

#include <json.hpp>

#include "trajad/types.hpp"

namespace trajad {

enum class SvmKind { kClassifier, kOneClass };

struct SvmConfig {
  double c = 1.0;       // C-SVC box constraint
  double nu = 0.1;      // one-class outlier bound
  double gamma = 0.0;   // RBF width; <= 0 selects 1 / (dim * Var(X))
  double tolerance = 1e-3;
  long max_iterations = 10'000'000;
};

// 1 / (dim * variance of every entry of X); 1 / dim for constant X.
double scale_gamma(const Matrix& x);

// RBF-kernel SVM trained with second-order SMO on a precomputed kernel.
class Svm {
 public:
  // labels in {0, 1}; positive decisions favour label 1. Throws DataError
  // unless both classes are present.
  static Svm fit_classifier(const Matrix& x, const std::vector<int>& labels, const SvmConfig& cfg = {});
  // Positive decisions are inliers.
  static Svm fit_one_class(const Matrix& x, const SvmConfig& cfg = {});

  double decision(const Eigen::Ref<const Vector>& x) const;
  Vector decisions(const Matrix& x) const;  // one value per row

  SvmKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  double rho() const { return rho_; }
  Index support_count() const { return support_.rows(); }
  Index dim() const { return support_.cols(); }

  nlohmann::json to_json() const;
  static Svm from_json(const nlohmann::json& j);

 private:
  SvmKind kind_ = SvmKind::kClassifier;
  double gamma_ = 1.0;
  double rho_ = 0.0;
  Matrix support_;  // rows are support vectors
  Vector coef_;     // y_i * alpha_i
};

// Full RBF kernel matrix between the rows of a and b.
Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma);

}  // namespace trajad
