#include "trajad/svm.hpp"

#include <cmath>
#include <limits>

#include "trajad/errors.hpp"

namespace trajad {

namespace {

constexpr double kTau = 1e-12;

// Dual: min 0.5 a^T Q a + p^T a, 0 <= a_i <= bound, y^T a const; Q_ij = y_i y_j K_ij.
struct Solution {
  Vector alpha;
  double rho = 0.0;
};

Solution solve(const Matrix& k, const Vector& y, const Vector& p, Vector alpha, double bound, double eps,
               long max_iter) {
  const Index n = k.rows();
  auto q = [&](Index i, Index j) { return y(i) * y(j) * k(i, j); };
  auto upper = [&](Index i) { return alpha(i) >= bound; };
  auto lower = [&](Index i) { return alpha(i) <= 0.0; };

  Vector g = p;
  for (Index j = 0; j < n; ++j) {
    if (alpha(j) != 0.0) {
      for (Index i = 0; i < n; ++i) g(i) += alpha(j) * q(i, j);
    }
  }

  for (long iter = 0; iter < max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity(), gmax2 = gmax;
    Index i = -1, jbest = -1;
    for (Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -g(t) >= gmax) gmax = -g(t), i = t;
      } else if (!lower(t) && g(t) >= gmax) {
        gmax = g(t), i = t;
      }
    }
    if (i < 0) break;
    double obj_min = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      double grad_diff, quad;
      if (y(j) > 0) {
        if (lower(j)) continue;
        gmax2 = std::max(gmax2, g(j));
        grad_diff = gmax + g(j);
        quad = k(i, i) + k(j, j) - 2.0 * y(i) * q(i, j);
      } else {
        if (upper(j)) continue;
        gmax2 = std::max(gmax2, -g(j));
        grad_diff = gmax - g(j);
        quad = k(i, i) + k(j, j) + 2.0 * y(i) * q(i, j);
      }
      if (grad_diff > 0) {
        const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
        if (obj <= obj_min) obj_min = obj, jbest = j;
      }
    }
    if (gmax + gmax2 < eps || jbest < 0) break;
    const Index j = jbest;
    const double ai = alpha(i), aj = alpha(j);
    if (y(i) != y(j)) {
      double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-g(i) - g(j)) / quad;
      const double diff = ai - aj;
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) alpha(j) = 0, alpha(i) = diff;
      } else if (alpha(i) < 0) {
        alpha(i) = 0, alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > bound) alpha(i) = bound, alpha(j) = bound - diff;
      } else if (alpha(j) > bound) {
        alpha(j) = bound, alpha(i) = bound + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (g(i) - g(j)) / quad;
      const double sum = ai + aj;
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > bound) {
        if (alpha(i) > bound) alpha(i) = bound, alpha(j) = sum - bound;
      } else if (alpha(j) < 0) {
        alpha(j) = 0, alpha(i) = sum;
      }
      if (sum > bound) {
        if (alpha(j) > bound) alpha(j) = bound, alpha(i) = sum - bound;
      } else if (alpha(i) < 0) {
        alpha(i) = 0, alpha(j) = sum;
      }
    }
    const double dai = alpha(i) - ai, daj = alpha(j) - aj;
    for (Index t = 0; t < n; ++t) g(t) += q(t, i) * dai + q(t, j) * daj;
  }

  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  Index nr_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = y(t) * g(t);
    if (upper(t)) {
      if (y(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  return {std::move(alpha), nr_free > 0 ? sum_free / nr_free : 0.5 * (ub + lb)};
}

}  // namespace

double scale_gamma(const Matrix& x) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double d = static_cast<double>(x.cols());
  return var > 0 ? 1.0 / (d * var) : 1.0 / d;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  const Vector na = a.rowwise().squaredNorm(), nb = b.rowwise().squaredNorm();
  Matrix d2 = -2.0 * a * b.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return (-gamma * d2.cwiseMax(0.0)).array().exp().matrix();
}

Svm Svm::fit_classifier(const Matrix& x, const std::vector<int>& labels, const SvmConfig& cfg) {
  if (static_cast<Index>(labels.size()) != x.rows()) throw ShapeError("svm: label count differs from sample count");
  if (!(cfg.c > 0)) throw ConfigError("svm.c", "must be positive");
  Vector y(x.rows());
  Index pos = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    pos += labels[static_cast<std::size_t>(i)] == 1;
  }
  if (pos == 0 || pos == x.rows()) throw DataError("svm: training data must contain both classes");
  Svm m;
  m.kind_ = SvmKind::kClassifier;
  m.gamma_ = cfg.gamma > 0 ? cfg.gamma : scale_gamma(x);
  const Matrix k = rbf_kernel(x, x, m.gamma_);
  Solution sol = solve(k, y, Vector::Constant(x.rows(), -1.0), Vector::Zero(x.rows()), cfg.c, cfg.tolerance,
                       cfg.max_iterations);
  std::vector<Index> sv;
  for (Index i = 0; i < x.rows(); ++i) {
    if (sol.alpha(i) > 0) sv.push_back(i);
  }
  m.support_.resize(static_cast<Index>(sv.size()), x.cols());
  m.coef_.resize(static_cast<Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    m.support_.row(static_cast<Index>(r)) = x.row(sv[r]);
    m.coef_(static_cast<Index>(r)) = y(sv[r]) * sol.alpha(sv[r]);
  }
  m.rho_ = sol.rho;
  return m;
}

Svm Svm::fit_one_class(const Matrix& x, const SvmConfig& cfg) {
  if (!(cfg.nu > 0 && cfg.nu <= 1)) throw ConfigError("svm.nu", "must lie in (0, 1]");
  if (x.rows() < 1) throw DataError("svm: empty training set");
  const Index n = x.rows();
  Svm m;
  m.kind_ = SvmKind::kOneClass;
  m.gamma_ = cfg.gamma > 0 ? cfg.gamma : 1.0 / static_cast<double>(x.cols());
  const Matrix k = rbf_kernel(x, x, m.gamma_);
  // Feasible start with sum(alpha) = nu * n, alpha in [0, 1].
  Vector alpha = Vector::Zero(n);
  const double total = cfg.nu * static_cast<double>(n);
  const Index full = static_cast<Index>(total);
  for (Index i = 0; i < full; ++i) alpha(i) = 1.0;
  if (full < n) alpha(full) = total - static_cast<double>(full);
  Solution sol = solve(k, Vector::Ones(n), Vector::Zero(n), alpha, 1.0, cfg.tolerance, cfg.max_iterations);
  std::vector<Index> sv;
  for (Index i = 0; i < n; ++i) {
    if (sol.alpha(i) > 0) sv.push_back(i);
  }
  m.support_.resize(static_cast<Index>(sv.size()), x.cols());
  m.coef_.resize(static_cast<Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    m.support_.row(static_cast<Index>(r)) = x.row(sv[r]);
    m.coef_(static_cast<Index>(r)) = sol.alpha(sv[r]);
  }
  m.rho_ = sol.rho;
  return m;
}

Vector Svm::decisions(const Matrix& x) const {
  if (x.cols() != support_.cols()) {
    throw ShapeError("svm: expected " + std::to_string(support_.cols()) + " features, got " + std::to_string(x.cols()));
  }
  return rbf_kernel(x, support_, gamma_) * coef_ - Vector::Constant(x.rows(), rho_);
}

double Svm::decision(const Eigen::Ref<const Vector>& x) const {
  return decisions(Matrix(x.transpose()))(0);
}

nlohmann::json Svm::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_ == SvmKind::kClassifier ? "classifier" : "one_class";
  j["gamma"] = gamma_;
  j["rho"] = rho_;
  j["dim"] = support_.cols();
  j["coef"] = std::vector<double>(coef_.data(), coef_.data() + coef_.size());
  std::vector<double> sv(static_cast<std::size_t>(support_.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(sv.data(), support_.rows(),
                                                                                     support_.cols()) = support_;
  j["support"] = sv;
  return j;
}

Svm Svm::from_json(const nlohmann::json& j) {
  Svm m;
  m.kind_ = j.at("kind").get<std::string>() == "one_class" ? SvmKind::kOneClass : SvmKind::kClassifier;
  m.gamma_ = j.at("gamma").get<double>();
  m.rho_ = j.at("rho").get<double>();
  const auto coef = j.at("coef").get<std::vector<double>>();
  const auto sv = j.at("support").get<std::vector<double>>();
  const Index dim = j.at("dim").get<Index>();
  const Index n = static_cast<Index>(coef.size());
  if (static_cast<Index>(sv.size()) != n * dim) throw ShapeError("svm checkpoint: support matrix size mismatch");
  m.coef_ = Eigen::Map<const Vector>(coef.data(), n);
  m.support_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(sv.data(), n, dim);
  return m;
}

}  // namespace trajad
