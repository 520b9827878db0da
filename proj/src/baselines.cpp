#include "trajad/baselines.hpp"

#include "trajad/errors.hpp"
#include "trajad/predictor.hpp"
#include "trajad/semantics.hpp"

namespace trajad {

Vector acceleration_features(const Scenario& s) {
  const std::vector<double> a = acceleration_series(s.target_history);
  return Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size()));
}

Vector trajectory_features(const Scenario& s) {
  const Matrix h = PredictorModel::local_history(s);
  Vector out(2 * h.rows());
  for (Index i = 0; i < h.rows(); ++i) out.segment<2>(2 * i) = h.row(i).transpose();
  return out;
}

namespace {

template <typename Fn>
Matrix stack(std::span<const Scenario* const> scenarios, Fn fn) {
  if (scenarios.empty()) return Matrix();
  const Vector first = fn(*scenarios[0]);
  Matrix out(static_cast<Index>(scenarios.size()), first.size());
  out.row(0) = first.transpose();
  for (std::size_t i = 1; i < scenarios.size(); ++i) {
    const Vector v = fn(*scenarios[i]);
    if (v.size() != first.size()) throw ShapeError("baseline features: inconsistent history lengths");
    out.row(static_cast<Index>(i)) = v.transpose();
  }
  return out;
}

std::vector<int> labels_of(std::span<const Scenario* const> scenarios) {
  std::vector<int> out;
  for (const Scenario* s : scenarios) out.push_back(binary_label(*s));
  return out;
}

}  // namespace

Matrix acceleration_features(std::span<const Scenario* const> scenarios) {
  return stack(scenarios, [](const Scenario& s) { return acceleration_features(s); });
}

Matrix trajectory_features(std::span<const Scenario* const> scenarios) {
  return stack(scenarios, [](const Scenario& s) { return trajectory_features(s); });
}

ScoredSet naive_svm_baseline(std::span<const Scenario* const> train, std::span<const Scenario* const> test,
                             const SvmConfig& cfg) {
  const Svm svm = Svm::fit_classifier(acceleration_features(train), labels_of(train), cfg);
  const Vector d = svm.decisions(acceleration_features(test));
  return {std::vector<double>(d.data(), d.data() + d.size()), labels_of(test)};
}

ScoredSet oc_svm_baseline(std::span<const Scenario* const> train_normals, std::span<const Scenario* const> test,
                          SvmConfig cfg) {
  for (const Scenario* s : train_normals) {
    if (binary_label(*s) != 0) throw ContractViolation("oc-svm training received anomaly '" + s->scenario_id + "'");
  }
  const Svm svm = Svm::fit_one_class(trajectory_features(train_normals), cfg);
  const Vector d = -svm.decisions(trajectory_features(test));
  return {std::vector<double>(d.data(), d.data() + d.size()), labels_of(test)};
}

}  // namespace trajad
