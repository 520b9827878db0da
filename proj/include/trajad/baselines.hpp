#pragma once

#include <span>

#include "trajad/metrics.hpp"
#include "trajad/scenario.hpp"
#include "trajad/svm.hpp"

namespace trajad {

// 18 acceleration magnitudes of the target history.
Vector acceleration_features(const Scenario& s);
// 40 target-centric history coordinates (x0, y0, x1, ...).
Vector trajectory_features(const Scenario& s);

Matrix acceleration_features(std::span<const Scenario* const> scenarios);
Matrix trajectory_features(std::span<const Scenario* const> scenarios);

inline int binary_label(const Scenario& s) { return s.anomaly_label == AnomalyLabel::kNormal ? 0 : 1; }

// Supervised RBF SVM on acceleration series; scores are decision values.
ScoredSet naive_svm_baseline(std::span<const Scenario* const> train, std::span<const Scenario* const> test,
                             const SvmConfig& cfg = {});

// One-class SVM (nu = 0.1, gamma = 1/dim) on history coordinates; scores are
// negated decisions. Throws ContractViolation if train holds anomalies.
ScoredSet oc_svm_baseline(std::span<const Scenario* const> train_normals, std::span<const Scenario* const> test,
                          SvmConfig cfg = {});

}  // namespace trajad
