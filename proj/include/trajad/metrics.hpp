#pragma once

#include <utility>
#include <vector>

namespace trajad {

// Scores with binary labels (1 = anomaly); higher scores are more anomalous.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const;
  std::size_t negatives() const { return size() - positives(); }
};

// Mann-Whitney statistic, ties counted as one half. DataError on one class.
double roc_auc(const ScoredSet& s);
// Step-wise sum of (R_k - R_{k-1}) * P_k over descending distinct thresholds.
double pr_auc(const ScoredSet& s);
// F1 at the highest threshold whose recall reaches target_recall.
double f1_at_recall(const ScoredSet& s, double target_recall = 0.8);

// (fpr, tpr) at every distinct threshold, from (0, 0) to (1, 1).
std::vector<std::pair<double, double>> roc_points(const ScoredSet& s);

}  // namespace trajad
