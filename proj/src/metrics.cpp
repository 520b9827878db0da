#include "trajad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "trajad/errors.hpp"

namespace trajad {

namespace {

void check(const ScoredSet& s) {
  if (s.scores.size() != s.labels.size()) throw ShapeError("metrics: scores and labels differ in length");
  for (double v : s.scores) {
    if (!std::isfinite(v)) throw DataError("metrics: non-finite score");
  }
}

// Cumulative (tp, fp) after each group of tied scores, in descending order.
struct Group {
  std::size_t tp = 0, fp = 0;
};

std::vector<Group> descending_groups(const ScoredSet& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<Group> out;
  Group acc;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (s.labels[order[k]] == 1 ? acc.tp : acc.fp) += 1;
    if (k + 1 == order.size() || s.scores[order[k + 1]] != s.scores[order[k]]) out.push_back(acc);
  }
  return out;
}

}  // namespace

std::size_t ScoredSet::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

double roc_auc(const ScoredSet& s) {
  check(s);
  const double p = static_cast<double>(s.positives()), n = static_cast<double>(s.negatives());
  if (p == 0 || n == 0) throw DataError("roc_auc: both classes are required");
  // Walking down the thresholds, each group of anomalies outranks every normal below it.
  double wins = 0.0;
  Group prev;
  for (const Group& g : descending_groups(s)) {
    const double dtp = static_cast<double>(g.tp - prev.tp), dfp = static_cast<double>(g.fp - prev.fp);
    wins += dtp * (n - static_cast<double>(g.fp)) + 0.5 * dtp * dfp;
    prev = g;
  }
  return wins / (p * n);
}

double pr_auc(const ScoredSet& s) {
  check(s);
  const double p = static_cast<double>(s.positives());
  if (p == 0) throw DataError("pr_auc: no anomalies");
  double area = 0.0, prev_recall = 0.0;
  for (const Group& g : descending_groups(s)) {
    const double recall = static_cast<double>(g.tp) / p;
    const double precision = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double f1_at_recall(const ScoredSet& s, double target_recall) {
  check(s);
  const double p = static_cast<double>(s.positives());
  if (p == 0) throw DataError("f1_at_recall: no anomalies");
  for (const Group& g : descending_groups(s)) {
    const double recall = static_cast<double>(g.tp) / p;
    if (recall >= target_recall) {
      const double precision = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
      return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
  }
  throw DataError("f1_at_recall: recall " + std::to_string(target_recall) + " unreachable");
}

std::vector<std::pair<double, double>> roc_points(const ScoredSet& s) {
  check(s);
  const double p = static_cast<double>(s.positives()), n = static_cast<double>(s.negatives());
  if (p == 0 || n == 0) throw DataError("roc_points: both classes are required");
  std::vector<std::pair<double, double>> out{{0.0, 0.0}};
  for (const Group& g : descending_groups(s)) out.emplace_back(static_cast<double>(g.fp) / n, static_cast<double>(g.tp) / p);
  return out;
}

}  // namespace trajad
