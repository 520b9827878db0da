#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "trajad/metrics.hpp"
#include "trajad/types.hpp"

namespace trajad::oracle {

// P(score_anomaly > score_normal) + 0.5 P(equal), over every pair.
inline double roc_auc_pairs(const ScoredSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct SweepPoint {
  double precision, recall;
};

// Precision and recall of "score >= t" at every distinct score, descending.
inline std::vector<SweepPoint> threshold_sweep(const ScoredSet& s) {
  std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());
  double pos = 0.0;
  for (int l : s.labels) pos += l;
  std::vector<SweepPoint> out;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i] >= t) (s.labels[i] ? tp : fp) += 1.0;
    }
    out.push_back({tp / (tp + fp), tp / pos});
  }
  return out;
}

inline double pr_auc_sweep(const ScoredSet& s) {
  double area = 0.0, prev_recall = 0.0;
  for (const SweepPoint& p : threshold_sweep(s)) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

inline double f1_sweep(const ScoredSet& s, double target) {
  for (const SweepPoint& p : threshold_sweep(s)) {
    if (p.recall >= target) {
      return p.precision + p.recall > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    }
  }
  return 0.0;
}

// Random set of at most max_size items with both classes and, when `ties`,
// scores drawn from a small grid.
inline ScoredSet random_set(std::mt19937_64& rng, std::size_t max_size, bool ties) {
  std::uniform_int_distribution<std::size_t> size(10, max_size);
  const std::size_t n = size(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 7);
  ScoredSet s;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i < 5 ? 1 : (i < 10 ? 0 : (u(rng) < 0.3 ? 1 : 0));
    const double shift = label ? 0.3 : 0.0;
    s.labels.push_back(label);
    s.scores.push_back(ties ? grid(rng) / 7.0 + (label && grid(rng) > 4 ? 1.0 / 7.0 : 0.0) : u(rng) + shift);
  }
  return s;
}

// Largest relative error between an analytic gradient and central
// differences of f at `count` random coordinates of x.
inline double max_gradcheck_error(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                  const Matrix& analytic, int count, std::mt19937_64& rng, double h = 1e-5) {
  std::uniform_int_distribution<Index> pick(0, x.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    const Index i = pick(rng);
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double numeric = (f(xp) - f(xm)) / (2 * h);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace trajad::oracle
