#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trajad/aae.hpp"
#include "trajad/attack.hpp"
#include "trajad/contrastive.hpp"
#include "trajad/metrics.hpp"
#include "trajad/svm.hpp"

namespace trajad {

enum class Split { kTrain, kValidation, kTest };

// 70/10/20 by hash of the clean source id, so anomalies follow their source.
Split split_of(std::string_view source_id);
std::string_view to_string(Split split);

enum class Method { kSupCl, kSemanticsSvm, kNnSvm, kNaiveLatentSvm, kSemanticRecon, kNaiveSvm, kOcSvm };

std::string_view to_string(Method method);
// Throws ConfigError listing the valid names.
Method method_from_string(std::string_view name);
bool is_supervised(Method method);
const std::vector<Method>& all_methods();

struct BenchConfig {
  CLConfig cl;
  AAEConfig aae;
  SvmConfig svm;                 // supervised heads: C = 1, gamma = scale
  SvmConfig oc_svm{1.0, 0.1};    // nu = 0.1, gamma = 1/dim
  std::uint64_t seed = 1;
};

// Detector inputs precomputed once per scenario.
struct EvalSet {
  std::vector<const Scenario*> scenarios;
  Matrix features;  // N x 128 from the frozen extractor
  std::vector<Points2<double>> histories;
  std::vector<int> labels;

  static EvalSet build(const PredictorModel& extractor, std::vector<const Scenario*> scenarios);
  std::size_t size() const { return scenarios.size(); }
  std::size_t anomalies() const;
};

EvalSet concat(const EvalSet& a, const EvalSet& b);

struct BenchData {
  EvalSet train_normals, val_normals, test_normals;
  std::map<AttackPattern, EvalSet> train_anomalies, test_anomalies;

  // Partitions the scenarios by split; missing patterns stay absent.
  static BenchData build(const PredictorModel& extractor, std::span<const Scenario> normals,
                         const std::map<AttackPattern, std::span<const Scenario>>& anomalies);
  // ConfigError naming the cell when the pattern has no anomalies.
  const EvalSet& train_anomalies_for(AttackPattern p, std::string_view cell) const;
  const EvalSet& test_anomalies_for(AttackPattern p, std::string_view cell) const;
};

struct DetectorLog {
  ClTrainingLog cl;
  AAETrainingLog aae;
};

// A trained method; supervised methods carry their training pattern.
struct TrainedDetector {
  Method method = Method::kSupCl;
  std::optional<AttackPattern> train_pattern;
  nlohmann::json state;
};

TrainedDetector train_detector(Method method, std::optional<AttackPattern> train_pattern, const BenchData& data,
                               const BenchConfig& cfg, DetectorLog* log = nullptr);
// Higher = more anomalous.
Vector score_detector(const TrainedDetector& detector, const EvalSet& set);

struct MetricsReport {
  std::string method;
  std::string train_pattern;  // "none" for unsupervised methods
  std::string test_pattern;
  double f1_at_recall_0_8 = 0.0;
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
  std::uint64_t seed = 0;
};

struct CellResult {
  MetricsReport report;
  std::vector<std::pair<double, double>> roc;
  ScoredSet scored;
  std::vector<std::string> scenario_ids;  // aligned with scored
};

MetricsReport make_report(const TrainedDetector& detector, AttackPattern test_pattern, const ScoredSet& scored,
                          std::uint64_t seed);

// Test normals plus test anomalies of one pattern.
CellResult evaluate_cell(const TrainedDetector& detector, const BenchData& data, AttackPattern test_pattern,
                         std::uint64_t seed);

// Every requested method on all four (train x test) cells; unsupervised
// methods once per test pattern.
std::vector<CellResult> run_matrix(const BenchData& data, const BenchConfig& cfg, std::span<const Method> methods);

std::string report_csv(std::span<const MetricsReport> reports, std::string_view config_hash);
std::vector<MetricsReport> parse_report_csv(const std::string& text);
std::string roc_csv(const std::vector<std::pair<double, double>>& points, std::string_view config_hash);
std::string format_report_table(std::span<const MetricsReport> reports);

}  // namespace trajad
