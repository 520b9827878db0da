#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajad/bench.hpp"
#include "trajad/generator.hpp"
#include "trajad/predictor.hpp"

namespace trajad {

// Everything a run needs. Sub-seeds for data, predictor, attacks and
// detectors are derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 1;
  int normal_count = 2000;
  GeneratorConfig generator;
  PredictorHyperparams predictor;
  AttackConfig random_attack{AttackPattern::kRandom};
  AttackConfig directional_attack{AttackPattern::kDirectional};
  int anomalies_per_pattern = 500;
  BenchConfig detectors;
  std::vector<Method> methods = all_methods();
  std::vector<AttackPattern> patterns = {AttackPattern::kRandom, AttackPattern::kDirectional};
  std::filesystem::path out = "runs/default";

  // Missing keys keep their defaults; unknown keys and bad values raise
  // ConfigError naming the key.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // 16 hex digits over the canonical dump, excluding `out`.
  std::string hash() const;

  const AttackConfig& attack(AttackPattern p) const;
};

// Stage names as used on the command line and in dependency errors.
inline constexpr const char* kStageGenData = "gen-data";
inline constexpr const char* kStageTrainPredictor = "train-predictor";
inline constexpr const char* kStageGenAnomalies = "gen-anomalies";
inline constexpr const char* kStageTrainDetector = "train-detector";
inline constexpr const char* kStageEvaluate = "evaluate";
inline constexpr const char* kStagePlot = "plot";

// Runs the stages against `config.out`. Every stage writes a manifest.json
// recording the config hash and a stage key; downstream stages refuse with a
// DependencyError when an upstream manifest is missing or its key no longer
// matches the config.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::ostream& log);
  ~Pipeline();

  const RunConfig& config() const { return config_; }
  const std::string& config_hash() const { return hash_; }
  std::filesystem::path dir(const char* stage) const;

  // Refuses a non-empty data directory unless `force`.
  void gen_data(bool force);
  void train_predictor();
  void gen_anomalies();
  // Supervised methods without a pattern train on every configured pattern.
  void train_detector(Method method, std::optional<AttackPattern> pattern = std::nullopt);
  std::vector<MetricsReport> evaluate();
  void plot();
  // Skips every stage whose manifest is current.
  void run_all(bool force);

  static std::string detector_name(Method method, std::optional<AttackPattern> pattern);

 private:
  std::string data_key() const;
  std::string predictor_key() const;
  std::string anomalies_key() const;
  std::string detector_key(Method method, std::optional<AttackPattern> pattern) const;
  std::string evaluate_key() const;
  std::string plot_key() const;

  bool current(const std::filesystem::path& manifest, const std::string& key) const;
  void require(const char* stage, const std::filesystem::path& manifest, const std::string& key) const;
  void write_manifest(const std::filesystem::path& path, const char* stage, const std::string& key,
                      nlohmann::json extra) const;

  std::vector<Scenario> load_normals() const;
  PredictorModel load_predictor() const;
  std::map<AttackPattern, std::vector<Scenario>> load_anomalies() const;

  // Loaded upstream artifacts plus extracted features, reused across stages
  // within one process and dropped whenever an upstream stage reruns.
  struct Loaded;
  const Loaded& loaded();
  std::vector<std::pair<Method, std::optional<AttackPattern>>> detector_cells() const;

  RunConfig config_;
  std::string hash_;
  std::ostream& log_;
  std::unique_ptr<Loaded> loaded_;
};

}  // namespace trajad
