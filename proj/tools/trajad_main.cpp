// trajad: command-line driver for the anomaly-detection pipeline.
//
//   trajad run-all --config run.json --out runs/a
//   trajad train-detector --method sup-cl --pattern random --config run.json
//
// Exit codes: 0 success, 2 usage/config error, 3 missing upstream artifact,
// 4 data or training error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "trajad/errors.hpp"
#include "trajad/pipeline.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitDependency = 3;
constexpr int kExitData = 4;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::string pattern;
  bool force = false;
};

trajad::RunConfig resolve(const Options& o) {
  trajad::RunConfig cfg = o.config.empty() ? trajad::RunConfig{} : trajad::RunConfig::load(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory anomaly detection pipeline"};
  app.require_subcommand(1);
  Options opt;

  const auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "Master seed (overrides the config)");
  };

  CLI::App* gen_data = app.add_subcommand("gen-data", "Generate normal scenarios");
  common(gen_data);
  gen_data->add_flag("--force", opt.force, "Overwrite a non-empty data directory");
  CLI::App* train_pred = app.add_subcommand("train-predictor", "Train and freeze the predictor");
  common(train_pred);
  CLI::App* gen_anom = app.add_subcommand("gen-anomalies", "Craft PGD anomalies for each pattern");
  common(gen_anom);
  CLI::App* train_det = app.add_subcommand("train-detector", "Train one detector");
  common(train_det);
  train_det->add_option("--method", opt.method, "Detector method")
      ->required()
      ->check(CLI::IsMember({"sup-cl", "semantics-svm", "nn-svm", "naive-latent-svm", "semantic-recon", "naive-svm",
                             "oc-svm"}));
  train_det->add_option("--pattern", opt.pattern, "Training anomaly pattern (supervised methods)")
      ->check(CLI::IsMember({"random", "directional"}));
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score every trained detector and write the report");
  common(evaluate);
  CLI::App* plot = app.add_subcommand("plot", "Render ROC curves from the evaluation");
  common(plot);
  CLI::App* run_all = app.add_subcommand("run-all", "Run every stage, skipping up-to-date ones");
  common(run_all);
  run_all->add_flag("--force", opt.force, "Overwrite a non-empty data directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    trajad::Pipeline pipeline(resolve(opt), std::cout);
    if (gen_data->parsed()) {
      pipeline.gen_data(opt.force);
    } else if (train_pred->parsed()) {
      pipeline.train_predictor();
    } else if (gen_anom->parsed()) {
      pipeline.gen_anomalies();
    } else if (train_det->parsed()) {
      std::optional<trajad::AttackPattern> pattern;
      if (!opt.pattern.empty()) pattern = trajad::attack_pattern_from_string(opt.pattern);
      pipeline.train_detector(trajad::method_from_string(opt.method), pattern);
    } else if (evaluate->parsed()) {
      pipeline.evaluate();
    } else if (plot->parsed()) {
      pipeline.plot();
    } else if (run_all->parsed()) {
      pipeline.run_all(opt.force);
    }
  } catch (const trajad::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const trajad::DependencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
