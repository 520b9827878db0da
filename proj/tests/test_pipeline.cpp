#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "trajad/errors.hpp"
#include "trajad/pipeline.hpp"

using namespace trajad;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("trajad_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny(const fs::path& out) {
  RunConfig c = RunConfig::from_json(nlohmann::json::parse(R"({
    "seed": 4,
    "data": {"count": 160},
    "predictor": {"epochs": 2},
    "attack": {"anomalies_per_pattern": 30, "random": {"steps": 10}, "directional": {"steps": 10}},
    "detectors": {"sup_cl": {"epochs": 2}},
    "evaluation": {"methods": ["sup-cl", "nn-svm"]}
  })"));
  c.out = out;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TRAJAD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfig, JsonRoundTripAndHash) {
  const RunConfig a;
  const RunConfig b = RunConfig::from_json(a.to_json());
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  RunConfig c = a;
  c.out = "/somewhere/else";
  EXPECT_EQ(c.hash(), a.hash());
  c.seed = 99;
  EXPECT_NE(c.hash(), a.hash());
}

TEST(RunConfig, PartialConfigKeepsDefaults) {
  const RunConfig c = RunConfig::from_json(nlohmann::json::parse(R"({"detectors": {"aae": {"epochs": 7}}})"));
  EXPECT_EQ(c.detectors.aae.epochs, 7);
  EXPECT_EQ(c.normal_count, RunConfig{}.normal_count);
  EXPECT_EQ(c.methods.size(), 7u);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::from_json(nlohmann::json::parse(R"({"sed": 1})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json::parse(R"({"predictor": {"epochs": "many"}})")), ConfigError);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json::parse(R"({"attack": {"random": {"epsilon": -1}}})")),
               ConfigError);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json::parse(R"({"evaluation": {"methods": ["svm"]}})")), ConfigError);
}

TEST(RunConfig, InvalidLayoutListsValidOnes) {
  try {
    RunConfig::from_json(nlohmann::json::parse(R"({"data": {"layouts": {"roundabout": 1}}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("straight"), std::string::npos);
  }
}

TEST(Pipeline, DownstreamStagesNameMissingUpstream) {
  std::ostringstream log;
  Pipeline p(tiny(fresh_dir("deps")), log);
  try {
    p.train_predictor();
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.stage(), kStageGenData);
  }
  try {
    p.plot();
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_EQ(e.stage(), kStageEvaluate);
  }
}

TEST(Pipeline, GenDataRefusesNonEmptyDirWithoutForce) {
  const fs::path out = fresh_dir("force");
  std::ostringstream log;
  Pipeline p(tiny(out), log);
  p.gen_data(false);
  const std::string first = slurp(out / "data" / "normals.jsonl");
  EXPECT_THROW(p.gen_data(false), ConfigError);
  p.gen_data(true);
  EXPECT_EQ(slurp(out / "data" / "normals.jsonl"), first);
  const auto manifest = nlohmann::json::parse(slurp(out / "data" / "manifest.json"));
  EXPECT_EQ(manifest.at("count"), 160);
  EXPECT_EQ(manifest.at("config_hash"), p.config_hash());
}

TEST(Pipeline, StagesEndToEndWithStaleDetection) {
  const fs::path out = fresh_dir("e2e");
  std::ostringstream log;
  Pipeline p(tiny(out), log);
  p.gen_data(false);
  p.train_predictor();
  p.gen_anomalies();
  EXPECT_THROW(p.evaluate(), DependencyError);
  p.train_detector(Method::kSupCl);
  p.train_detector(Method::kNnSvm, AttackPattern::kRandom);
  EXPECT_THROW(p.evaluate(), DependencyError);  // nn-svm-directional still missing
  p.train_detector(Method::kNnSvm, AttackPattern::kDirectional);
  const auto reports = p.evaluate();
  ASSERT_EQ(reports.size(), 8u);
  EXPECT_EQ(reports[0].method, "sup-cl");
  EXPECT_NE(log.str().find("sup-cl"), std::string::npos);
  p.plot();
  EXPECT_TRUE(fs::exists(out / "plots" / "roc_same_random.svg"));
  EXPECT_TRUE(fs::exists(out / "plots" / "roc_cross_directional.svg"));
  const std::string report = slurp(out / "eval" / "report.csv");
  EXPECT_EQ(report.rfind("# config_hash=" + p.config_hash(), 0), 0u);
  const std::string svg = slurp(out / "plots" / "roc_same_random.svg");
  EXPECT_NE(svg.find("config_hash=" + p.config_hash()), std::string::npos);

  // A different predictor config invalidates every downstream artifact.
  RunConfig changed = tiny(out);
  changed.predictor.epochs = 3;
  std::ostringstream log2;
  Pipeline q(changed, log2);
  EXPECT_THROW(q.gen_anomalies(), DependencyError);
}

TEST(Pipeline, RunAllSkipsCurrentStagesAndReproduces) {
  const fs::path a = fresh_dir("ra"), b = fresh_dir("rb");
  std::ostringstream la, lb, again;
  Pipeline(tiny(a), la).run_all(false);
  Pipeline(tiny(b), lb).run_all(false);
  EXPECT_EQ(slurp(a / "eval" / "report.csv"), slurp(b / "eval" / "report.csv"));
  const std::string before = slurp(a / "eval" / "report.csv");
  Pipeline(tiny(a), again).run_all(false);
  EXPECT_NE(again.str().find("[train-predictor] up to date, skipped"), std::string::npos);
  EXPECT_EQ(slurp(a / "eval" / "report.csv"), before);
  const RunConfig persisted = RunConfig::load(a / "run_config.json");
  EXPECT_EQ(persisted.hash(), tiny(a).hash());
}

TEST(Cli, ExitCodes) {
  const fs::path out = fresh_dir("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("train-detector --method ts2vec --out " + out.string()), 2);
  EXPECT_EQ(run_cli("plot --out " + out.string()), 3);
  EXPECT_EQ(run_cli("train-predictor --out " + out.string()), 3);
  const fs::path bad = out.string() + "_bad.json";
  std::ofstream(bad) << R"({"data": {"layouts": {"roundabout": 1}}})";
  EXPECT_EQ(run_cli("gen-data --config " + bad.string() + " --out " + out.string()), 2);
  const fs::path small = out.string() + "_small.json";
  std::ofstream(small) << R"({"data": {"count": 20}})";
  EXPECT_EQ(run_cli("gen-data --config " + small.string() + " --out " + out.string()), 0);
  EXPECT_EQ(run_cli("gen-data --config " + small.string() + " --out " + out.string()), 2);
  EXPECT_EQ(run_cli("gen-data --force --seed 5 --config " + small.string() + " --out " + out.string()), 0);
}
