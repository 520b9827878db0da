// Acceptance run: one PASS/FAIL line per criterion. Criteria 4-9 drive the
// desk-scale pipeline through the command-line tool (twice, for the
// reproducibility check) in a scratch directory.
//
//   trajad_acceptance [--workdir DIR] [--keep]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "gradchecks.hpp"
#include "oracles.hpp"
#include "trajad/aae.hpp"
#include "trajad/dataset_io.hpp"
#include "trajad/errors.hpp"
#include "trajad/pipeline.hpp"

using namespace trajad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %d: %s  %s (%s) [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(TRAJAD_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// roc_auc by (method, train, test) from the desk report.
class Auc {
 public:
  explicit Auc(const std::vector<MetricsReport>& rows) {
    for (const auto& r : rows) auc_[r.method + "|" + r.train_pattern + "|" + r.test_pattern] = r.roc_auc;
  }
  double operator()(const std::string& method, const std::string& train, const std::string& test) const {
    const auto it = auc_.find(method + "|" + train + "|" + test);
    if (it == auc_.end()) throw DataError("report has no row " + method + " " + train + " -> " + test);
    return it->second;
  }

 private:
  std::map<std::string, double> auc_;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "trajad_acceptance";
  bool keep = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--keep") {
      keep = true;
    } else {
      std::cerr << "usage: trajad_acceptance [--workdir DIR] [--keep]\n";
      return 2;
    }
  }
  if (!keep) fs::remove_all(work);
  fs::create_directories(work);

  report(1, "metric oracles on 100 random scored sets (<= 200 items, ties included)", [] {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const ScoredSet s = oracle::random_set(rng, 200, k % 2 == 0);
      worst = std::max({worst, std::abs(roc_auc(s) - oracle::roc_auc_pairs(s)),
                        std::abs(pr_auc(s) - oracle::pr_auc_sweep(s)),
                        std::abs(f1_at_recall(s, 0.8) - oracle::f1_sweep(s, 0.8))});
    }
    return Outcome{worst <= 1e-9, fmt("max deviation %.2e", worst)};
  });

  report(2, "loss closed forms", [] {
    const double nce = batch_loss(Matrix::Ones(6, 4) * 0.5, Matrix::Ones(8, 4) * 0.5, 0.1);
    const double sem = semantic_loss(Eigen::Vector3d::Constant(1.0 / 3), 0.4, Eigen::Vector3d(0, 0, 1), 0.4);
    const bool ok = std::abs(nce - std::log(9.0)) <= 1e-6 && smooth_l1(0.5) == 0.125 && smooth_l1(2.0) == 1.5 &&
                    std::abs(sem - std::log(3.0)) <= 1e-6;
    return Outcome{ok, fmt("nce-ln9 %.1e, smoothL1 %.4g/%.4g, sem-ln3 %.1e", nce - std::log(9.0), smooth_l1(0.5),
                           smooth_l1(2.0), sem - std::log(3.0))};
  });

  // Desk-scale pipeline, run twice from one config file.
  const fs::path config_path = work / "desk.json";
  {
    std::ofstream(config_path) << RunConfig{}.to_json().dump(2) << "\n";
  }
  const fs::path run_a = work / "run_a", run_b = work / "run_b";
  const auto t0 = std::chrono::steady_clock::now();
  const int code_a = run_cli("run-all --config " + config_path.string() + " --out " + run_a.string(),
                             work / "run_a.log");
  std::printf("desk run-all finished with exit %d in %.0fs\n", code_a,
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::fflush(stdout);

  RunConfig cfg = RunConfig::load(config_path);
  cfg.out = run_a;
  std::ostringstream sink;
  Pipeline pipeline(cfg, sink);
  std::optional<PredictorModel> predictor;
  std::vector<Scenario> normals;
  if (code_a == 0) {
    predictor = PredictorModel::load(run_a / "predictor" / "predictor.json");
    normals = load_dataset(run_a / "data" / "normals.jsonl");
  }
  const auto need_run = [&] {
    if (code_a != 0) throw DataError("desk run-all failed; see " + (work / "run_a.log").string());
  };

  report(3, "gradient checks (NCE, semantic, smooth-L1, prediction loss wrt history; 50 coords each)", [&] {
    need_run();
    std::mt19937_64 rng(7);
    const double e_nce = gradcheck::nce(rng, 50);
    const double e_sem = gradcheck::semantic(rng, 50);
    const double e_l1 = gradcheck::smooth_l1(rng, 50);
    const double e_pred = gradcheck::prediction(*predictor, normals[0], rng, 50);
    const double worst = std::max({e_nce, e_sem, e_l1, e_pred});
    return Outcome{worst < 1e-4, fmt("max rel err nce %.1e sem %.1e l1 %.1e pred %.1e", e_nce, e_sem, e_l1, e_pred)};
  });

  report(4, "attack effectiveness (eps 1.0, 50 steps) and emitted-anomaly budget/thresholds", [&] {
    need_run();
    std::map<std::string, const Scenario*> by_id;
    for (const Scenario& s : normals) by_id[s.scenario_id] = &s;
    const std::span<const Scenario> probe(normals.data(), 200);
    std::string detail;
    bool ok = true;
    for (AttackPattern p : {AttackPattern::kRandom, AttackPattern::kDirectional}) {
      const AttackConfig& ac = pipeline.config().attack(p);
      if (ac.epsilon != 1.0 || ac.steps != 50) throw ConfigError("attack", "desk config must use eps 1.0, 50 steps");
      std::size_t improved = 0;
      for (const AttackResult& r : pgd_attack(*predictor, probe, ac)) improved += r.objective_after > r.objective_before;
      const auto anomalies = load_dataset(run_a / "anomalies" / (std::string(to_string(p)) + ".jsonl"));
      std::size_t bad = 0;
      for (const Scenario& a : anomalies) {
        const Scenario& clean = *by_id.at(a.source_id());
        const double shift = (a.target_history.xy() - clean.target_history.xy()).cwiseAbs().maxCoeff();
        const bool qualified =
            label_anomaly(*predictor, a, clean, p, resolve_side(ac, clean)) == Qualification::kQualified;
        if (shift > ac.epsilon || !qualified || a.anomaly_label != label_for(p)) ++bad;
      }
      const double rate = improved / 200.0;
      ok = ok && rate >= 0.9 && bad == 0 && anomalies.size() == 500;
      detail += std::string(to_string(p)) + fmt(": improved %.3f, emitted %.0f, violations %.0f; ", rate,
                                                  static_cast<double>(anomalies.size()), static_cast<double>(bad));
    }
    return Outcome{ok, detail};
  });

  const std::vector<MetricsReport> rows =
      code_a == 0 ? parse_report_csv(slurp(run_a / "eval" / "report.csv")) : std::vector<MetricsReport>{};
  const Auc auc(rows);

  report(5, "supervised benchmark: Sup-CL >= 0.85 same-pattern, beats Naive SVM by >= 0.05", [&] {
    need_run();
    bool ok = true;
    std::string detail;
    for (const char* p : {"random", "directional"}) {
      const double cl = auc("sup-cl", p, p), naive = auc("naive-svm", p, p);
      ok = ok && cl >= 0.85 && cl - naive >= 0.05;
      detail += std::string(p) + fmt(": sup-cl %.3f naive-svm %.3f; ", cl, naive);
    }
    return Outcome{ok, detail};
  });

  report(6, "unsupervised benchmark: Semantic Recon >= 0.70 and beats OC-SVM by >= 0.05", [&] {
    need_run();
    bool ok = true;
    std::string detail;
    for (const char* p : {"random", "directional"}) {
      const double rec = auc("semantic-recon", "none", p), oc = auc("oc-svm", "none", p);
      ok = ok && rec >= 0.70 && rec - oc >= 0.05;
      detail += std::string(p) + fmt(": semantic-recon %.3f oc-svm %.3f; ", rec, oc);
    }
    return Outcome{ok, detail};
  });

  report(7, "generalization ordering (directional -> random)", [&] {
    need_run();
    const double sem = auc("semantics-svm", "directional", "random");
    const double naive = auc("naive-latent-svm", "directional", "random");
    const double same_r = auc("sup-cl", "random", "random"), cross_r = auc("sup-cl", "directional", "random");
    const double same_d = auc("sup-cl", "directional", "directional"), cross_d = auc("sup-cl", "random", "directional");
    const bool ok = sem > naive && same_r >= cross_r && same_d >= cross_d;
    return Outcome{ok, fmt("semantics-svm %.3f vs naive-latent-svm %.3f; sup-cl same/cross random %.3f/%.3f", sem,
                           naive, same_r, cross_r) +
                           fmt(", directional %.3f/%.3f", same_d, cross_d)};
  });

  report(8, "unsupervised purity and frozen extractor", [&] {
    need_run();
    std::vector<AAESample> samples = make_aae_samples(*predictor, std::span<const Scenario>(normals.data(), 64));
    samples[17].label = AnomalyLabel::kRandom;
    AAEConfig small;
    small.epochs = 1;
    bool rejected = false;
    try {
      train_aae(samples, small);
    } catch (const ContractViolation&) {
      rejected = true;
    }
    const std::uint64_t before = predictor->weight_hash();
    const auto anomalies = std::map<AttackPattern, std::vector<Scenario>>{
        {AttackPattern::kRandom, load_dataset(run_a / "anomalies" / "random.jsonl")}};
    const BenchData data = BenchData::build(*predictor, normals, {{AttackPattern::kRandom, anomalies.at(AttackPattern::kRandom)}});
    train_detector(Method::kSupCl, AttackPattern::kRandom, data, cfg.detectors);
    train_detector(Method::kSemanticRecon, std::nullopt, data, cfg.detectors);
    const bool unchanged = predictor->weight_hash() == before;
    const auto manifest = nlohmann::json::parse(slurp(run_a / "predictor" / "manifest.json"));
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(before));
    const bool matches_training = manifest.at("weight_hash") == hex;
    bool checkpoints_agree = true;
    for (const auto& e : fs::directory_iterator(run_a / "detectors")) {
      const std::string name = e.path().filename().string();
      if (name.size() < 5 || name.find(".manifest") != std::string::npos || name.find(".loss") != std::string::npos) continue;
      checkpoints_agree = checkpoints_agree && nlohmann::json::parse(slurp(e.path())).at("extractor_hash") == hex;
    }
    return Outcome{rejected && unchanged && matches_training && checkpoints_agree,
                   std::string("contract violation raised: ") + (rejected ? "yes" : "no") +
                       ", hash unchanged by sup-cl/aae training: " + (unchanged ? "yes" : "no") +
                       ", matches stage manifest: " + (matches_training ? "yes" : "no") +
                       ", detector checkpoints agree: " + (checkpoints_agree ? "yes" : "no")};
  });

  report(9, "reproducibility: run-all twice from one config gives byte-identical report CSVs", [&] {
    need_run();
    const int code_b = run_cli("run-all --config " + config_path.string() + " --out " + run_b.string(),
                               work / "run_b.log");
    if (code_b != 0) return Outcome{false, "second run-all exited with " + std::to_string(code_b)};
    const std::string a = slurp(run_a / "eval" / "report.csv"), b = slurp(run_b / "eval" / "report.csv");
    return Outcome{a == b && !a.empty(), a == b ? std::to_string(a.size()) + " bytes identical" : "reports differ"};
  });

  if (code_a == 0) std::printf("\ndesk-scale report:\n%s", format_report_table(rows).c_str());
  std::printf("\n%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
