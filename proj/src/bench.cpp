#include "trajad/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "trajad/baselines.hpp"
#include "trajad/errors.hpp"
#include "trajad/rng.hpp"

namespace trajad {

namespace {

struct MethodName {
  Method method;
  const char* name;
  bool supervised;
};

constexpr MethodName kMethods[] = {
    {Method::kSupCl, "sup-cl", true},           {Method::kSemanticsSvm, "semantics-svm", true},
    {Method::kNnSvm, "nn-svm", true},           {Method::kNaiveLatentSvm, "naive-latent-svm", true},
    {Method::kSemanticRecon, "semantic-recon", false}, {Method::kNaiveSvm, "naive-svm", true},
    {Method::kOcSvm, "oc-svm", false},
};

std::vector<double> to_std(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix rows_of(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

EvalSet supervised_train_set(const BenchData& data, AttackPattern pattern, Method method) {
  const std::string cell = std::string(to_string(method)) + " train=" + std::string(to_string(pattern));
  return concat(data.train_normals, data.train_anomalies_for(pattern, cell));
}

AAEModel train_semantic_aae(const EvalSet& normals, AAEConfig cfg, bool naive, DetectorLog* log) {
  cfg.naive_latent = naive;
  std::vector<AAESample> samples;
  samples.reserve(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    const Scenario& s = *normals.scenarios[i];
    samples.push_back({normals.features.row(static_cast<Index>(i)).transpose(), normals.histories[i],
                       extract_semantics(s, cfg.encoding), s.anomaly_label});
  }
  return train_aae(samples, cfg, log ? &log->aae : nullptr);
}

}  // namespace

Split split_of(std::string_view source_id) {
  const std::uint64_t bucket = fnv1a(source_id) % 100;
  return bucket < 70 ? Split::kTrain : bucket < 80 ? Split::kValidation : Split::kTest;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::string_view to_string(Method method) {
  for (const MethodName& m : kMethods) {
    if (m.method == method) return m.name;
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  std::string valid;
  for (const MethodName& m : kMethods) {
    if (name == m.name) return m.method;
    valid += (valid.empty() ? "" : ", ") + std::string(m.name);
  }
  throw ConfigError("method", "unknown method '" + std::string(name) + "' (valid: " + valid + ")");
}

bool is_supervised(Method method) {
  for (const MethodName& m : kMethods) {
    if (m.method == method) return m.supervised;
  }
  return false;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> out;
    for (const MethodName& m : kMethods) out.push_back(m.method);
    return out;
  }();
  return methods;
}

EvalSet EvalSet::build(const PredictorModel& extractor, std::vector<const Scenario*> scenarios) {
  EvalSet set;
  set.features.resize(static_cast<Index>(scenarios.size()), kFeatureDim);
  for_each_chunk(scenarios.size(), 256, [&](std::size_t begin, std::size_t end) {
    std::vector<Scenario> chunk;
    for (std::size_t i = begin; i < end; ++i) chunk.push_back(*scenarios[i]);
    set.features.middleRows(static_cast<Index>(begin), static_cast<Index>(end - begin)) = extractor.extract_features(chunk);
  });
  for (const Scenario* s : scenarios) {
    set.histories.push_back(PredictorModel::local_history(*s));
    set.labels.push_back(binary_label(*s));
  }
  set.scenarios = std::move(scenarios);
  return set;
}

std::size_t EvalSet::anomalies() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)); }

EvalSet concat(const EvalSet& a, const EvalSet& b) {
  EvalSet out = a;
  out.scenarios.insert(out.scenarios.end(), b.scenarios.begin(), b.scenarios.end());
  out.histories.insert(out.histories.end(), b.histories.begin(), b.histories.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.features.resize(a.features.rows() + b.features.rows(), kFeatureDim);
  out.features << a.features, b.features;
  return out;
}

BenchData BenchData::build(const PredictorModel& extractor, std::span<const Scenario> normals,
                           const std::map<AttackPattern, std::span<const Scenario>>& anomalies) {
  std::vector<const Scenario*> parts[3];
  for (const Scenario& s : normals) parts[static_cast<int>(split_of(s.source_id()))].push_back(&s);
  BenchData data;
  data.train_normals = EvalSet::build(extractor, parts[0]);
  data.val_normals = EvalSet::build(extractor, parts[1]);
  data.test_normals = EvalSet::build(extractor, parts[2]);
  for (const auto& [pattern, set] : anomalies) {
    std::vector<const Scenario*> train, test;
    for (const Scenario& s : set) {
      const Split sp = split_of(s.source_id());
      if (sp == Split::kTrain) train.push_back(&s);
      if (sp == Split::kTest) test.push_back(&s);
    }
    data.train_anomalies[pattern] = EvalSet::build(extractor, train);
    data.test_anomalies[pattern] = EvalSet::build(extractor, test);
  }
  return data;
}

const EvalSet& BenchData::train_anomalies_for(AttackPattern p, std::string_view cell) const {
  auto it = train_anomalies.find(p);
  if (it == train_anomalies.end() || it->second.size() == 0) {
    throw ConfigError("dataset", "no training " + std::string(to_string(p)) + " anomalies for cell " + std::string(cell));
  }
  return it->second;
}

const EvalSet& BenchData::test_anomalies_for(AttackPattern p, std::string_view cell) const {
  auto it = test_anomalies.find(p);
  if (it == test_anomalies.end() || it->second.size() == 0) {
    throw ConfigError("dataset", "no test " + std::string(to_string(p)) + " anomalies for cell " + std::string(cell));
  }
  return it->second;
}

TrainedDetector train_detector(Method method, std::optional<AttackPattern> train_pattern, const BenchData& data,
                               const BenchConfig& cfg, DetectorLog* log) {
  TrainedDetector det;
  det.method = method;
  if (is_supervised(method)) {
    if (!train_pattern) throw ConfigError("pattern", std::string(to_string(method)) + " needs a training pattern");
    det.train_pattern = train_pattern;
  }
  nlohmann::json& st = det.state;
  switch (method) {
    case Method::kSupCl: {
      const EvalSet train = supervised_train_set(data, *train_pattern, method);
      std::vector<Index> nrm, anm;
      for (std::size_t i = 0; i < train.size(); ++i) (train.labels[i] ? anm : nrm).push_back(static_cast<Index>(i));
      ClEncoder enc = train_cl_encoder(rows_of(train.features, nrm), rows_of(train.features, anm), cfg.cl,
                                       log ? &log->cl : nullptr);
      const Svm svm = fit_svm_head(enc.encode(train.features), train.labels, cfg.svm);
      st["encoder"] = enc.to_json();
      st["svm"] = svm.to_json();
      break;
    }
    case Method::kSemanticsSvm:
    case Method::kNaiveLatentSvm: {
      const EvalSet train = supervised_train_set(data, *train_pattern, method);
      const AAEModel aae = train_semantic_aae(data.train_normals, cfg.aae, method == Method::kNaiveLatentSvm, log);
      const Svm svm = Svm::fit_classifier(aae.encode(train.features), train.labels, cfg.svm);
      st["aae"] = aae.to_json();
      st["svm"] = svm.to_json();
      break;
    }
    case Method::kNnSvm: {
      const EvalSet train = supervised_train_set(data, *train_pattern, method);
      st["svm"] = Svm::fit_classifier(train.features, train.labels, cfg.svm).to_json();
      break;
    }
    case Method::kNaiveSvm: {
      const EvalSet train = supervised_train_set(data, *train_pattern, method);
      st["svm"] = Svm::fit_classifier(acceleration_features(train.scenarios), train.labels, cfg.svm).to_json();
      break;
    }
    case Method::kSemanticRecon: {
      AAEModel aae = train_semantic_aae(data.train_normals, cfg.aae, false, log);
      calibrate_threshold(aae, aae.anomaly_scores(data.val_normals.features, data.val_normals.histories),
                          cfg.aae.threshold_quantile);
      st["aae"] = aae.to_json();
      break;
    }
    case Method::kOcSvm: {
      for (int l : data.train_normals.labels) {
        if (l != 0) throw ContractViolation("oc-svm training set contains anomalies");
      }
      st["svm"] = Svm::fit_one_class(trajectory_features(data.train_normals.scenarios), cfg.oc_svm).to_json();
      break;
    }
  }
  return det;
}

Vector score_detector(const TrainedDetector& det, const EvalSet& set) {
  const nlohmann::json& st = det.state;
  switch (det.method) {
    case Method::kSupCl:
      return ClDetector{ClEncoder::from_json(st.at("encoder")), Svm::from_json(st.at("svm"))}.scores(set.features);
    case Method::kSemanticsSvm:
    case Method::kNaiveLatentSvm:
      return Svm::from_json(st.at("svm")).decisions(AAEModel::from_json(st.at("aae")).encode(set.features));
    case Method::kNnSvm:
      return Svm::from_json(st.at("svm")).decisions(set.features);
    case Method::kNaiveSvm:
      return Svm::from_json(st.at("svm")).decisions(acceleration_features(set.scenarios));
    case Method::kSemanticRecon:
      return AAEModel::from_json(st.at("aae")).anomaly_scores(set.features, set.histories);
    case Method::kOcSvm:
      return -Svm::from_json(st.at("svm")).decisions(trajectory_features(set.scenarios));
  }
  throw StateError("score_detector: unknown method");
}

MetricsReport make_report(const TrainedDetector& det, AttackPattern test_pattern, const ScoredSet& scored,
                          std::uint64_t seed) {
  MetricsReport r;
  r.method = std::string(to_string(det.method));
  r.train_pattern = det.train_pattern ? std::string(to_string(*det.train_pattern)) : "none";
  r.test_pattern = std::string(to_string(test_pattern));
  r.f1_at_recall_0_8 = f1_at_recall(scored, 0.8);
  r.roc_auc = roc_auc(scored);
  r.pr_auc = pr_auc(scored);
  r.n_anomaly = scored.positives();
  r.n_normal = scored.negatives();
  r.seed = seed;
  return r;
}

CellResult evaluate_cell(const TrainedDetector& det, const BenchData& data, AttackPattern test_pattern,
                         std::uint64_t seed) {
  const std::string cell = std::string(to_string(det.method)) + " test=" + std::string(to_string(test_pattern));
  const EvalSet test = concat(data.test_normals, data.test_anomalies_for(test_pattern, cell));
  ScoredSet scored{to_std(score_detector(det, test)), test.labels};
  std::vector<std::string> ids;
  ids.reserve(test.size());
  for (const Scenario* s : test.scenarios) ids.push_back(s->scenario_id);
  CellResult out{make_report(det, test_pattern, scored, seed), roc_points(scored), {}, std::move(ids)};
  out.scored = std::move(scored);
  return out;
}

std::vector<CellResult> run_matrix(const BenchData& data, const BenchConfig& cfg, std::span<const Method> methods) {
  constexpr AttackPattern kPatterns[] = {AttackPattern::kRandom, AttackPattern::kDirectional};
  std::vector<CellResult> out;
  for (Method m : methods) {
    if (is_supervised(m)) {
      for (AttackPattern train : kPatterns) {
        const TrainedDetector det = train_detector(m, train, data, cfg);
        for (AttackPattern test : kPatterns) out.push_back(evaluate_cell(det, data, test, cfg.seed));
      }
    } else {
      const TrainedDetector det = train_detector(m, std::nullopt, data, cfg);
      for (AttackPattern test : kPatterns) out.push_back(evaluate_cell(det, data, test, cfg.seed));
    }
  }
  return out;
}

std::string report_csv(std::span<const MetricsReport> reports, std::string_view config_hash) {
  std::string out = "# config_hash=" + std::string(config_hash) + "\n";
  out += "method,train_pattern,test_pattern,f1_at_r0.8,roc_auc,pr_auc,n_normal,n_anomaly,seed\n";
  char buf[256];
  for (const MetricsReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%.6f,%zu,%zu,%llu\n", r.method.c_str(), r.train_pattern.c_str(),
                  r.test_pattern.c_str(), r.f1_at_recall_0_8, r.roc_auc, r.pr_auc, r.n_normal, r.n_anomaly,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

std::vector<MetricsReport> parse_report_csv(const std::string& text) {
  std::vector<MetricsReport> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("method,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw ParseError(line_no, "report row must have 9 columns");
    try {
      out.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5]), std::stoul(f[6]),
                     std::stoul(f[7]), std::stoull(f[8])});
    } catch (const std::logic_error&) {
      throw ParseError(line_no, "report row has a non-numeric metric");
    }
  }
  return out;
}

std::string roc_csv(const std::vector<std::pair<double, double>>& points, std::string_view config_hash) {
  std::string out = "# config_hash=" + std::string(config_hash) + "\nfpr,tpr\n";
  char buf[64];
  for (const auto& [fpr, tpr] : points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", fpr, tpr);
    out += buf;
  }
  return out;
}

std::string format_report_table(std::span<const MetricsReport> reports) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-18s %-12s %-12s %8s %8s %8s %7s %7s\n", "method", "train", "test", "F1@R0.8",
                "ROC-AUC", "PR-AUC", "normal", "anomaly");
  out += buf;
  for (const MetricsReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%-18s %-12s %-12s %8.3f %8.3f %8.3f %7zu %7zu\n", r.method.c_str(),
                  r.train_pattern.c_str(), r.test_pattern.c_str(), r.f1_at_recall_0_8, r.roc_auc, r.pr_auc, r.n_normal,
                  r.n_anomaly);
    out += buf;
  }
  return out;
}

}  // namespace trajad
