#include "trajad/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "trajad/dataset_io.hpp"
#include "trajad/errors.hpp"
#include "trajad/rng.hpp"
#include "trajad/svg_plot.hpp"

namespace trajad {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCheckpointSchema = 1;

// Reads one JSON object, tracking consumed keys so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name(key), "wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, name(key));
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(name(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string key_of(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const std::string& p : parts) joined += p + '\x1f';
  return hex(fnv1a(joined));
}

void read_attack(Section s, AttackConfig& a) {
  s.get("epsilon", a.epsilon);
  s.get("steps", a.steps);
  s.get("step_size", a.step_size);
  s.get("smoothing", a.smoothing);
  if (a.pattern == AttackPattern::kDirectional && s.has("side")) {
    const json& side = s.raw("side");
    if (side.is_null()) {
      a.side.reset();
    } else if (side.is_string()) {
      a.side = side_from_string(side.get<std::string>());
    } else {
      throw ConfigError(s.name("side"), "expected \"left\", \"right\" or null");
    }
  }
  s.finish();
}

json attack_json(const AttackConfig& a) {
  json j = {{"epsilon", a.epsilon}, {"steps", a.steps}, {"step_size", a.step_size}, {"smoothing", a.smoothing}};
  if (a.pattern == AttackPattern::kDirectional) {
    j["side"] = a.side ? json(std::string(to_string(*a.side))) : json(nullptr);
  }
  return j;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  out << text;
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw ParseError(1, p.string() + ": " + e.what());
  }
}

std::string pattern_name(std::optional<AttackPattern> p) {
  return p ? std::string(to_string(*p)) : std::string("none");
}

std::vector<std::pair<double, double>> parse_roc_csv(const std::string& text) {
  std::vector<std::pair<double, double>> pts;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("fpr", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(pts.size() + 1, "roc row needs two columns");
    pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
  }
  return pts;
}

std::string cell_name(const MetricsReport& r) { return r.method + "_" + r.train_pattern + "_" + r.test_pattern; }

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  std::string out = c.out.string();
  root.get("out", out);
  c.out = out;

  Section data = root.sub("data");
  data.get("count", c.normal_count);
  if (data.has("layouts")) {
    Section mix = data.sub("layouts");
    c.generator.weight_straight = c.generator.weight_curve = c.generator.weight_intersection = 0.0;
    for (const auto& [name, value] : data.raw("layouts").items()) {
      double w = 0.0;
      mix.get(name.c_str(), w);
      switch (layout_from_string(name)) {
        case Layout::kStraight: c.generator.weight_straight = w; break;
        case Layout::kCurve: c.generator.weight_curve = w; break;
        case Layout::kIntersection: c.generator.weight_intersection = w; break;
      }
    }
    mix.finish();
  }
  Section gen = data.sub("generator");
  GeneratorConfig& g = c.generator;
  gen.get("speed_min", g.speed_min);
  gen.get("speed_max", g.speed_max);
  gen.get("curve_radius_min", g.curve_radius_min);
  gen.get("curve_radius_max", g.curve_radius_max);
  gen.get("noise_sigma", g.noise_sigma);
  gen.get("accel_max", g.accel_max);
  gen.get("lane_change_prob", g.lane_change_prob);
  gen.get("lead_vehicle_prob", g.lead_vehicle_prob);
  gen.get("max_neighbors", g.max_neighbors);
  gen.get("lane_width", g.lane_width);
  gen.get("random_pose", g.random_pose);
  gen.finish();
  data.finish();

  Section pred = root.sub("predictor");
  pred.get("epochs", c.predictor.epochs);
  pred.get("batch_size", c.predictor.batch_size);
  pred.get("learning_rate", c.predictor.learning_rate);
  pred.finish();

  Section attack = root.sub("attack");
  attack.get("anomalies_per_pattern", c.anomalies_per_pattern);
  read_attack(attack.sub("random"), c.random_attack);
  read_attack(attack.sub("directional"), c.directional_attack);
  attack.finish();

  Section det = root.sub("detectors");
  Section cl = det.sub("sup_cl");
  cl.get("temperature", c.detectors.cl.temperature);
  cl.get("n_normals", c.detectors.cl.n_normals);
  cl.get("m_anomalies", c.detectors.cl.m_anomalies);
  cl.get("epochs", c.detectors.cl.epochs);
  cl.get("learning_rate", c.detectors.cl.learning_rate);
  cl.finish();
  Section aae = det.sub("aae");
  AAEConfig& a = c.detectors.aae;
  aae.get("epochs", a.epochs);
  aae.get("batch_size", a.batch_size);
  aae.get("learning_rate", a.learning_rate);
  aae.get("adversarial_weight", a.adversarial_weight);
  aae.get("semantic_weight", a.semantic_weight);
  aae.get("reconstruction_weight", a.reconstruction_weight);
  aae.get("threshold_quantile", a.threshold_quantile);
  std::string encoding = a.encoding == AggressivenessEncoding::kLogHeadway ? "log_headway" : "raw_headway";
  aae.get("aggressiveness", encoding);
  if (encoding == "log_headway") {
    a.encoding = AggressivenessEncoding::kLogHeadway;
  } else if (encoding == "raw_headway") {
    a.encoding = AggressivenessEncoding::kRawHeadway;
  } else {
    throw ConfigError(aae.name("aggressiveness"), "expected log_headway or raw_headway");
  }
  aae.finish();
  Section svm = det.sub("svm");
  svm.get("c", c.detectors.svm.c);
  svm.get("gamma", c.detectors.svm.gamma);
  svm.finish();
  Section oc = det.sub("oc_svm");
  oc.get("nu", c.detectors.oc_svm.nu);
  oc.get("gamma", c.detectors.oc_svm.gamma);
  oc.finish();
  det.finish();

  Section ev = root.sub("evaluation");
  if (ev.has("methods")) {
    std::vector<std::string> names;
    ev.get("methods", names);
    c.methods.clear();
    for (const std::string& n : names) c.methods.push_back(method_from_string(n));
  }
  if (ev.has("patterns")) {
    std::vector<std::string> names;
    ev.get("patterns", names);
    c.patterns.clear();
    for (const std::string& n : names) c.patterns.push_back(attack_pattern_from_string(n));
  }
  ev.finish();
  root.finish();

  if (c.normal_count < 1) throw ConfigError("data.count", "must be at least 1");
  if (c.anomalies_per_pattern < 1) throw ConfigError("attack.anomalies_per_pattern", "must be at least 1");
  if (c.methods.empty()) throw ConfigError("evaluation.methods", "must name at least one method");
  if (c.patterns.empty()) throw ConfigError("evaluation.patterns", "must name at least one pattern");
  if (c.predictor.epochs < 1) throw ConfigError("predictor.epochs", "must be at least 1");
  if (c.predictor.batch_size < 1) throw ConfigError("predictor.batch_size", "must be at least 1");
  if (!(c.predictor.learning_rate > 0)) throw ConfigError("predictor.learning_rate", "must be positive");
  validate(c.generator);
  validate(c.random_attack);
  validate(c.directional_attack);
  validate(c.detectors.cl);
  validate(c.detectors.aae);
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("--config", "no such file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("--config", std::string("not valid JSON: ") + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  const GeneratorConfig& g = generator;
  const AAEConfig& a = detectors.aae;
  const CLConfig& cl = detectors.cl;
  std::vector<std::string> method_names, pattern_names;
  for (Method m : methods) method_names.emplace_back(trajad::to_string(m));
  for (AttackPattern p : patterns) pattern_names.emplace_back(trajad::to_string(p));
  return {
      {"seed", seed},
      {"out", out.string()},
      {"data",
       {{"count", normal_count},
        {"layouts",
         {{"straight", g.weight_straight}, {"curve", g.weight_curve}, {"intersection", g.weight_intersection}}},
        {"generator",
         {{"speed_min", g.speed_min},
          {"speed_max", g.speed_max},
          {"curve_radius_min", g.curve_radius_min},
          {"curve_radius_max", g.curve_radius_max},
          {"noise_sigma", g.noise_sigma},
          {"accel_max", g.accel_max},
          {"lane_change_prob", g.lane_change_prob},
          {"lead_vehicle_prob", g.lead_vehicle_prob},
          {"max_neighbors", g.max_neighbors},
          {"lane_width", g.lane_width},
          {"random_pose", g.random_pose}}}}},
      {"predictor",
       {{"epochs", predictor.epochs},
        {"batch_size", predictor.batch_size},
        {"learning_rate", predictor.learning_rate}}},
      {"attack",
       {{"anomalies_per_pattern", anomalies_per_pattern},
        {"random", attack_json(random_attack)},
        {"directional", attack_json(directional_attack)}}},
      {"detectors",
       {{"sup_cl",
         {{"temperature", cl.temperature},
          {"n_normals", cl.n_normals},
          {"m_anomalies", cl.m_anomalies},
          {"epochs", cl.epochs},
          {"learning_rate", cl.learning_rate}}},
        {"aae",
         {{"epochs", a.epochs},
          {"batch_size", a.batch_size},
          {"learning_rate", a.learning_rate},
          {"adversarial_weight", a.adversarial_weight},
          {"semantic_weight", a.semantic_weight},
          {"reconstruction_weight", a.reconstruction_weight},
          {"threshold_quantile", a.threshold_quantile},
          {"aggressiveness", a.encoding == AggressivenessEncoding::kLogHeadway ? "log_headway" : "raw_headway"}}},
        {"svm", {{"c", detectors.svm.c}, {"gamma", detectors.svm.gamma}}},
        {"oc_svm", {{"nu", detectors.oc_svm.nu}, {"gamma", detectors.oc_svm.gamma}}}}},
      {"evaluation", {{"methods", method_names}, {"patterns", pattern_names}}},
  };
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("out");
  return hex(fnv1a(j.dump()));
}

const AttackConfig& RunConfig::attack(AttackPattern p) const {
  return p == AttackPattern::kRandom ? random_attack : directional_attack;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig config, std::ostream& log) : config_(std::move(config)), log_(log) {
  // Sub-seeds follow the master seed so that --seed changes the whole run.
  config_.predictor.seed = derive_seed(config_.seed, 1);
  config_.random_attack.seed = derive_seed(config_.seed, 2);
  config_.directional_attack.seed = derive_seed(config_.seed, 3);
  config_.detectors.cl.seed = derive_seed(config_.seed, 4);
  config_.detectors.aae.seed = derive_seed(config_.seed, 5);
  config_.detectors.seed = config_.seed;
  config_.random_attack.pattern = AttackPattern::kRandom;
  config_.directional_attack.pattern = AttackPattern::kDirectional;
  hash_ = config_.hash();
}

fs::path Pipeline::dir(const char* stage) const {
  const std::string s = stage;
  if (s == kStageGenData) return config_.out / "data";
  if (s == kStageTrainPredictor) return config_.out / "predictor";
  if (s == kStageGenAnomalies) return config_.out / "anomalies";
  if (s == kStageTrainDetector) return config_.out / "detectors";
  if (s == kStageEvaluate) return config_.out / "eval";
  return config_.out / "plots";
}

std::string Pipeline::detector_name(Method method, std::optional<AttackPattern> pattern) {
  std::string n(to_string(method));
  if (is_supervised(method) && pattern) n += "-" + std::string(to_string(*pattern));
  return n;
}

std::string Pipeline::data_key() const {
  const json j = config_.to_json();
  return key_of({"data", std::to_string(config_.seed), j.at("data").dump()});
}

std::string Pipeline::predictor_key() const {
  return key_of({data_key(), config_.to_json().at("predictor").dump()});
}

std::string Pipeline::anomalies_key() const {
  return key_of({predictor_key(), config_.to_json().at("attack").dump()});
}

std::string Pipeline::detector_key(Method method, std::optional<AttackPattern> pattern) const {
  return key_of({anomalies_key(), config_.to_json().at("detectors").dump(), detector_name(method, pattern)});
}

std::string Pipeline::evaluate_key() const {
  std::string parts = config_.to_json().at("evaluation").dump();
  for (const auto& [m, p] : detector_cells()) parts += detector_key(m, p);
  return key_of({anomalies_key(), parts});
}

std::string Pipeline::plot_key() const { return key_of({evaluate_key(), "plot"}); }

bool Pipeline::current(const fs::path& manifest, const std::string& key) const {
  if (!fs::exists(manifest)) return false;
  try {
    const json m = read_json(manifest);
    if (m.value("stage_key", "") != key) return false;
    for (const auto& f : m.value("files", json::array())) {
      if (!fs::exists(manifest.parent_path() / f.get<std::string>())) return false;
    }
    return true;
  } catch (const Error&) {
    return false;
  }
}

void Pipeline::require(const char* stage, const fs::path& manifest, const std::string& key) const {
  if (!fs::exists(manifest)) throw DependencyError(stage, "'" + manifest.string() + "' not found");
  if (!current(manifest, key)) {
    throw DependencyError(stage, "'" + manifest.string() + "' was produced by a different config or is incomplete");
  }
}

void Pipeline::write_manifest(const fs::path& path, const char* stage, const std::string& key, json extra) const {
  extra["stage"] = stage;
  extra["config_hash"] = hash_;
  extra["stage_key"] = key;
  extra["seed"] = config_.seed;
  write_file(path, extra.dump(2) + "\n");
}

std::vector<Scenario> Pipeline::load_normals() const {
  require(kStageGenData, dir(kStageGenData) / "manifest.json", data_key());
  return load_dataset(dir(kStageGenData) / "normals.jsonl");
}

PredictorModel Pipeline::load_predictor() const {
  require(kStageTrainPredictor, dir(kStageTrainPredictor) / "manifest.json", predictor_key());
  return PredictorModel::load(dir(kStageTrainPredictor) / "predictor.json");
}

std::map<AttackPattern, std::vector<Scenario>> Pipeline::load_anomalies() const {
  require(kStageGenAnomalies, dir(kStageGenAnomalies) / "manifest.json", anomalies_key());
  std::map<AttackPattern, std::vector<Scenario>> out;
  for (AttackPattern p : config_.patterns) {
    out[p] = load_dataset(dir(kStageGenAnomalies) / (std::string(to_string(p)) + ".jsonl"));
  }
  return out;
}

struct Pipeline::Loaded {
  std::vector<Scenario> normals;
  std::map<AttackPattern, std::vector<Scenario>> anomalies;
  PredictorModel extractor;
  BenchData data;
};

Pipeline::~Pipeline() = default;

const Pipeline::Loaded& Pipeline::loaded() {
  if (!loaded_) {
    std::vector<Scenario> normals = load_normals();
    PredictorModel extractor = load_predictor();
    auto anomalies = load_anomalies();
    loaded_ = std::make_unique<Loaded>(Loaded{std::move(normals), std::move(anomalies), std::move(extractor), {}});
    std::map<AttackPattern, std::span<const Scenario>> spans;
    for (const auto& [p, v] : loaded_->anomalies) spans[p] = v;
    loaded_->data = BenchData::build(loaded_->extractor, loaded_->normals, spans);
  }
  return *loaded_;
}

std::vector<std::pair<Method, std::optional<AttackPattern>>> Pipeline::detector_cells() const {
  std::vector<std::pair<Method, std::optional<AttackPattern>>> cells;
  for (Method m : config_.methods) {
    if (is_supervised(m)) {
      for (AttackPattern p : config_.patterns) cells.emplace_back(m, p);
    } else {
      cells.emplace_back(m, std::nullopt);
    }
  }
  return cells;
}

void Pipeline::gen_data(bool force) {
  const fs::path d = dir(kStageGenData);
  if (fs::exists(d) && !fs::is_empty(d) && !force) {
    throw ConfigError("--force", "output directory '" + d.string() + "' is not empty; pass --force to overwrite");
  }
  loaded_.reset();
  fs::create_directories(d);
  const std::vector<Scenario> normals = generate_dataset(config_.seed, config_.normal_count, config_.generator);
  save_dataset(normals, d / "normals.jsonl");
  write_file(config_.out / "run_config.json", config_.to_json().dump(2) + "\n");
  std::map<std::string, int> splits;
  for (const Scenario& s : normals) ++splits[std::string(to_string(split_of(s.source_id())))];
  write_manifest(d / "manifest.json", kStageGenData, data_key(),
                 {{"count", normals.size()}, {"splits", splits}, {"files", {"normals.jsonl"}}});
  log_ << "[gen-data] " << normals.size() << " normal scenarios -> " << (d / "normals.jsonl").string() << "\n";
}

void Pipeline::train_predictor() {
  loaded_.reset();
  const std::vector<Scenario> normals = load_normals();
  std::vector<Scenario> train, val;
  for (const Scenario& s : normals) {
    const Split sp = split_of(s.source_id());
    if (sp == Split::kTrain) train.push_back(s);
    if (sp == Split::kValidation) val.push_back(s);
  }
  if (train.empty()) throw DataError("train-predictor: the training split is empty");
  PredictorTrainingLog tlog;
  const PredictorModel model = trajad::train_predictor(train, config_.predictor, &tlog, val);
  const fs::path d = dir(kStageTrainPredictor);
  fs::create_directories(d);
  model.save(d / "predictor.json", hash_);
  std::string curve = "# config_hash=" + hash_ + "\nepoch,loss,val_ade\n";
  char buf[96];
  for (std::size_t e = 0; e < tlog.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e + 1, tlog.epoch_loss[e],
                  e < tlog.val_ade.size() ? tlog.val_ade[e] : 0.0);
    curve += buf;
  }
  write_file(d / "loss.csv", curve);
  json extra = {{"train_count", train.size()},
                {"val_count", val.size()},
                {"weight_hash", hex(model.weight_hash())},
                {"files", {"predictor.json", "loss.csv"}}};
  if (!tlog.val_ade.empty()) extra["val_ade"] = tlog.val_ade.back();
  write_manifest(d / "manifest.json", kStageTrainPredictor, predictor_key(), extra);
  log_ << "[train-predictor] " << train.size() << " training scenarios";
  if (!tlog.val_ade.empty()) log_ << ", validation ADE " << tlog.val_ade.back() << " m";
  log_ << "\n";
}

void Pipeline::gen_anomalies() {
  loaded_.reset();
  const std::vector<Scenario> normals = load_normals();
  const PredictorModel model = load_predictor();
  const fs::path d = dir(kStageGenAnomalies);
  fs::create_directories(d);
  json reports = json::object();
  json files = json::array();
  for (AttackPattern p : config_.patterns) {
    AnomalyReport rep;
    const std::vector<Scenario> anomalies = build_anomaly_dataset(
        model, normals, config_.attack(p), static_cast<std::size_t>(config_.anomalies_per_pattern), &rep);
    const std::string file = std::string(to_string(p)) + ".jsonl";
    save_dataset(anomalies, d / file);
    files.push_back(file);
    reports[std::string(to_string(p))] = {{"attempted", rep.attempted},
                                          {"improved", rep.improved},
                                          {"qualified", rep.qualified},
                                          {"count", anomalies.size()}};
    log_ << "[gen-anomalies] " << to_string(p) << ": " << anomalies.size() << " anomalies (" << rep.qualified
         << " of " << rep.attempted << " attacks qualified)\n";
  }
  write_manifest(d / "manifest.json", kStageGenAnomalies, anomalies_key(), {{"patterns", reports}, {"files", files}});
}

void Pipeline::train_detector(Method method, std::optional<AttackPattern> pattern) {
  std::vector<std::optional<AttackPattern>> targets;
  if (!is_supervised(method)) {
    targets.emplace_back(std::nullopt);
  } else if (pattern) {
    targets.emplace_back(pattern);
  } else {
    for (AttackPattern p : config_.patterns) targets.emplace_back(p);
  }
  const Loaded& in = loaded();
  const PredictorModel& extractor = in.extractor;
  const BenchData& data = in.data;
  const fs::path d = dir(kStageTrainDetector);
  fs::create_directories(d);

  for (const auto& target : targets) {
    const std::string name = detector_name(method, target);
    DetectorLog dlog;
    const TrainedDetector det = trajad::train_detector(method, target, data, config_.detectors, &dlog);
    json ckpt = {{"schema_version", kCheckpointSchema},
                 {"kind", "detector"},
                 {"method", std::string(to_string(method))},
                 {"train_pattern", pattern_name(target)},
                 {"config_hash", hash_},
                 {"extractor_hash", hex(extractor.weight_hash())},
                 {"state", det.state}};
    write_file(d / (name + ".json"), ckpt.dump() + "\n");

    std::string curve = "# config_hash=" + hash_ + "\n";
    char buf[160];
    if (!dlog.aae.recon_loss.empty()) {
      curve += "epoch,adv_loss,sem_loss,recon_loss\n";
      for (std::size_t e = 0; e < dlog.aae.recon_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", e + 1, dlog.aae.adv_loss[e],
                      e < dlog.aae.sem_loss.size() ? dlog.aae.sem_loss[e] : 0.0, dlog.aae.recon_loss[e]);
        curve += buf;
      }
    } else {
      curve += "epoch,loss\n";
      for (std::size_t e = 0; e < dlog.cl.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", e + 1, dlog.cl.epoch_loss[e]);
        curve += buf;
      }
    }
    write_file(d / (name + ".loss.csv"), curve);
    write_manifest(d / (name + ".manifest.json"), kStageTrainDetector, detector_key(method, target),
                   {{"method", std::string(to_string(method))},
                    {"train_pattern", pattern_name(target)},
                    {"files", {name + ".json", name + ".loss.csv"}}});
    log_ << "[train-detector] " << name << "\n";
  }
}

std::vector<MetricsReport> Pipeline::evaluate() {
  const Loaded& in = loaded();
  const PredictorModel& extractor = in.extractor;
  const BenchData& data = in.data;
  const fs::path d = dir(kStageEvaluate);
  fs::create_directories(d / "roc");
  fs::create_directories(d / "scores");

  std::vector<MetricsReport> reports;
  json files = json::array();
  for (const auto& [method, pattern] : detector_cells()) {
    const std::string name = detector_name(method, pattern);
    const fs::path det_dir = dir(kStageTrainDetector);
    require(kStageTrainDetector, det_dir / (name + ".manifest.json"), detector_key(method, pattern));
    const json ckpt = read_json(det_dir / (name + ".json"));
    if (ckpt.value("schema_version", -1) != kCheckpointSchema || ckpt.value("kind", "") != "detector") {
      throw VersionError("detector checkpoint '" + name + "': unsupported schema or kind");
    }
    if (ckpt.value("extractor_hash", "") != hex(extractor.weight_hash())) {
      throw DependencyError(kStageTrainDetector, "'" + name + "' was trained against a different extractor");
    }
    TrainedDetector det{method, pattern, ckpt.at("state")};
    double threshold = 0.0;
    if (method == Method::kSemanticRecon) threshold = AAEModel::from_json(det.state.at("aae")).threshold().value_or(0.0);

    for (AttackPattern test : config_.patterns) {
      const CellResult cell = evaluate_cell(det, data, test, config_.seed);
      const std::string cn = cell_name(cell.report);
      write_file(d / "roc" / (cn + ".csv"), roc_csv(cell.roc, hash_));
      std::string lines;
      for (std::size_t i = 0; i < cell.scored.size(); ++i) {
        const double s = cell.scored.scores[i];
        lines += json({{"scenario_id", cell.scenario_ids[i]},
                       {"score", s},
                       {"label", s > threshold ? 1 : 0},
                       {"truth", cell.scored.labels[i]}})
                     .dump() +
                 "\n";
      }
      write_file(d / "scores" / (cn + ".jsonl"), lines);
      files.push_back("roc/" + cn + ".csv");
      files.push_back("scores/" + cn + ".jsonl");
      reports.push_back(cell.report);
    }
  }
  write_file(d / "report.csv", report_csv(reports, hash_));
  files.push_back("report.csv");
  write_manifest(d / "manifest.json", kStageEvaluate, evaluate_key(), {{"rows", reports.size()}, {"files", files}});
  log_ << format_report_table(reports);
  return reports;
}

void Pipeline::plot() {
  const fs::path ev = dir(kStageEvaluate);
  require(kStageEvaluate, ev / "manifest.json", evaluate_key());
  const std::vector<MetricsReport> reports = parse_report_csv(read_file(ev / "report.csv"));
  const fs::path d = dir(kStagePlot);
  fs::create_directories(d);
  json files = json::array();
  for (AttackPattern test : config_.patterns) {
    const std::string tp(to_string(test));
    std::vector<RocCurve> same, cross;
    for (const MetricsReport& r : reports) {
      if (r.test_pattern != tp) continue;
      RocCurve curve;
      char auc[32];
      std::snprintf(auc, sizeof auc, " (%.3f)", r.roc_auc);
      curve.label = r.method + (r.train_pattern == "none" ? "" : " [" + r.train_pattern + "]") + auc;
      curve.points = parse_roc_csv(read_file(ev / "roc" / (cell_name(r) + ".csv")));
      (r.train_pattern == tp || r.train_pattern == "none" ? same : cross).push_back(std::move(curve));
    }
    const std::string same_file = "roc_same_" + tp + ".svg";
    write_file(d / same_file, roc_svg(same, "ROC, test on " + tp + " (same pattern / unsupervised)", hash_));
    files.push_back(same_file);
    if (!cross.empty()) {
      const std::string cross_file = "roc_cross_" + tp + ".svg";
      write_file(d / cross_file, roc_svg(cross, "ROC, test on " + tp + " (trained on the other pattern)", hash_));
      files.push_back(cross_file);
    }
  }
  write_manifest(d / "manifest.json", kStagePlot, plot_key(), {{"files", files}});
  log_ << "[plot] " << files.size() << " figures -> " << d.string() << "\n";
}

void Pipeline::run_all(bool force) {
  const auto skip = [&](const char* stage) { log_ << "[" << stage << "] up to date, skipped\n"; };
  if (current(dir(kStageGenData) / "manifest.json", data_key())) {
    skip(kStageGenData);
  } else {
    gen_data(force);
  }
  if (current(dir(kStageTrainPredictor) / "manifest.json", predictor_key())) {
    skip(kStageTrainPredictor);
  } else {
    train_predictor();
  }
  if (current(dir(kStageGenAnomalies) / "manifest.json", anomalies_key())) {
    skip(kStageGenAnomalies);
  } else {
    gen_anomalies();
  }
  for (const auto& [method, pattern] : detector_cells()) {
    const std::string name = detector_name(method, pattern);
    if (current(dir(kStageTrainDetector) / (name + ".manifest.json"), detector_key(method, pattern))) {
      log_ << "[train-detector] " << name << " up to date, skipped\n";
    } else {
      train_detector(method, pattern);
    }
  }
  if (current(dir(kStageEvaluate) / "manifest.json", evaluate_key())) {
    skip(kStageEvaluate);
    log_ << format_report_table(parse_report_csv(read_file(dir(kStageEvaluate) / "report.csv")));
  } else {
    evaluate();
  }
  if (current(dir(kStagePlot) / "manifest.json", plot_key())) {
    skip(kStagePlot);
  } else {
    plot();
  }
  write_file(config_.out / "run_config.json", config_.to_json().dump(2) + "\n");
}

}  // namespace trajad
