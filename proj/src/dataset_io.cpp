#include "trajad/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trajad/errors.hpp"

namespace trajad {

namespace {

using nlohmann::json;

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  // Avoid "-0.0000000000" so equal values always print identically.
  if (std::string_view(buf).find_first_not_of("-0.") == std::string_view::npos) {
    out += "0.0000000000";
  } else {
    out += buf;
  }
}

void append_waypoints(std::string& out, const Trajectory& t) {
  out += '[';
  for (Index i = 0; i < t.size(); ++i) {
    if (i) out += ',';
    out += '[';
    append_number(out, t[i].x);
    out += ',';
    append_number(out, t[i].y);
    out += ',';
    append_number(out, t[i].t);
    out += ']';
  }
  out += ']';
}

void append_ints(std::string& out, const std::vector<int>& v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  out += ']';
}

void append_optional(std::string& out, const std::optional<int>& v) {
  out += v ? std::to_string(*v) : "null";
}

Trajectory parse_waypoints(const json& j, const std::string& agent_id) {
  if (!j.is_array()) throw std::runtime_error("waypoint list must be an array");
  Trajectory::Storage pts(static_cast<Index>(j.size()), 3);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& w = j[i];
    if (!w.is_array() || w.size() != 3) throw std::runtime_error("waypoint must be [x, y, t]");
    for (int c = 0; c < 3; ++c) pts(static_cast<Index>(i), c) = w[static_cast<std::size_t>(c)].get<double>();
  }
  return Trajectory(agent_id, std::move(pts));
}

std::optional<int> parse_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<int>();
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  std::string out;
  out.reserve(16384);
  out += "{\"schema_version\":" + std::to_string(kDatasetSchemaVersion);
  out += ",\"scenario_id\":" + json(s.scenario_id).dump();
  out += ",\"label\":\"" + std::string(to_string(s.anomaly_label)) + "\"";
  out += ",\"target_history\":";
  append_waypoints(out, s.target_history);
  out += ",\"neighbors\":[";
  for (std::size_t k = 0; k < s.neighbor_histories.size(); ++k) {
    if (k) out += ',';
    append_waypoints(out, s.neighbor_histories[k]);
  }
  out += "],\"lanes\":[";
  for (std::size_t k = 0; k < s.lane_graph.lanes.size(); ++k) {
    const Lane& lane = s.lane_graph.lanes[k];
    if (k) out += ',';
    out += "{\"centerline\":[";
    for (Index i = 0; i < lane.centerline.rows(); ++i) {
      if (i) out += ',';
      out += '[';
      append_number(out, lane.centerline(i, 0));
      out += ',';
      append_number(out, lane.centerline(i, 1));
      out += ']';
    }
    out += "],\"succ\":";
    append_ints(out, lane.successors);
    out += ",\"pred\":";
    append_ints(out, lane.predecessors);
    out += ",\"left\":";
    append_optional(out, lane.left);
    out += ",\"right\":";
    append_optional(out, lane.right);
    out += '}';
  }
  out += "],\"target_future\":";
  append_waypoints(out, s.target_future);
  if (s.attack_meta) {
    const AttackMeta& m = *s.attack_meta;
    out += ",\"attack_meta\":{\"epsilon\":";
    append_number(out, m.epsilon);
    out += ",\"steps\":" + std::to_string(m.steps);
    out += ",\"objective_before\":";
    append_number(out, m.objective_before);
    out += ",\"objective_after\":";
    append_number(out, m.objective_after);
    out += ",\"source_id\":" + json(m.source_id).dump() + '}';
  }
  out += '}';
  return out;
}

Scenario parse_scenario(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(line_number, e.what());
  }
  if (!j.is_object()) throw ParseError(line_number, "expected a JSON object");
  if (!j.contains("schema_version")) throw ParseError(line_number, "missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kDatasetSchemaVersion) {
    throw VersionError("line " + std::to_string(line_number) + ": unsupported schema_version " +
                       j["schema_version"].dump() + " (expected " + std::to_string(kDatasetSchemaVersion) + ")");
  }
  Scenario s;
  try {
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.anomaly_label = anomaly_label_from_string(j.at("label").get<std::string>());
    s.target_history = parse_waypoints(j.at("target_history"), "target");
    std::size_t k = 0;
    for (const json& nb : j.at("neighbors")) s.neighbor_histories.push_back(parse_waypoints(nb, "nbr-" + std::to_string(k++)));
    for (const json& lj : j.at("lanes")) {
      Lane lane;
      const json& cl = lj.at("centerline");
      lane.centerline.resize(static_cast<Index>(cl.size()), 2);
      for (std::size_t i = 0; i < cl.size(); ++i) {
        if (!cl[i].is_array() || cl[i].size() != 2) throw std::runtime_error("centerline point must be [x, y]");
        lane.centerline(static_cast<Index>(i), 0) = cl[i][0].get<double>();
        lane.centerline(static_cast<Index>(i), 1) = cl[i][1].get<double>();
      }
      lane.successors = lj.at("succ").get<std::vector<int>>();
      lane.predecessors = lj.at("pred").get<std::vector<int>>();
      lane.left = parse_optional(lj.at("left"));
      lane.right = parse_optional(lj.at("right"));
      s.lane_graph.lanes.push_back(std::move(lane));
    }
    s.target_future = parse_waypoints(j.at("target_future"), "target");
    if (j.contains("attack_meta")) {
      const json& m = j["attack_meta"];
      s.attack_meta = AttackMeta{m.at("epsilon").get<double>(), m.at("steps").get<int>(),
                                 m.at("objective_before").get<double>(), m.at("objective_after").get<double>(),
                                 m.at("source_id").get<std::string>()};
    }
  } catch (const Error& e) {
    throw ParseError(line_number, e.what());
  } catch (const std::exception& e) {
    throw ParseError(line_number, e.what());
  }
  try {
    validate_scenario(s);
  } catch (const DataError& e) {
    throw ParseError(line_number, e.what());
  }
  return s;
}

void save_dataset(const std::vector<Scenario>& scenarios, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const Scenario& s : scenarios) out << serialize_scenario(s) << '\n';
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<Scenario> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::vector<Scenario> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_scenario(line, line_number));
  }
  return out;
}

}  // namespace trajad
