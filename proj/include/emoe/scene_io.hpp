#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoe/common.hpp"
#include "emoe/io_util.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

inline constexpr int kSceneFormatVersion = 1;

namespace scene_json {

using nlohmann::json;

inline std::string_view kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::Pedestrian: return "pedestrian";
    case AgentKind::Cyclist: return "cyclist";
    case AgentKind::Vehicle: break;
  }
  return "vehicle";
}
inline std::string_view kind_name(StaticKind k) {
  switch (k) {
    case StaticKind::Barrier: return "barrier";
    case StaticKind::Cone: return "cone";
    case StaticKind::Obstacle: break;
  }
  return "obstacle";
}
inline std::string_view kind_name(PolylineKind k) {
  switch (k) {
    case PolylineKind::LaneBoundary: return "lane_boundary";
    case PolylineKind::Crosswalk: return "crosswalk";
    case PolylineKind::DrivableEdge: return "drivable_edge";
    case PolylineKind::LaneCenter: break;
  }
  return "lane_center";
}
inline std::string_view region_name(MapRegion r) {
  switch (r) {
    case MapRegion::Junction: return "junction";
    case MapRegion::Roundabout: return "roundabout";
    case MapRegion::Road: break;
  }
  return "road";
}
inline std::string_view topology_name(LaneTopology t) {
  switch (t) {
    case LaneTopology::Merge: return "merge";
    case LaneTopology::Split: return "split";
    case LaneTopology::Simple: break;
  }
  return "simple";
}

inline json traj_to_json(const Trajectory& t) {
  json a = json::array();
  for (const auto& p : t.points) a.push_back({p.x, p.y, p.heading, p.speed});
  return a;
}

inline json to_json(const Scene& s) {
  json j;
  j["version"] = kSceneFormatVersion;
  j["label"] = s.label ? json(std::string(to_string(*s.label))) : json(nullptr);
  j["dt"] = s.dt;
  const auto& e = s.ego;
  j["ego"] = {{"x", e.pose.x},           {"y", e.pose.y},         {"heading", e.pose.heading},
              {"speed", e.pose.speed},   {"acceleration", e.acceleration}, {"steering", e.steering},
              {"length", e.extent.length}, {"width", e.extent.width}};
  j["agents"] = json::array();
  for (const auto& a : s.agents) {
    j["agents"].push_back({{"id", a.id},
                           {"kind", kind_name(a.kind)},
                           {"length", a.extent.length},
                           {"width", a.extent.width},
                           {"history", traj_to_json(a.history)},
                           {"future", a.future_gt ? traj_to_json(*a.future_gt) : json(nullptr)}});
  }
  j["statics"] = json::array();
  for (const auto& st : s.statics) {
    j["statics"].push_back({{"x", st.pose.x},
                            {"y", st.pose.y},
                            {"heading", st.pose.heading},
                            {"length", st.extent.length},
                            {"width", st.extent.width},
                            {"kind", kind_name(st.kind)}});
  }
  j["map"] = json::array();
  for (const auto& m : s.map) {
    json pts = json::array();
    for (const auto& p : m.points) pts.push_back({p.x, p.y});
    j["map"].push_back({{"kind", kind_name(m.kind)},
                        {"on_route", m.on_route},
                        {"speed_limit", m.speed_limit ? json(*m.speed_limit) : json(nullptr)},
                        {"region", region_name(m.region)},
                        {"topology", topology_name(m.topology)},
                        {"points", pts}});
  }
  j["ego_future"] = s.ego_future_gt ? traj_to_json(*s.ego_future_gt) : json(nullptr);
  return j;
}

/// Field accessor that reports the line and dotted field path on failure.
class Reader {
 public:
  explicit Reader(std::size_t line) : line_(line) {}

  const json& at(const json& obj, const std::string& key, const std::string& path) const {
    if (!obj.is_object() || !obj.contains(key)) fail(path + key, "missing");
    return obj.at(key);
  }
  double number(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = at(obj, key, path);
    if (!v.is_number()) fail(path + key, "expected a number");
    return v.get<double>();
  }
  std::string string(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = at(obj, key, path);
    if (!v.is_string()) fail(path + key, "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = at(obj, key, path);
    if (!v.is_boolean()) fail(path + key, "expected a boolean");
    return v.get<bool>();
  }
  const json& array(const json& obj, const std::string& key, const std::string& path) const {
    const json& v = at(obj, key, path);
    if (!v.is_array()) fail(path + key, "expected an array");
    return v;
  }
  Trajectory traj(const json& arr, const std::string& path, double dt) const {
    Trajectory t{{}, dt};
    t.points.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const json& p = arr[i];
      if (!p.is_array() || p.size() != 4) fail(path + "[" + std::to_string(i) + "]", "expected [x, y, heading, speed]");
      for (const auto& v : p)
        if (!v.is_number()) fail(path + "[" + std::to_string(i) + "]", "expected numbers");
      t.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
    }
    return t;
  }
  template <class E, std::size_t N>
  E enumeration(const json& obj, const std::string& key, const std::string& path,
                const std::array<std::pair<std::string_view, E>, N>& table) const {
    const std::string s = string(obj, key, path);
    for (const auto& [name, value] : table)
      if (name == s) return value;
    fail(path + key, "unknown value '" + s + "'");
  }
  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError(line_, field, what);
  }

 private:
  std::size_t line_;
};

inline Scene from_json(const json& j, std::size_t line) {
  const Reader r(line);
  if (!j.is_object()) r.fail("<record>", "expected a JSON object");
  const int version = static_cast<int>(r.number(j, "version", ""));
  if (version != kSceneFormatVersion) r.fail("version", "unsupported version " + std::to_string(version));
  Scene s;
  s.dt = r.number(j, "dt", "");
  if (!(s.dt > 0.0)) r.fail("dt", "must be positive");
  const json& label = r.at(j, "label", "");
  if (!label.is_null()) {
    if (!label.is_string()) r.fail("label", "expected a string or null");
    const auto t = scenario_from_string(label.get<std::string>());
    if (!t) r.fail("label", "unknown scenario '" + label.get<std::string>() + "'");
    s.label = *t;
  }
  const json& ego = r.at(j, "ego", "");
  s.ego.pose = {r.number(ego, "x", "ego."), r.number(ego, "y", "ego."), r.number(ego, "heading", "ego."),
                r.number(ego, "speed", "ego.")};
  s.ego.acceleration = r.number(ego, "acceleration", "ego.");
  s.ego.steering = r.number(ego, "steering", "ego.");
  s.ego.extent = {r.number(ego, "length", "ego."), r.number(ego, "width", "ego.")};

  static constexpr std::array<std::pair<std::string_view, AgentKind>, 3> agent_kinds = {
      {{"vehicle", AgentKind::Vehicle}, {"pedestrian", AgentKind::Pedestrian}, {"cyclist", AgentKind::Cyclist}}};
  const json& agents = r.array(j, "agents", "");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string p = "agents[" + std::to_string(i) + "].";
    const json& a = agents[i];
    Agent ag;
    ag.id = r.string(a, "id", p);
    ag.kind = r.enumeration(a, "kind", p, agent_kinds);
    ag.extent = {r.number(a, "length", p), r.number(a, "width", p)};
    ag.history = r.traj(r.array(a, "history", p), p + "history", s.dt);
    const json& fut = r.at(a, "future", p);
    if (!fut.is_null()) {
      if (!fut.is_array()) r.fail(p + "future", "expected an array or null");
      ag.future_gt = r.traj(fut, p + "future", s.dt);
    }
    s.agents.push_back(std::move(ag));
  }

  static constexpr std::array<std::pair<std::string_view, StaticKind>, 3> static_kinds = {
      {{"obstacle", StaticKind::Obstacle}, {"barrier", StaticKind::Barrier}, {"cone", StaticKind::Cone}}};
  const json& statics = r.array(j, "statics", "");
  for (std::size_t i = 0; i < statics.size(); ++i) {
    const std::string p = "statics[" + std::to_string(i) + "].";
    const json& st = statics[i];
    StaticObject o;
    o.pose = {r.number(st, "x", p), r.number(st, "y", p), r.number(st, "heading", p)};
    o.extent = {r.number(st, "length", p), r.number(st, "width", p)};
    o.kind = r.enumeration(st, "kind", p, static_kinds);
    s.statics.push_back(o);
  }

  static constexpr std::array<std::pair<std::string_view, PolylineKind>, 4> poly_kinds = {
      {{"lane_center", PolylineKind::LaneCenter},
       {"lane_boundary", PolylineKind::LaneBoundary},
       {"crosswalk", PolylineKind::Crosswalk},
       {"drivable_edge", PolylineKind::DrivableEdge}}};
  static constexpr std::array<std::pair<std::string_view, MapRegion>, 3> regions = {
      {{"road", MapRegion::Road}, {"junction", MapRegion::Junction}, {"roundabout", MapRegion::Roundabout}}};
  static constexpr std::array<std::pair<std::string_view, LaneTopology>, 3> topologies = {
      {{"simple", LaneTopology::Simple}, {"merge", LaneTopology::Merge}, {"split", LaneTopology::Split}}};
  const json& map = r.array(j, "map", "");
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::string p = "map[" + std::to_string(i) + "].";
    const json& m = map[i];
    MapPolyline poly;
    poly.kind = r.enumeration(m, "kind", p, poly_kinds);
    poly.on_route = r.boolean(m, "on_route", p);
    const json& lim = r.at(m, "speed_limit", p);
    if (!lim.is_null()) {
      if (!lim.is_number()) r.fail(p + "speed_limit", "expected a number or null");
      poly.speed_limit = lim.get<double>();
    }
    poly.region = r.enumeration(m, "region", p, regions);
    poly.topology = r.enumeration(m, "topology", p, topologies);
    const json& pts = r.array(m, "points", p);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const json& q = pts[k];
      if (!q.is_array() || q.size() != 2 || !q[0].is_number() || !q[1].is_number())
        r.fail(p + "points[" + std::to_string(k) + "]", "expected [x, y]");
      poly.points.push_back({q[0].get<double>(), q[1].get<double>()});
    }
    s.map.push_back(std::move(poly));
  }

  const json& fut = r.at(j, "ego_future", "");
  if (!fut.is_null()) {
    if (!fut.is_array()) r.fail("ego_future", "expected an array or null");
    s.ego_future_gt = r.traj(fut, "ego_future", s.dt);
  }
  return s;
}

}  // namespace scene_json

/// One JSON object per line, no trailing newline handling beyond skipping
/// blank lines.
inline std::string serialize_scenes(const std::vector<Scene>& scenes) {
  std::string out;
  for (const auto& s : scenes) {
    out += scene_json::to_json(s).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<Scene> parse_scenes(std::istream& in) {
  std::vector<Scene> scenes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, "<json>", e.what());
    }
    scenes.push_back(scene_json::from_json(j, lineno));
  }
  return scenes;
}

inline void write_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_scenes(scenes));
}

inline std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene file " + path.string());
  return parse_scenes(in);
}

}  // namespace emoe
