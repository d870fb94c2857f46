#pragma once

// Application configuration: one flat keyed document ("tracker.sample_rate",
// "agent.radius", ...). Nested objects are accepted and flattened with dots.

#include "navcore/io.hpp"

#include <cstdlib>
#include <functional>

namespace navcore {

struct AppConfig {
  TrackerConfig tracker;
  double fusion_alpha = 0.8;
  double jitter_distance = 2.0;
  double jitter_confidence = 0.5;
  double voxel_size = kDefaultVoxelSize;
  int connectivity = 26;
  HeightThresholds heights;
  /// Extra floor area around the mapped extent, m.
  double map_margin = 1.0;
  ProjectionParams agent;
  PlannerOptions planner;
  InstructionOptions instructions;
  /// Replan when a corrected pose is farther than this outside the plan
  /// corridor (agent radius around the polyline); zero means one cell.
  double replan_distance = 0.0;
  double arrival_radius = 0.5;

  void validate() const {
    tracker.validate();
    require(fusion_alpha >= 0.0 && fusion_alpha <= 1.0, "fusion.alpha must be in [0,1]");
    require(jitter_distance >= 0.0 && finite(jitter_distance), "fusion.jitter_distance must be non-negative");
    require(jitter_confidence >= 0.0 && jitter_confidence <= 1.0, "fusion.jitter_confidence must be in [0,1]");
    require(finite(voxel_size) && voxel_size > 0.0, "map.voxel_size must be positive");
    require(connectivity == 6 || connectivity == 26, "map.connectivity must be 6 or 26");
    heights.validate();
    require(finite(map_margin) && map_margin >= 0.0, "map.margin must be non-negative");
    agent.validate();
    planner.validate();
    require(instructions.turn_step_deg > 0.0 && instructions.distance_step > 0.0 &&
                instructions.warn_distance >= 0.0 && instructions.tolerance >= 0.0,
            "instruction steps must be positive");
    require(finite(replan_distance) && replan_distance >= 0.0, "planner.replan_distance must be non-negative");
    require(finite(arrival_radius) && arrival_radius > 0.0, "planner.arrival_radius must be positive");
  }

  FusionState fusion_state() const {
    FusionState s;
    s.alpha = fusion_alpha;
    s.jitter_distance = jitter_distance;
    s.jitter_confidence = jitter_confidence;
    return s;
  }
};

/// Bad configuration file, key or value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct ConfigField {
  const char* key;
  std::function<void(AppConfig&, const io::Json&)> set;
  std::function<io::Json(const AppConfig&)> get;
};

template <class T, class M>
ConfigField field(const char* key, M m) {
  return {key, [m](AppConfig& c, const io::Json& v) { std::invoke(m, c) = v.get<T>(); },
          [m](const AppConfig& c) { return io::Json(std::invoke(m, c)); }};
}

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    f.push_back(field<double>("tracker.sample_rate", [](auto& c) -> auto& { return c.tracker.sample_rate; }));
    f.push_back(field<double>("tracker.hp_cutoff", [](auto& c) -> auto& { return c.tracker.hp_cutoff; }));
    f.push_back(field<double>("tracker.lp_cutoff", [](auto& c) -> auto& { return c.tracker.lp_cutoff; }));
    f.push_back(field<double>("tracker.stance_threshold", [](auto& c) -> auto& { return c.tracker.stance_threshold; }));
    f.push_back(field<double>("tracker.min_stance_duration",
                              [](auto& c) -> auto& { return c.tracker.min_stance_duration; }));
    f.push_back(field<double>("tracker.g", [](auto& c) -> auto& { return c.tracker.g; }));
    f.push_back(field<double>("tracker.init_duration", [](auto& c) -> auto& { return c.tracker.init_duration; }));
    f.push_back(field<double>("tracker.attitude_guard", [](auto& c) -> auto& { return c.tracker.attitude_guard; }));
    f.push_back(field<bool>("tracker.zupt", [](auto& c) -> auto& { return c.tracker.zupt; }));
    f.push_back({"tracker.filter",
                 [](AppConfig& c, const io::Json& v) {
                   const auto s = v.get<std::string>();
                   if (s == "mahony") c.tracker.filter = AttitudeFilter::mahony;
                   else if (s == "madgwick") c.tracker.filter = AttitudeFilter::madgwick;
                   else throw ConfigError("tracker.filter must be 'mahony' or 'madgwick'");
                 },
                 [](const AppConfig& c) {
                   return io::Json(c.tracker.filter == AttitudeFilter::mahony ? "mahony" : "madgwick");
                 }});
    f.push_back(field<double>("tracker.kp", [](auto& c) -> auto& { return c.tracker.gains.kp; }));
    f.push_back(field<double>("tracker.ki", [](auto& c) -> auto& { return c.tracker.gains.ki; }));
    f.push_back(field<double>("tracker.beta", [](auto& c) -> auto& { return c.tracker.gains.beta; }));
    f.push_back(field<double>("fusion.alpha", [](auto& c) -> auto& { return c.fusion_alpha; }));
    f.push_back(field<double>("fusion.jitter_distance", [](auto& c) -> auto& { return c.jitter_distance; }));
    f.push_back(field<double>("fusion.jitter_confidence", [](auto& c) -> auto& { return c.jitter_confidence; }));
    f.push_back(field<double>("map.voxel_size", [](auto& c) -> auto& { return c.voxel_size; }));
    f.push_back(field<int>("map.connectivity", [](auto& c) -> auto& { return c.connectivity; }));
    f.push_back(field<double>("map.ground_max", [](auto& c) -> auto& { return c.heights.ground_max; }));
    f.push_back(field<double>("map.body_max", [](auto& c) -> auto& { return c.heights.body_max; }));
    f.push_back(field<double>("map.margin", [](auto& c) -> auto& { return c.map_margin; }));
    f.push_back(field<double>("agent.height", [](auto& c) -> auto& { return c.agent.agent_height; }));
    f.push_back(field<double>("agent.radius", [](auto& c) -> auto& { return c.agent.agent_radius; }));
    f.push_back(field<double>("agent.step_clearance", [](auto& c) -> auto& { return c.agent.step_clearance; }));
    f.push_back(field<int>("planner.lethal_cost", [](auto& c) -> auto& { return c.planner.lethal_cost; }));
    f.push_back(field<double>("planner.turn_step_deg", [](auto& c) -> auto& { return c.instructions.turn_step_deg; }));
    f.push_back(field<double>("planner.distance_step", [](auto& c) -> auto& { return c.instructions.distance_step; }));
    f.push_back(field<double>("planner.warn_distance", [](auto& c) -> auto& { return c.instructions.warn_distance; }));
    f.push_back(field<double>("planner.tolerance", [](auto& c) -> auto& { return c.instructions.tolerance; }));
    f.push_back(field<double>("planner.replan_distance", [](auto& c) -> auto& { return c.replan_distance; }));
    f.push_back(field<double>("planner.arrival_radius", [](auto& c) -> auto& { return c.arrival_radius; }));
    return f;
  }();
  return fields;
}

inline const ConfigField& config_field(const std::string& key) {
  for (const auto& f : config_fields())
    if (key == f.key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

inline void flatten(const io::Json& j, const std::string& prefix, std::vector<std::pair<std::string, io::Json>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, key, out);
    else out.emplace_back(key, v);
  }
}

inline void assign(AppConfig& c, const std::string& key, const io::Json& v) {
  const auto& f = config_field(key);
  try {
    f.set(c, v);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Applies a JSON document on top of `base`. Unknown keys are rejected.
inline AppConfig apply_config_json(AppConfig base, const std::string& text) {
  io::Json j;
  try {
    j = io::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::vector<std::pair<std::string, io::Json>> flat;
  detail::flatten(j, "", flat);
  for (const auto& [k, v] : flat) detail::assign(base, k, v);
  return base;
}

/// Applies "key=value"; the value is parsed as JSON, falling back to a string.
inline void apply_override(AppConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + kv + "'");
  const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
  io::Json v;
  try {
    v = io::Json::parse(val);
  } catch (const nlohmann::json::parse_error&) {
    v = val;
  }
  detail::assign(c, key, v);
}

/// File (explicit path, else $NAVCORE_CONFIG, else defaults), then overrides,
/// then validation.
inline AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  AppConfig c;
  std::string p = path;
  if (p.empty())
    if (const char* env = std::getenv("NAVCORE_CONFIG")) p = env;
  if (!p.empty()) {
    std::string text;
    try {
      text = io::read_file(p);
    } catch (const io::IoError& e) {
      throw ConfigError(e.what());
    }
    c = apply_config_json(c, text);
  }
  for (const auto& o : overrides) apply_override(c, o);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// Every key with its current value, in schema order.
inline io::Json config_json(const AppConfig& c) {
  io::Json j;
  for (const auto& f : detail::config_fields()) j[f.key] = f.get(c);
  return j;
}

}  // namespace navcore
