#include "riskplan/world_config.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace riskplan {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument("world config: " + where + ": " + what);
}

// Rejects keys outside `allowed` so that typos do not pass silently.
void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(where, "unknown key '" + key + "'");
    }
  }
}

double number(const json& j, const std::string& where, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail(where, std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

double required_number(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) fail(where, std::string("missing '") + key + "'");
  return number(j, where, key, 0.0);
}

std::string text(const json& j, const std::string& where, const char* key, const std::string& fallback = {}) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  if (!j.at(key).is_string()) fail(where, std::string("'") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

Point2 point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) fail(where, "expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<Point2> points(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected a list of [x, y]");
  std::vector<Point2> out;
  for (const auto& p : j) out.push_back(point(p, where));
  return out;
}

std::pair<double, double> range(const json& j, const std::string& where, const char* key,
                                std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
    fail(where, std::string("'") + key + "' must be [min, max]");
  }
  return {r[0].get<double>(), r[1].get<double>()};
}

std::shared_ptr<const LaneMap> parse_map(const json& j) {
  check_keys(j, "map", {"lanes", "drivable"});
  if (!j.contains("lanes") || !j.at("lanes").is_array() || j.at("lanes").empty()) fail("map", "needs lanes");
  std::vector<Lane> lanes;
  for (const auto& l : j.at("lanes")) {
    const std::string where = "map.lanes";
    check_keys(l, where, {"id", "centerline", "width", "speed_limit", "left", "right", "successors"});
    const std::string id = text(l, where, "id");
    if (id.empty()) fail(where, "lane needs an id");
    Lane lane{id, Polyline(points(l.value("centerline", json::array()), where + "." + id + ".centerline")),
              number(l, where, "width", 3.5), number(l, where, "speed_limit", 15.0), std::nullopt, std::nullopt, {}};
    if (const auto left = text(l, where, "left"); !left.empty()) lane.left = left;
    if (const auto right = text(l, where, "right"); !right.empty()) lane.right = right;
    for (const auto& s : l.value("successors", json::array())) lane.successors.push_back(s.get<std::string>());
    lanes.push_back(std::move(lane));
  }
  std::optional<Polygon> drivable;
  if (j.contains("drivable")) drivable = Polygon(points(j.at("drivable"), "map.drivable"));
  return std::make_shared<const LaneMap>(std::move(lanes), std::move(drivable));
}

EgoConfig parse_ego(const json& j) {
  check_keys(j, "ego", {"state", "route", "route_length", "half_length", "half_width", "wheelbase"});
  EgoConfig ego;
  const json& s = j.value("state", json::object());
  check_keys(s, "ego.state", {"x", "y", "theta", "v", "a", "delta"});
  ego.initial = {number(s, "ego.state", "x", 0.0),  number(s, "ego.state", "y", 0.0),
                 number(s, "ego.state", "theta", 0.0), number(s, "ego.state", "v", 0.0),
                 number(s, "ego.state", "a", 0.0),  number(s, "ego.state", "delta", 0.0)};
  ego.params.half_length = number(j, "ego", "half_length", ego.params.half_length);
  ego.params.half_width = number(j, "ego", "half_width", ego.params.half_width);
  ego.params.wheelbase = number(j, "ego", "wheelbase", ego.params.wheelbase);
  if (!j.contains("route")) fail("ego", "missing 'route'");
  const json& r = j.at("route");
  check_keys(r, "ego.route", {"lanes", "desired_speed", "stop_point"});
  for (const auto& id : r.value("lanes", json::array())) ego.route.lanes.push_back(id.get<std::string>());
  ego.route.desired_speed = number(r, "ego.route", "desired_speed", 10.0);
  if (r.contains("stop_point") && !r.at("stop_point").is_null()) {
    ego.route.stop_point = point(r.at("stop_point"), "ego.route.stop_point");
  }
  ego.route_length = number(j, "ego", "route_length", 100.0);
  return ego;
}

AgentConfig parse_agent(const json& j) {
  const std::string where = "agents";
  check_keys(j, where, {"id", "behavior", "state", "half_length", "half_width", "lane", "desired_speed",
                        "waypoints", "switch_time", "switch_lane"});
  AgentConfig a;
  if (!j.contains("id") || !j.at("id").is_number_integer()) fail(where, "agent needs an integer id");
  a.id = j.at("id").get<int>();
  const std::string tag = where + "[" + std::to_string(a.id) + "]";
  a.behavior = agent_behavior_from_string(text(j, tag, "behavior", "idm"));
  const json& s = j.value("state", json::object());
  check_keys(s, tag + ".state", {"x", "y", "heading", "speed"});
  a.initial = {number(s, tag, "x", 0.0), number(s, tag, "y", 0.0), number(s, tag, "heading", 0.0),
               number(s, tag, "speed", 0.0)};
  a.shape.half_length = number(j, tag, "half_length", a.shape.half_length);
  a.shape.half_width = number(j, tag, "half_width", a.shape.half_width);
  a.lane = text(j, tag, "lane");
  a.desired_speed = number(j, tag, "desired_speed", 0.0);
  for (const auto& w : j.value("waypoints", json::array())) {
    if (!w.is_array() || w.size() != 3) fail(tag, "waypoints are [t, x, y]");
    a.waypoints.push_back({w[0].get<double>(), w[1].get<double>(), w[2].get<double>()});
  }
  a.switch_time = number(j, tag, "switch_time", 0.0);
  a.switch_lane = text(j, tag, "switch_lane");
  return a;
}

void parse_planner(const json& j, PlannerConfig& p) {
  check_keys(j, "planner", {"mode", "alpha", "theta", "tau_max", "horizon_steps", "dt", "fixed_branch_time",
                            "reward", "lane_keep_only", "max_combinations", "per_agent", "max_policies"});
  p.mode = branch_mode_from_string(text(j, "planner", "mode", to_string(p.mode)));
  p.rcp.alpha = number(j, "planner", "alpha", p.rcp.alpha);
  p.divergence.theta = number(j, "planner", "theta", p.divergence.theta);
  p.divergence.tau_max = number(j, "planner", "tau_max", p.divergence.tau_max);
  const double dt = number(j, "planner", "dt", p.sim.dt);
  p.sim.dt = p.prediction.dt = p.divergence.dt = dt;
  const double horizon = number(j, "planner", "horizon_steps", p.sim.horizon_steps);
  if (horizon != std::floor(horizon) || horizon < 1) fail("planner", "'horizon_steps' must be a positive integer");
  p.sim.horizon_steps = p.prediction.horizon_steps = static_cast<int>(horizon);
  p.fixed_branch_time = number(j, "planner", "fixed_branch_time", p.fixed_branch_time);
  p.policies.lane_keep_only = j.value("lane_keep_only", false);
  p.caps.max_combinations = static_cast<std::size_t>(number(j, "planner", "max_combinations", 4));
  p.caps.per_agent = static_cast<std::size_t>(number(j, "planner", "per_agent", 2));
  p.policies.max_policies = static_cast<std::size_t>(number(j, "planner", "max_policies", 9));
  if (j.contains("reward")) {
    const json& r = j.at("reward");
    check_keys(r, "planner.reward", {"safety", "efficiency", "navigation", "risk", "uncertainty"});
    p.reward.safety = number(r, "planner.reward", "safety", p.reward.safety);
    p.reward.efficiency = number(r, "planner.reward", "efficiency", p.reward.efficiency);
    p.reward.navigation = number(r, "planner.reward", "navigation", p.reward.navigation);
    p.reward.risk = number(r, "planner.reward", "risk", p.reward.risk);
    p.reward.uncertainty = number(r, "planner.reward", "uncertainty", p.reward.uncertainty);
  }
}

}  // namespace

std::string to_string(AgentBehavior b) {
  switch (b) {
    case AgentBehavior::Scripted: return "scripted";
    case AgentBehavior::Idm: return "idm";
    case AgentBehavior::IntentionSwitch: return "intention_switch";
  }
  return "?";
}

AgentBehavior agent_behavior_from_string(const std::string& s) {
  for (auto b : {AgentBehavior::Scripted, AgentBehavior::Idm, AgentBehavior::IntentionSwitch}) {
    if (to_string(b) == s) return b;
  }
  throw std::invalid_argument("unknown agent behavior: " + s);
}

void ControllerConfig::validate() const {
  for (double g : {k_s, k_v, k_a, k_lat, k_heading, k_delta, comfort_decel}) {
    if (!(g >= 0.0)) throw std::invalid_argument("controller gains must be non-negative");
  }
}

void EpisodeConfig::validate() const {
  if (!(control_dt > 0.0) || !(replan_period >= control_dt) || !(timeout > 0.0)) {
    throw std::invalid_argument("episode needs 0 < control_dt <= replan_period and a positive timeout");
  }
  const double ratio = replan_period / control_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw std::invalid_argument("replan period must be a multiple of the control step");
  }
  if (history_samples < 1) throw std::invalid_argument("history needs at least one sample");
}

void Randomization::validate() const {
  if (!enabled) return;
  if (!(gap_min <= gap_max) || !(trigger_min <= trigger_max) || !(speed_min <= speed_max) || gap_min < 0.0 ||
      trigger_min < 0.0 || speed_min < 0.0) {
    throw std::invalid_argument("randomization ranges must be ordered and non-negative");
  }
}

const AgentConfig& WorldConfig::agent(AgentId id) const {
  for (const auto& a : agents) {
    if (a.id == id) return a;
  }
  throw std::out_of_range("no agent with id " + std::to_string(id));
}

void WorldConfig::validate() const {
  if (schema_version != kWorldSchemaVersion) {
    throw std::invalid_argument("unsupported schema_version " + std::to_string(schema_version));
  }
  if (!map) throw std::invalid_argument("world config has no map");
  auto need_lane = [&](const LaneId& id, const std::string& who) {
    if (!map->has_lane(id)) throw std::invalid_argument(who + " references unknown lane '" + id + "'");
  };
  for (const auto& l : map->lanes()) {
    for (const auto& other : {l.left, l.right}) {
      if (other) need_lane(*other, "lane " + l.id);
    }
    for (const auto& s : l.successors) need_lane(s, "lane " + l.id);
  }
  if (ego.route.lanes.empty()) throw std::invalid_argument("ego route is empty");
  for (const auto& id : ego.route.lanes) need_lane(id, "ego route");
  if (!(ego.route_length > 0.0) || !(ego.route.desired_speed > 0.0)) {
    throw std::invalid_argument("route length and desired speed must be positive");
  }
  ego.params.validate();
  std::set<AgentId> ids;
  for (const auto& a : agents) {
    const std::string who = "agent " + std::to_string(a.id);
    if (!ids.insert(a.id).second) throw std::invalid_argument("duplicate " + who);
    if (a.behavior == AgentBehavior::Scripted) {
      if (a.waypoints.empty()) throw std::invalid_argument(who + " is scripted without waypoints");
      for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
        if (a.waypoints[i].t < 0.0 || (i > 0 && a.waypoints[i].t < a.waypoints[i - 1].t)) {
          throw std::invalid_argument(who + " waypoint times must be non-negative and sorted");
        }
      }
    } else {
      need_lane(a.lane, who);
    }
    if (a.behavior == AgentBehavior::IntentionSwitch) {
      need_lane(a.switch_lane, who);
      if (a.switch_time < 0.0) throw std::invalid_argument(who + " switch time is negative");
    }
  }
  for (const auto& n : noise) {
    if (n.start < 0.0 || n.end < n.start) throw std::invalid_argument("noise window times must be ordered");
    need_lane(n.spec.target_lane, "noise window");
    if (!ids.count(n.agent)) throw std::invalid_argument("noise window targets unknown agent");
  }
  if (randomization.enabled && !ids.count(randomization.agent)) {
    throw std::invalid_argument("randomization targets unknown agent");
  }
  randomization.validate();
  planner.validate();
  controller.validate();
  episode.validate();
}

WorldConfig parse_world_config(const std::string& text_in) {
  json j;
  try {
    j = json::parse(text_in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("world config: malformed JSON: ") + e.what());
  }
  check_keys(j, "top level", {"schema_version", "name", "seed", "map", "ego", "agents", "planner", "noise",
                              "controller", "episode", "randomization"});
  WorldConfig cfg;
  try {
    if (!j.contains("schema_version")) fail("top level", "missing 'schema_version'");
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != kWorldSchemaVersion) {
      fail("top level", "unsupported schema_version " + std::to_string(cfg.schema_version));
    }
    cfg.name = text(j, "top level", "name");
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("map")) fail("top level", "missing 'map'");
    cfg.map = parse_map(j.at("map"));
    if (!j.contains("ego")) fail("top level", "missing 'ego'");
    cfg.ego = parse_ego(j.at("ego"));
    for (const auto& a : j.value("agents", json::array())) cfg.agents.push_back(parse_agent(a));
    if (j.contains("planner")) parse_planner(j.at("planner"), cfg.planner);
    for (const auto& n : j.value("noise", json::array())) {
      check_keys(n, "noise", {"start", "end", "agent", "target_lane", "boost"});
      cfg.noise.push_back({required_number(n, "noise", "start"), required_number(n, "noise", "end"),
                           static_cast<AgentId>(required_number(n, "noise", "agent")),
                           NoiseSpec{text(n, "noise", "target_lane"), required_number(n, "noise", "boost")}});
    }
    if (j.contains("controller")) {
      const json& c = j.at("controller");
      auto& k = cfg.controller;
      check_keys(c, "controller", {"k_s", "k_v", "k_a", "k_lat", "k_heading", "k_delta", "comfort_decel"});
      k.k_s = number(c, "controller", "k_s", k.k_s);
      k.k_v = number(c, "controller", "k_v", k.k_v);
      k.k_a = number(c, "controller", "k_a", k.k_a);
      k.k_lat = number(c, "controller", "k_lat", k.k_lat);
      k.k_heading = number(c, "controller", "k_heading", k.k_heading);
      k.k_delta = number(c, "controller", "k_delta", k.k_delta);
      k.comfort_decel = number(c, "controller", "comfort_decel", k.comfort_decel);
    }
    if (j.contains("episode")) {
      const json& e = j.at("episode");
      auto& ep = cfg.episode;
      check_keys(e, "episode", {"control_dt", "replan_period", "timeout", "sensor_range", "history_samples"});
      ep.control_dt = number(e, "episode", "control_dt", ep.control_dt);
      ep.replan_period = number(e, "episode", "replan_period", ep.replan_period);
      ep.timeout = number(e, "episode", "timeout", ep.timeout);
      ep.sensor_range = number(e, "episode", "sensor_range", ep.sensor_range);
      ep.history_samples = static_cast<int>(number(e, "episode", "history_samples", ep.history_samples));
    }
    if (j.contains("randomization")) {
      const json& r = j.at("randomization");
      auto& rz = cfg.randomization;
      check_keys(r, "randomization", {"agent", "gap", "trigger", "speed"});
      rz.enabled = true;
      rz.agent = static_cast<AgentId>(required_number(r, "randomization", "agent"));
      std::tie(rz.gap_min, rz.gap_max) = range(r, "randomization", "gap", {rz.gap_min, rz.gap_max});
      std::tie(rz.trigger_min, rz.trigger_max) =
          range(r, "randomization", "trigger", {rz.trigger_min, rz.trigger_max});
      std::tie(rz.speed_min, rz.speed_max) = range(r, "randomization", "speed", {rz.speed_min, rz.speed_max});
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("world config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read world config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_world_config(ss.str());
}

WorldConfig randomize(const WorldConfig& cfg, std::uint64_t seed) {
  WorldConfig out = cfg;
  if (!cfg.randomization.enabled) return out;
  const auto& rz = cfg.randomization;
  std::mt19937_64 rng(seed);
  // Fixed draw order: gap, trigger, speed.
  const double gap = std::uniform_real_distribution<double>(rz.gap_min, rz.gap_max)(rng);
  const double trigger = std::uniform_real_distribution<double>(rz.trigger_min, rz.trigger_max)(rng);
  const double speed = std::uniform_real_distribution<double>(rz.speed_min, rz.speed_max)(rng);
  for (auto& a : out.agents) {
    if (a.id != rz.agent) continue;
    if (a.behavior == AgentBehavior::Scripted) throw std::invalid_argument("cannot randomize a scripted agent");
    const Polyline& ref = out.map->reference_line({a.lane});
    const double s_ego = ref.project({out.ego.initial.x, out.ego.initial.y}).s;
    // Back-project the onset gap to t = 0; never start overlapping the ego.
    const double closing = (out.ego.initial.v - speed) * trigger;
    const double s = s_ego + out.ego.params.half_length + a.shape.half_length + std::max(gap + closing, 1.0);
    const Point2 p = ref.point_at(s);
    a.initial = {p.x, p.y, ref.heading_at(s), speed};
    a.desired_speed = speed;
    a.switch_time = trigger;
  }
  return out;
}

}  // namespace riskplan
