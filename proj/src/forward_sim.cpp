#include "riskplan/forward_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace riskplan {
namespace {

constexpr int kAgentSubsteps = 2;
constexpr double kIntentSpeedChange = 5.0;  // m/s, matches a 1 m/s^2 rollout over 5 s

double wrap(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

AgentState as_agent(const EgoState& e) { return {e.x, e.y, e.theta, e.v}; }

AgentShape ego_shape(const VehicleParams& p) { return {p.half_length, p.half_width}; }

bool boxes_may_touch(const Point2& a, double ra, const Point2& b, double rb) {
  return distance(a, b) <= ra + rb;
}

double radius(const AgentShape& s) { return std::hypot(s.half_length, s.half_width); }

bool any_intersect(const std::vector<Polygon>& a, const Polygon& b) {
  return std::any_of(a.begin(), a.end(), [&b](const Polygon& p) { return polygons_intersect(p, b); });
}

const Polyline& current_lane_reference(const WorldSnapshot& world, const PolicyContext& policy) {
  const Point2 p{world.ego.x, world.ego.y};
  auto match = world.map->locate(p, world.ego.theta);
  if (!match) match = world.map->locate(p, world.ego.theta, kOffLaneMargin);
  if (!match) return policy.reference;
  return world.map->reference_line({match->lane});
}

// Ego longitudinal command from IDM with an optional virtual stop line.
double ego_accel(const EgoState& ego, const VehicleParams& params, const Polyline& reference,
                 const std::vector<TrafficParticipant>& others, double target_speed, std::optional<double> stop_s,
                 bool path_only, const ForwardSimConfig& cfg) {
  const TrafficParticipant self{-1, as_agent(ego), ego_shape(params)};
  auto leader = find_leader(self, reference, others, cfg.leader_lateral_margin, path_only);
  if (stop_s) {
    const double gap = *stop_s - reference.project({ego.x, ego.y}).s - params.half_length;
    if (!leader || gap < leader->gap) leader = LeaderInfo{gap, 0.0, -2};
  }
  return idm_acceleration(ego.v, target_speed, leader, cfg.ego_driver);
}

// Rate-level control realising the commanded acceleration and steering at
// the next step, so the rollout stays exactly on the ego dynamics.
Control realise(const EgoState& ego, double accel, double steer, double dt) {
  return {(accel - ego.a) / dt, (steer - ego.delta) / dt};
}

struct KeyDriver {
  AgentId id;
  const Polyline* reference;  // nullptr -> open-loop replay
  double desired_speed;
};

enum class EgoMode { Policy, Fallback };

Scenario rollout(const WorldSnapshot& world, const PredictionBundle& bundle, const IntentionCombination& combo,
                 const std::vector<AgentId>& key_vehicles, const PolicyContext& policy, EgoMode mode,
                 double fallback_offset_m, const ForwardSimConfig& cfg) {
  const int H = cfg.horizon_steps;
  const VehicleParams& params = world.ego_params;

  Scenario sc;
  sc.policy_id = policy.policy.id;
  sc.combination = combo;
  sc.key_vehicles = key_vehicles;
  sc.probability = combo.probability;
  sc.fallback = mode == EgoMode::Fallback;

  std::vector<KeyDriver> drivers;
  for (const auto& choice : combo.choices) {
    const IntentionSet& set = bundle.set_for(choice.agent);
    const PredictedTrajectory& pred = set.predictions.at(choice.prediction);
    if (static_cast<int>(pred.states.size()) < H + 1) throw std::invalid_argument("prediction shorter than horizon");
    AgentTrajectory traj{choice.agent, set.shape, false, {pred.states.front()}};
    traj.states.reserve(static_cast<std::size_t>(H) + 1);
    const bool key = std::find(key_vehicles.begin(), key_vehicles.end(), choice.agent) != key_vehicles.end();
    traj.key = key;
    sc.agents.push_back(std::move(traj));

    KeyDriver d{choice.agent, nullptr, 0.0};
    if (key && !pred.intention.lateral.empty()) {
      d.reference = &world.map->reference_line(pred.intention.lateral);
      const double v0 = pred.states.front().speed;
      const double limit = world.map->lane(pred.intention.lateral.front()).speed_limit;
      switch (pred.intention.longitudinal) {
        case LonIntent::Maintain:
          d.desired_speed = v0;
          break;
        case LonIntent::Accelerate:
          d.desired_speed = std::min(v0 + kIntentSpeedChange, std::max(v0, limit));
          break;
        case LonIntent::Decelerate:
          d.desired_speed = std::max(0.0, v0 - kIntentSpeedChange);
          break;
      }
    }
    drivers.push_back(d);
  }

  const Polyline& lane_ref = current_lane_reference(world, policy);
  const Polyline& ego_ref = mode == EgoMode::Policy ? policy.reference : lane_ref;
  const double ego_offset = mode == EgoMode::Policy ? 0.0 : fallback_offset_m;

  sc.ego.reserve(static_cast<std::size_t>(H) + 1);
  sc.ego.push_back(world.ego);
  const double ego_radius = std::hypot(params.half_length, params.half_width);

  std::vector<TrafficParticipant> others;
  for (int t = 0; t < H; ++t) {
    const EgoState& ego = sc.ego.back();

    // Synchronous update: every command uses the states at step t.
    others.clear();
    for (const auto& a : sc.agents) others.push_back({a.id, a.states.back(), a.shape});

    double accel = 0.0;
    if (mode == EgoMode::Policy) {
      // A bypass path is built to clear the blocker the ego is still lined up with.
      accel = ego_accel(ego, params, ego_ref, others, policy.target_speed, policy.stop_s,
                        policy.policy.lateral == LateralPolicy::Bypass, cfg);
    } else {
      accel = -std::min(cfg.ego_driver.comfort_decel, ego.v / cfg.dt);
    }
    const double lookahead = std::max(cfg.ego_driver.min_lookahead, cfg.ego_driver.lookahead_time * ego.v);
    const double steer =
        pure_pursuit_steer(as_agent(ego), ego_ref, lookahead, params.wheelbase, ego_offset, params.max_steer);

    std::vector<AgentState> next(sc.agents.size());
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      const AgentTrajectory& a = sc.agents[i];
      const KeyDriver& d = drivers[i];
      if (d.reference == nullptr) {
        const auto& pred = bundle.set_for(a.id).predictions[combo.choice_for(a.id)];
        next[i] = pred.states[static_cast<std::size_t>(t) + 1];
        continue;
      }
      const AgentState& s = a.states.back();
      std::vector<TrafficParticipant> around;
      around.push_back({-1, as_agent(ego), ego_shape(params)});
      for (std::size_t j = 0; j < others.size(); ++j) {
        if (j != i) around.push_back(others[j]);
      }
      const TrafficParticipant self{a.id, s, a.shape};
      const auto leader = find_leader(self, *d.reference, around, cfg.leader_lateral_margin);
      const double acc = idm_acceleration(s.speed, d.desired_speed, leader, cfg.agent_driver);
      const double la = std::max(cfg.agent_driver.min_lookahead, cfg.agent_driver.lookahead_time * s.speed);
      const double st = pure_pursuit_steer(s, *d.reference, la, a.shape.wheelbase());
      AgentState n = s;
      for (int k = 0; k < kAgentSubsteps; ++k) n = agent_step(n, acc, st, a.shape.wheelbase(), cfg.dt / kAgentSubsteps);
      next[i] = n;
    }

    sc.ego.push_back(step(ego, realise(ego, accel, steer, cfg.dt), cfg.dt, params));
    for (std::size_t i = 0; i < sc.agents.size(); ++i) sc.agents[i].states.push_back(next[i]);

    if (sc.collision_step < 0) {
      const EgoState& e = sc.ego.back();
      const Polygon body = ego_footprint(e, params);
      for (const auto& a : sc.agents) {
        const AgentState& s = a.states.back();
        if (!boxes_may_touch({e.x, e.y}, ego_radius, s.position(), radius(a.shape))) continue;
        if (polygons_intersect(body, footprint(s, a.shape))) {
          sc.collision_step = t + 1;
          break;
        }
      }
    }
  }
  return sc;
}

}  // namespace

void DriverModelParams::validate() const {
  for (double v : {time_headway, min_gap, max_accel, comfort_decel, max_decel, exponent, lookahead_time, min_lookahead}) {
    if (!(v > 0.0)) throw std::invalid_argument("driver model parameters must be positive");
  }
  if (max_decel < comfort_decel) throw std::invalid_argument("max_decel must be at least comfort_decel");
}

double idm_acceleration(double speed, double desired_speed, const std::optional<LeaderInfo>& leader,
                        const DriverModelParams& p) {
  double free_term = 0.0;
  if (desired_speed <= 1e-3) {
    free_term = speed > 0.0 ? -p.comfort_decel : 0.0;
  } else {
    free_term = p.max_accel * (1.0 - std::pow(speed / desired_speed, p.exponent));
    // Above the desired speed, slow down no harder than comfortably.
    if (speed > desired_speed) free_term = std::max(free_term, -p.comfort_decel);
  }
  double interaction = 0.0;
  if (leader) {
    if (leader->gap <= 0.01) return -p.max_decel;
    const double dv = speed - leader->speed;
    const double s_star = p.min_gap + std::max(0.0, speed * p.time_headway +
                                                         speed * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    interaction = -p.max_accel * (s_star / leader->gap) * (s_star / leader->gap);
  }
  return std::clamp(free_term + interaction, -p.max_decel, p.max_accel);
}

std::optional<LeaderInfo> find_leader(const TrafficParticipant& self, const Polyline& reference,
                                      const std::vector<TrafficParticipant>& others, double lateral_margin,
                                      bool path_only) {
  const auto me = reference.project(self.state.position());
  std::optional<LeaderInfo> best;
  for (const auto& o : others) {
    if (o.id == self.id) continue;
    const auto pr = reference.project(o.state.position());
    if (pr.s <= me.s) continue;
    const double reach = self.shape.half_width + o.shape.half_width + lateral_margin;
    // In the follower's way now or on the path it is steering to.
    const bool beside_now = path_only || std::abs(pr.d - me.d) >= reach;
    if (beside_now && std::abs(pr.d) >= reach) continue;
    const double gap = pr.s - me.s - self.shape.half_length - o.shape.half_length;
    if (best && gap >= best->gap) continue;
    const double along = o.state.speed * std::cos(wrap(o.state.heading - reference.heading_at(pr.s)));
    best = LeaderInfo{gap, std::max(0.0, along), o.id};
  }
  return best;
}

const std::vector<Polygon>& ForwardReachableSet::at(int step) const {
  if (step < 0 || step >= static_cast<int>(steps.size())) throw std::out_of_range("FRS step outside horizon");
  return steps[static_cast<std::size_t>(step)].polygons;
}

ForwardReachableSet compute_frs(const IntentionSet& predictions, double inflation) {
  if (predictions.predictions.empty()) throw std::invalid_argument("compute_frs needs at least one prediction");
  ForwardReachableSet frs;
  frs.agent = predictions.agent;
  std::size_t horizon = predictions.predictions.front().states.size();
  for (const auto& p : predictions.predictions) horizon = std::min(horizon, p.states.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<AgentState> poses;
    std::vector<Polygon> boxes;
    for (const auto& p : predictions.predictions) {
      const AgentState& s = p.states[t];
      if (std::find(poses.begin(), poses.end(), s) != poses.end()) continue;
      poses.push_back(s);
      boxes.push_back(footprint(s, predictions.shape, inflation));
    }
    frs.steps.push_back({static_cast<int>(t), occupancy_union(boxes)});
  }
  return frs;
}

const IntentionSet& PredictionBundle::set_for(AgentId id) const {
  for (const auto& s : sets) {
    if (s.agent == id) return s;
  }
  throw std::out_of_range("no predictions for agent " + std::to_string(id));
}

PredictionBundle build_prediction_bundle(const WorldSnapshot& world, const PredictionConfig& prediction,
                                         const CombinationCaps& caps, double frs_inflation,
                                         const std::map<AgentId, NoiseSpec>& noise) {
  PredictionBundle b;
  for (const auto& track : world.agents) {
    IntentionSet set = predict_agent(track, *world.map, prediction);
    if (const auto it = noise.find(track.id); it != noise.end()) set = inject_noise(set, it->second);
    b.frs.emplace(track.id, compute_frs(set, frs_inflation));
    b.sets.push_back(std::move(set));
  }
  b.combinations = intention_combinations(b.sets, caps);
  return b;
}

const AgentTrajectory* Scenario::agent(AgentId id) const {
  for (const auto& a : agents) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

Polygon ego_footprint(const EgoState& s, const VehicleParams& params, double inflation) {
  return make_box({s.x, s.y}, s.theta, params.half_length, params.half_width, inflation);
}

std::vector<Polygon> policy_corridor(const WorldSnapshot& world, const PolicyContext& policy,
                                     const ForwardSimConfig& cfg) {
  const double horizon = cfg.horizon_steps * cfg.dt;
  const double reach =
      std::max(20.0, world.ego.v * horizon + 0.5 * cfg.ego_driver.max_accel * horizon * horizon);
  const double half = world.ego_params.half_width + cfg.corridor_margin;
  std::vector<Polygon> out;
  std::vector<const Polyline*> lines;
  for (const auto& l : policy.corridor) lines.push_back(&l);
  if (lines.empty()) lines.push_back(&policy.reference);
  for (const Polyline* line : lines) {
    const double s0 = line->project({world.ego.x, world.ego.y}).s;
    out.push_back(strip_polygon(*line, s0 - world.ego_params.half_length - 5.0, s0 + reach, half));
  }
  return out;
}

std::vector<AgentId> select_key_vehicles(const WorldSnapshot& world, const PredictionBundle& bundle,
                                         const IntentionCombination& combo, const PolicyContext& policy,
                                         const ForwardSimConfig& cfg) {
  const auto corridor = policy_corridor(world, policy, cfg);
  const Point2 ego{world.ego.x, world.ego.y};
  std::vector<AgentId> keys;

  for (const auto& choice : combo.choices) {
    const auto it = bundle.frs.find(choice.agent);
    if (it == bundle.frs.end()) continue;
    const bool hit = std::any_of(it->second.steps.begin(), it->second.steps.end(), [&](const TimedOccupancy& occ) {
      return std::any_of(corridor.begin(), corridor.end(),
                         [&](const Polygon& c) { return any_intersect(occ.polygons, c); });
    });
    if (hit) keys.push_back(choice.agent);
  }

  // Nearest leader on the ego's current lane.
  if (const auto match = world.map->locate(ego, world.ego.theta)) {
    const Lane& lane = world.map->lane(match->lane);
    const Polyline& ref = world.map->reference_line({lane.id});
    const double s_ego = ref.project(ego).s;
    std::optional<std::pair<double, AgentId>> nearest;
    for (const auto& choice : combo.choices) {
      const auto& st = bundle.set_for(choice.agent).predictions.at(choice.prediction).states.front();
      const auto pr = ref.project(st.position());
      if (pr.s <= s_ego || std::abs(pr.d) > lane.width * 0.5) continue;
      if (!nearest || pr.s - s_ego < nearest->first) nearest = {pr.s - s_ego, choice.agent};
    }
    if (nearest && std::find(keys.begin(), keys.end(), nearest->second) == keys.end()) keys.push_back(nearest->second);
  }

  auto dist = [&](AgentId id) {
    return distance(ego, bundle.set_for(id).predictions.front().states.front().position());
  };
  std::stable_sort(keys.begin(), keys.end(), [&](AgentId a, AgentId b) {
    const double da = dist(a), db = dist(b);
    return da != db ? da < db : a < b;
  });
  if (keys.size() > cfg.max_key_vehicles) keys.resize(cfg.max_key_vehicles);
  return keys;
}

Scenario simulate_scenario(const WorldSnapshot& world, const PredictionBundle& bundle,
                           const IntentionCombination& combo, const std::vector<AgentId>& key_vehicles,
                           const PolicyContext& policy, const ForwardSimConfig& cfg) {
  for (AgentId id : key_vehicles) (void)combo.choice_for(id);  // key vehicles must be part of the combination
  return rollout(world, bundle, combo, key_vehicles, policy, EgoMode::Policy, 0.0, cfg);
}

SafetyResult safety_assess(const Scenario& scenario, const PredictionBundle& bundle,
                           const VehicleParams& ego_params) {
  for (int t = 0; t <= scenario.steps(); ++t) {
    const EgoState& e = scenario.ego[static_cast<std::size_t>(t)];
    const Polygon body = ego_footprint(e, ego_params);
    for (const auto& a : scenario.agents) {
      bool hit = false;
      if (a.key) {
        hit = polygons_intersect(body, footprint(a.states[static_cast<std::size_t>(t)], a.shape));
      } else {
        const auto it = bundle.frs.find(a.id);
        if (it != bundle.frs.end() && t < static_cast<int>(it->second.steps.size())) {
          hit = any_intersect(it->second.at(t), body);
        }
      }
      if (hit) return {false, t, a.id};
    }
  }
  return {};
}

double fallback_offset(const WorldSnapshot& world, const PredictionBundle& bundle, const Scenario& failed,
                       const SafetyResult& failure, const PolicyContext& policy, const ForwardSimConfig& cfg) {
  if (failure.pass) return 0.0;
  const AgentTrajectory* agent = failed.agent(failure.agent);
  std::vector<Polygon> blocked;
  if (agent != nullptr && agent->key) {
    blocked.push_back(footprint(agent->states.at(static_cast<std::size_t>(failure.step)), agent->shape));
  } else if (const auto it = bundle.frs.find(failure.agent); it != bundle.frs.end()) {
    blocked = it->second.at(failure.step);
  }
  if (blocked.empty()) return 0.0;

  Point2 centroid{0.0, 0.0};
  double area = 0.0;
  for (const auto& p : blocked) {
    centroid = centroid + p.centroid() * p.area();
    area += p.area();
  }
  centroid = centroid * (1.0 / area);

  const Polyline& lane_ref = current_lane_reference(world, policy);
  const auto ego_pr = lane_ref.project({world.ego.x, world.ego.y});
  const double side = lane_ref.project(centroid).d > ego_pr.d ? -1.0 : 1.0;

  // Largest offset (0.25 m grid) whose shifted footprints over the next
  // stretch of lane stay inside the drivable area.
  const Polygon& drivable = world.map->drivable();
  const VehicleParams& p = world.ego_params;
  const double stretch = std::max(10.0, world.ego.v * world.ego.v / (2.0 * cfg.ego_driver.comfort_decel)) + p.half_length;
  for (double mag = cfg.fallback_max_offset; mag > 1e-9; mag -= 0.25) {
    const double d = side * mag;
    bool inside = true;
    for (double ds = 0.0; ds <= stretch && inside; ds += 2.0) {
      const double s = ego_pr.s + ds;
      const Polygon box = make_box(lane_ref.frenet_to_cartesian(s, d), lane_ref.heading_at(s), p.half_length,
                                   p.half_width);
      for (const auto& v : box.vertices()) {
        if (!drivable.contains(v)) {
          inside = false;
          break;
        }
      }
    }
    if (inside) return d;
  }
  return 0.0;
}

Scenario simulate_with_fallback(const WorldSnapshot& world, const PredictionBundle& bundle,
                                const IntentionCombination& combo, const std::vector<AgentId>& key_vehicles,
                                const PolicyContext& policy, const Scenario& failed, const SafetyResult& failure,
                                const ForwardSimConfig& cfg) {
  const double offset = fallback_offset(world, bundle, failed, failure, policy, cfg);
  Scenario sc = rollout(world, bundle, combo, key_vehicles, policy, EgoMode::Fallback, offset, cfg);
  sc.unsafe = !safety_assess(sc, bundle, world.ego_params).pass;
  return sc;
}

std::vector<Scenario> render_scenarios(const WorldSnapshot& world, const PredictionBundle& bundle,
                                       const PolicyContext& policy, const ForwardSimConfig& cfg) {
  std::vector<Scenario> out;
  out.reserve(bundle.combinations.size());
  for (std::size_t i = 0; i < bundle.combinations.size(); ++i) {
    const auto& combo = bundle.combinations[i];
    const auto keys = select_key_vehicles(world, bundle, combo, policy, cfg);
    Scenario sc = simulate_scenario(world, bundle, combo, keys, policy, cfg);
    const SafetyResult check = safety_assess(sc, bundle, world.ego_params);
    if (!check.pass) sc = simulate_with_fallback(world, bundle, combo, keys, policy, sc, check, cfg);
    sc.id = static_cast<int>(i);
    out.push_back(std::move(sc));
  }
  return out;
}

}  // namespace riskplan
