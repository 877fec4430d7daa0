#include "riskplan/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace riskplan {
namespace {

struct LateralOption {
  LateralPolicy kind;
  LaneSequence target;
  double offset;
  bool on_route;
};

bool all_on_route(const LaneSequence& seq, const Route& route) {
  return std::all_of(seq.begin(), seq.end(), [&](const LaneId& id) {
    return std::find(route.lanes.begin(), route.lanes.end(), id) != route.lanes.end();
  });
}

// Successor chain from `start` sharing the most lanes with the route.
LaneSequence route_sequence(const LaneMap& map, const LaneId& start, const Route& route, int depth) {
  const auto seqs = map.sequences_from(start, depth);
  LaneSequence best = seqs.front();
  long best_score = -1;
  for (const auto& s : seqs) {
    const long score = std::count_if(s.begin(), s.end(), [&](const LaneId& id) {
      return std::find(route.lanes.begin(), route.lanes.end(), id) != route.lanes.end();
    });
    if (score > best_score) {
      best = s;
      best_score = score;
    }
  }
  return best;
}

// Lateral offset that clears the nearest static blocker ahead in the ego
// lane, or nullopt when there is none or no side has room.
std::optional<double> bypass_offset(const WorldSnapshot& world, const Polyline& ref, const LaneId& lane,
                                    const PolicyEnumerationConfig& cfg) {
  const auto& map = *world.map;
  const double s_ego = ref.project({world.ego.x, world.ego.y}).s;
  const double half_lane = map.lane(lane).width / 2.0;
  std::optional<std::pair<double, const AgentTrack*>> nearest;
  for (const auto& a : world.agents) {
    if (a.history.empty()) continue;
    const auto& st = a.history.back();
    if (std::abs(st.speed) >= cfg.blocker_speed) continue;
    const auto pr = ref.project(st.position());
    const double ahead = pr.s - s_ego;
    if (ahead <= 0.0 || ahead > cfg.sensor_range) continue;
    if (std::abs(pr.d) - a.shape.half_width >= half_lane) continue;
    if (!nearest || ahead < nearest->first) nearest = {ahead, &a};
  }
  if (!nearest) return std::nullopt;

  const auto& blocker = *nearest->second;
  const auto pr = ref.project(blocker.history.back().position());
  const double reach = blocker.shape.half_width + world.ego_params.half_width + cfg.bypass_margin;
  std::vector<double> sides{pr.d + reach, pr.d - reach};
  std::stable_sort(sides.begin(), sides.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  for (double off : sides) {
    // The ego box must fit beside the blocker.
    const double s = pr.s;
    const Point2 c = ref.frenet_to_cartesian(s, off);
    const Polygon box = make_box(c, ref.heading_at(s), world.ego_params.half_length, world.ego_params.half_width);
    bool inside = true;
    for (const auto& v : box.vertices()) inside = inside && map.drivable().contains(v);
    if (inside) return off;
  }
  return std::nullopt;
}

}  // namespace

std::string to_string(LateralPolicy p) {
  switch (p) {
    case LateralPolicy::LaneKeep: return "LaneKeep";
    case LateralPolicy::LaneChange: return "LaneChange";
    case LateralPolicy::Bypass: return "Bypass";
    case LateralPolicy::InLaneSiding: return "InLaneSiding";
  }
  return "?";
}

std::string to_string(LongitudinalPolicy p) {
  switch (p) {
    case LongitudinalPolicy::Maintain: return "Maintain";
    case LongitudinalPolicy::Accelerate: return "Accelerate";
    case LongitudinalPolicy::Decelerate: return "Decelerate";
    case LongitudinalPolicy::StopAt: return "StopAt";
  }
  return "?";
}

std::string PolicySpec::name() const {
  std::string out = to_string(lateral);
  if (lateral == LateralPolicy::LaneChange) out += "(" + to_string(target) + ")";
  if (lateral == LateralPolicy::Bypass || lateral == LateralPolicy::InLaneSiding) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "(%+.2f)", lateral_offset);
    out += buf;
  }
  out += "-" + to_string(longitudinal);
  return out;
}

bool PolicySpec::same_behavior(const PolicySpec& o) const {
  return lateral == o.lateral && target == o.target && std::abs(lateral_offset - o.lateral_offset) < 1e-6 &&
         longitudinal == o.longitudinal &&
         (longitudinal != LongitudinalPolicy::StopAt || std::abs(stop_s - o.stop_s) < 1e-6);
}

void PolicyEnumerationConfig::validate() const {
  if (max_policies == 0) throw std::invalid_argument("max_policies must be positive");
  if (!(speed_step > 0.0) || !(sensor_range > 0.0)) throw std::invalid_argument("invalid enumeration ranges");
  if (sequence_depth < 1) throw std::invalid_argument("sequence_depth must be at least 1");
}

LaneId current_lane(const WorldSnapshot& world) {
  const Point2 p{world.ego.x, world.ego.y};
  auto match = world.map->locate(p, world.ego.theta);
  // A bypass can leave the ego beside its own lane, over an opposing one.
  if (!match) match = world.map->locate(p, world.ego.theta, kOffLaneMargin);
  if (!match) throw std::invalid_argument("ego is not on a mapped lane");
  return match->lane;
}

std::vector<PolicySpec> enumerate_policies(const WorldSnapshot& world, const Route& route,
                                           const PolicyEnumerationConfig& cfg) {
  cfg.validate();
  const auto& map = *world.map;
  const LaneId lane = current_lane(world);
  const LaneSequence keep = route_sequence(map, lane, route, cfg.sequence_depth);

  std::vector<LateralOption> lateral{{LateralPolicy::LaneKeep, keep, 0.0, all_on_route(keep, route)}};
  const auto off = cfg.lane_keep_only ? std::nullopt : bypass_offset(world, map.reference_line(keep), lane, cfg);
  if (off) lateral.push_back({LateralPolicy::Bypass, keep, *off, all_on_route(keep, route)});
  for (const auto& side : {map.lane(lane).left, map.lane(lane).right}) {
    if (!side || cfg.lane_keep_only) continue;
    const LaneSequence seq = route_sequence(map, *side, route, cfg.sequence_depth);
    lateral.push_back({LateralPolicy::LaneChange, seq, 0.0, all_on_route(seq, route)});
  }
  std::stable_sort(lateral.begin(), lateral.end(),
                   [](const LateralOption& a, const LateralOption& b) { return a.on_route && !b.on_route; });

  std::vector<PolicySpec> out;
  for (const auto& opt : lateral) {
    for (auto lon : {LongitudinalPolicy::Maintain, LongitudinalPolicy::Accelerate, LongitudinalPolicy::Decelerate}) {
      PolicySpec p;
      p.lateral = opt.kind;
      p.target = opt.target;
      p.lateral_offset = opt.offset;
      p.longitudinal = lon;
      out.push_back(p);
    }
    if (opt.kind == LateralPolicy::LaneKeep && route.stop_point) {
      const auto& ref = map.reference_line(keep);
      const double s_ego = ref.project({world.ego.x, world.ego.y}).s;
      const double s_stop = ref.project(*route.stop_point).s;
      if (s_stop > s_ego && s_stop - s_ego <= cfg.sensor_range) {
        PolicySpec p;
        p.target = keep;
        p.longitudinal = LongitudinalPolicy::StopAt;
        p.stop_s = s_stop;
        // Route-mandated stop outranks the free longitudinal options.
        out.insert(out.begin(), p);
      }
    }
  }
  if (out.size() > cfg.max_policies) out.resize(cfg.max_policies);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

PolicyContext make_policy_context(const WorldSnapshot& world, const PolicySpec& policy, const Route& route,
                                  const PolicyEnumerationConfig& cfg) {
  const auto& map = *world.map;
  if (policy.target.empty()) throw std::invalid_argument("policy has no target lane sequence");
  for (const auto& id : policy.target) {
    if (!map.has_lane(id)) throw std::invalid_argument("policy target lane not in map: " + id);
  }
  const Polyline& base = map.reference_line(policy.target);
  PolicyContext ctx{policy, policy.lateral_offset != 0.0 ? base.offset(policy.lateral_offset) : base, {}, 0.0,
                    std::nullopt};
  ctx.corridor.push_back(ctx.reference);
  if (policy.lateral == LateralPolicy::LaneChange) {
    const LaneSequence keep = route_sequence(map, current_lane(world), route, cfg.sequence_depth);
    ctx.corridor.insert(ctx.corridor.begin(), map.reference_line(keep));
  }

  const double v = std::max(0.0, world.ego.v);
  const double limit = map.lane(policy.target.front()).speed_limit;
  switch (policy.longitudinal) {
    case LongitudinalPolicy::Maintain:
      ctx.target_speed = v;
      break;
    case LongitudinalPolicy::Accelerate:
      ctx.target_speed = std::min(v + cfg.speed_step, std::max(v, limit));
      break;
    case LongitudinalPolicy::Decelerate:
      ctx.target_speed = std::max(0.0, v - cfg.speed_step);
      break;
    case LongitudinalPolicy::StopAt:
      ctx.target_speed = std::min(route.desired_speed, limit);
      // stop_s is measured on the unshifted centreline.
      ctx.stop_s = ctx.reference.project(base.point_at(policy.stop_s)).s;
      break;
  }
  return ctx;
}

void RewardWeights::validate() const {
  for (double w : {safety, efficiency, navigation, risk, uncertainty}) {
    if (w < 0.0) throw std::invalid_argument("reward weights must be non-negative");
  }
  if (!(safe_distance > 0.0) || !(divergence_scale > 0.0)) throw std::invalid_argument("invalid reward scales");
}

double PolicyReward::combine(const PolicyReward& r, const RewardWeights& w) {
  return -(w.safety * r.safety + w.efficiency * r.efficiency + w.navigation * r.navigation + w.risk * r.risk +
           w.uncertainty * r.uncertainty);
}

double scenario_clearance(const EgoState& ego, const Scenario& scenario, int step, const VehicleParams& vehicle) {
  const Polygon body = ego_footprint(ego, vehicle);
  double best = 1e9;
  for (const auto& a : scenario.agents) {
    if (step < 0 || step >= static_cast<int>(a.states.size())) continue;
    best = std::min(best, polygon_distance(body, footprint(a.states[static_cast<std::size_t>(step)], a.shape)));
  }
  return best;
}

int lane_edits(const LaneSequence& a, const LaneSequence& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double navigation_cost(const PolicySpec& policy, const Route& route, const LaneMap& map, const LaneId& ego_lane) {
  if (route.lanes.empty()) return 0.0;
  auto at = std::find(route.lanes.begin(), route.lanes.end(), ego_lane);
  if (at == route.lanes.end() && map.has_lane(ego_lane)) {
    const auto& l = map.lane(ego_lane);
    at = std::find_if(route.lanes.begin(), route.lanes.end(),
                      [&](const LaneId& id) { return id == l.left.value_or("") || id == l.right.value_or(""); });
  }
  if (at == route.lanes.end()) at = route.lanes.begin();
  const auto len = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(policy.target.size()), route.lanes.end() - at);
  const LaneSequence window(at, at + len);
  const std::size_t norm = std::max({policy.target.size(), window.size(), std::size_t{1}});
  return static_cast<double>(lane_edits(policy.target, window)) / static_cast<double>(norm);
}

PolicyReward evaluate_policy(const PolicySpec& policy, const ScenarioTree& scenarios, const TrajectoryTree& plan,
                             double rcp_objective, double navigation, double desired_speed, double tau_max, double dt,
                             const VehicleParams& vehicle, const RewardWeights& weights) {
  (void)policy;
  weights.validate();
  const int K = static_cast<int>(scenarios.branches.size());
  if (K != plan.num_branches()) throw std::invalid_argument("scenario and trajectory trees disagree on branches");
  const int H = plan.horizon();
  if (H < 1) throw std::invalid_argument("trajectory tree has no steps");

  double mass = 0.0;
  for (const auto& s : scenarios.branches) mass += s.probability;

  PolicyReward r;
  double mean_speed = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& sc = scenarios.branches[static_cast<std::size_t>(k)];
    const double p = sc.probability / mass;
    double shortfall = 0.0, speed = 0.0;
    for (int t = 1; t <= H; ++t) {
      const auto& node = plan.nodes()[static_cast<std::size_t>(plan.node_at(k, t))];
      const EgoState e = EgoState::from_vector(node.state);
      shortfall += std::max(0.0, weights.safe_distance - scenario_clearance(e, sc, t, vehicle));
      speed += e.v;
    }
    r.safety += p * shortfall / H;
    mean_speed += p * speed / H;
  }
  r.efficiency = std::abs(mean_speed - desired_speed);
  r.navigation = navigation;
  r.risk = rcp_objective / H;

  r.uncertainty = std::max(0.0, (tau_max - plan.branch_step() * dt) / tau_max);
  if (K > 1) {
    double spread = 0.0;
    int pairs = 0;
    for (int a = 0; a < K; ++a) {
      for (int b = a + 1; b < K; ++b) {
        const auto& na = plan.nodes()[static_cast<std::size_t>(plan.node_at(a, H))].state;
        const auto& nb = plan.nodes()[static_cast<std::size_t>(plan.node_at(b, H))].state;
        spread += std::hypot(na[kX] - nb[kX], na[kY] - nb[kY]);
        ++pairs;
      }
    }
    r.uncertainty += spread / pairs / weights.divergence_scale;
  }
  r.total = PolicyReward::combine(r, weights);
  return r;
}

}  // namespace riskplan
