#include "riskplan/episode.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace riskplan {
namespace {

AgentState ego_as_agent(const EgoState& e) { return {e.x, e.y, e.theta, e.v}; }

AgentShape ego_shape(const VehicleParams& p) { return {p.half_length, p.half_width}; }

// Position along a waypoint script; equal consecutive times jump.
AgentState scripted_state(const AgentConfig& a, double t, const AgentState& previous) {
  const auto& w = a.waypoints;
  if (t <= w.front().t) return {w.front().x, w.front().y, previous.heading, 0.0};
  for (std::size_t i = w.size() - 1; i > 0; --i) {
    const Waypoint& lo = w[i - 1];
    const Waypoint& hi = w[i];
    if (t < lo.t || hi.t <= lo.t) continue;
    if (t > hi.t) break;
    const double f = (t - lo.t) / (hi.t - lo.t);
    const double dx = hi.x - lo.x, dy = hi.y - lo.y;
    const double len = std::hypot(dx, dy);
    const double heading = len > 1e-9 ? std::atan2(dy, dx) : previous.heading;
    return {lo.x + f * dx, lo.y + f * dy, heading, len / (hi.t - lo.t)};
  }
  return {w.back().x, w.back().y, previous.heading, 0.0};
}

struct AgentSim {
  const AgentConfig* cfg{nullptr};
  AgentState state;
  std::deque<AgentState> history;  // sampled at replanning instants
  bool switched{false};
};

AgentState advance_agent(AgentSim& self, const std::vector<TrafficParticipant>& participants, const LaneMap& map,
                         const DriverModelParams& driver, double t, double dt) {
  const AgentConfig& a = *self.cfg;
  if (a.behavior == AgentBehavior::Scripted) return scripted_state(a, t + dt, self.state);
  if (a.behavior == AgentBehavior::IntentionSwitch && t >= a.switch_time - 1e-9) self.switched = true;
  const Polyline& ref = map.reference_line({self.switched ? a.switch_lane : a.lane});
  std::vector<TrafficParticipant> others;
  for (const auto& p : participants) {
    if (p.id != a.id) others.push_back(p);
  }
  const auto leader = find_leader({a.id, self.state, a.shape}, ref, others);
  const double desired = a.desired_speed > 0.0 ? a.desired_speed : a.initial.speed;
  const double accel = idm_acceleration(self.state.speed, desired, leader, driver);
  const double lookahead = std::max(driver.min_lookahead, driver.lookahead_time * self.state.speed);
  const double steer = pure_pursuit_steer(self.state, ref, lookahead, a.shape.wheelbase());
  return agent_step(self.state, accel, steer, a.shape.wheelbase(), dt);
}

std::vector<AgentState> backfilled_history(const AgentState& s, int samples, double period) {
  std::vector<AgentState> out;
  for (int k = samples - 1; k >= 0; --k) {
    const double back = s.speed * period * k;
    out.push_back({s.x - back * std::cos(s.heading), s.y - back * std::sin(s.heading), s.heading, s.speed});
  }
  return out;
}

}  // namespace

std::string to_string(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::Running: return "running";
    case EpisodeOutcome::Completed: return "completed";
    case EpisodeOutcome::Collision: return "collision";
    case EpisodeOutcome::Timeout: return "timeout";
  }
  return "?";
}

EpisodeOutcome episode_outcome_from_string(const std::string& s) {
  for (auto o : {EpisodeOutcome::Running, EpisodeOutcome::Completed, EpisodeOutcome::Collision,
                 EpisodeOutcome::Timeout}) {
    if (to_string(o) == s) return o;
  }
  throw std::invalid_argument("unknown episode outcome: " + s);
}

bool MetricsAccumulator::add(const TraceStep& step, const std::map<AgentId, AgentShape>& shapes) {
  ++n_;
  last_t_ = step.t;
  sum_v_ += step.ego.v;
  sum_a2_ += step.ego.a * step.ego.a;
  m_.max_abs_acc = std::max(m_.max_abs_acc, std::abs(step.ego.a));
  m_.max_decel = std::max(m_.max_decel, -step.ego.a);
  const Polygon ego = footprint(ego_as_agent(step.ego), ego_shape_);
  bool contact = false;
  for (const auto& rec : step.agents) {
    const auto it = shapes.find(rec.id);
    const Polygon other = footprint(rec.state, it != shapes.end() ? it->second : AgentShape{});
    if (polygons_intersect(ego, other)) {
      contact = true;
      m_.min_distance = 0.0;
    } else {
      m_.min_distance = std::min(m_.min_distance, polygon_distance(ego, other));
    }
  }
  if (contact) m_.success = false;
  return contact;
}

EpisodeMetrics MetricsAccumulator::result() const {
  EpisodeMetrics m = m_;
  m.completion_time = last_t_;
  if (n_ > 0) {
    m.avg_speed = sum_v_ / static_cast<double>(n_);
    m.rms_acc = std::sqrt(sum_a2_ / static_cast<double>(n_));
  }
  return m;
}

EpisodeMetrics metrics_from_trace(const Trace& trace) {
  MetricsAccumulator acc(trace.ego_shape);
  for (const auto& s : trace.steps) acc.add(s, trace.agent_shapes);
  return acc.result();
}

int count_policy_switches(const Trace& trace) {
  int switches = 0;
  for (std::size_t i = 1; i < trace.plans.size(); ++i) {
    if (trace.plans[i].policy != trace.plans[i - 1].policy) ++switches;
  }
  return switches;
}

EpisodeResult run_episode(const WorldConfig& cfg_in, BranchMode mode, std::uint64_t seed, const PlanObserver& observer) {
  const WorldConfig cfg = randomize(cfg_in, seed);
  cfg.validate();
  const LaneMap& map = *cfg.map;
  const EpisodeConfig& ep = cfg.episode;
  PlannerConfig planner = cfg.planner;
  planner.mode = mode;
  const double plan_dt = planner.sim.dt;
  const VehicleParams& vp = cfg.ego.params;

  EpisodeResult out;
  Trace& trace = out.trace;
  trace.world = cfg.name;
  trace.mode = to_string(mode);
  trace.seed = seed;
  trace.control_dt = ep.control_dt;
  trace.ego_shape = ego_shape(vp);

  std::vector<AgentSim> agents;
  for (const auto& a : cfg.agents) {
    AgentSim sim{&a, a.initial, {}};
    if (a.behavior == AgentBehavior::Scripted) sim.state = scripted_state(a, 0.0, a.initial);
    agents.push_back(sim);
    trace.agent_shapes[a.id] = a.shape;
  }

  const Polyline& route_ref = map.reference_line(cfg.ego.route.lanes);
  const double s_start = route_ref.project({cfg.ego.initial.x, cfg.ego.initial.y}).s;
  const int plan_every = static_cast<int>(std::lround(ep.replan_period / ep.control_dt));
  const auto max_steps = static_cast<long>(std::ceil(ep.timeout / ep.control_dt - 1e-9));

  EgoState ego = cfg.ego.initial;
  MetricsAccumulator metrics(trace.ego_shape);
  std::optional<PolicySpec> previous;
  PlanResult current;
  bool have_plan = false;
  double plan_time = 0.0;

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * ep.control_dt;
    TraceStep rec;
    rec.t = t;
    rec.ego = ego;
    for (const auto& a : agents) rec.agents.push_back({a.cfg->id, a.state});

    const bool contact = metrics.add(rec, trace.agent_shapes);
    const double progress = route_ref.project({ego.x, ego.y}).s - s_start;
    if (contact) trace.outcome = EpisodeOutcome::Collision;
    else if (progress >= cfg.ego.route_length) trace.outcome = EpisodeOutcome::Completed;
    else if (k >= max_steps) trace.outcome = EpisodeOutcome::Timeout;
    if (trace.outcome != EpisodeOutcome::Running) {
      trace.steps.push_back(std::move(rec));
      break;
    }

    std::map<AgentId, AgentState> observed;
    for (const auto& a : agents) {
      if (distance(a.state.position(), {ego.x, ego.y}) <= ep.sensor_range) observed[a.cfg->id] = a.state;
    }

    if (k % plan_every == 0) {
      WorldSnapshot snap;
      snap.map = cfg.map;
      snap.time = t;
      snap.ego = ego;
      snap.ego_params = vp;
      for (auto& a : agents) {
        if (a.history.empty()) {
          for (const auto& s : backfilled_history(a.state, ep.history_samples, ep.replan_period)) a.history.push_back(s);
        } else {
          a.history.push_back(a.state);
          while (static_cast<int>(a.history.size()) > ep.history_samples) a.history.pop_front();
        }
        if (!observed.count(a.cfg->id)) continue;
        snap.agents.push_back({a.cfg->id, a.cfg->shape, {a.history.begin(), a.history.end()}});
      }
      planner.noise.clear();
      for (const auto& n : cfg.noise) {
        if (t >= n.start - 1e-9 && t < n.end - 1e-9 && observed.count(n.agent)) planner.noise[n.agent] = n.spec;
      }
      PlanRecord pr;
      pr.t = t;
      bool planned = false;
      try {
        current = plan(snap, cfg.ego.route, planner, previous);
        planned = true;
        have_plan = true;
        plan_time = t;
        out.plan_ms.push_back(current.elapsed_ms);
        previous = current.policy;
        pr.policy_id = current.policy.id;
        pr.policy = current.policy.name();
        pr.degraded = current.degraded;
        pr.branch_step = current.tree.branch_step();
        for (const auto& s : current.scenarios.branches) pr.probabilities.push_back(s.probability);
        pr.risk_weights = current.risk.q;
        pr.branch_safety = current.risk.xi;
        for (const auto& e : current.evaluations) {
          if (e.feasible) pr.rewards[e.policy.name()] = e.reward.total;
        }
        for (int b = 0; b < current.tree.num_branches(); ++b) {
          std::vector<Point2> pts;
          for (const auto& x : current.tree.branch_states(b)) pts.push_back({x[kX], x[kY]});
          pr.branches.push_back(std::move(pts));
        }
      } catch (const std::exception& e) {
        // The previous plan keeps running until it goes stale, then the
        // controller brakes.
        pr.policy = std::string("planner_error: ") + e.what();
        pr.degraded = true;
      }
      trace.plans.push_back(std::move(pr));
      if (planned && observer) observer(snap, planner, current);
      rec.replanned = true;
    }

    TrackCommand cmd;
    if (have_plan) {
      cmd = controller_track(current.tree, current.scenarios, t - plan_time, plan_dt, ep.replan_period, ego, observed,
                             cfg.controller, vp);
    } else {
      cmd.control = comfort_braking(ego, cfg.controller, vp);
      cmd.stale = true;
    }
    rec.control = cmd.control;
    rec.branch = cmd.branch;
    rec.policy_id = trace.plans.back().policy_id;
    rec.policy = trace.plans.back().policy;
    rec.degraded = trace.plans.back().degraded || cmd.stale;
    trace.steps.push_back(std::move(rec));

    // Every participant moves from the same pre-step snapshot.
    std::vector<TrafficParticipant> participants{{-1, ego_as_agent(ego), trace.ego_shape}};
    for (const auto& a : agents) participants.push_back({a.cfg->id, a.state, a.cfg->shape});
    std::vector<AgentState> next;
    for (auto& a : agents) {
      next.push_back(advance_agent(a, participants, map, planner.sim.agent_driver, t, ep.control_dt));
    }
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].state = next[i];
    ego = step(ego, cmd.control, ep.control_dt, vp);
  }

  out.metrics = metrics.result();
  return out;
}

void aggregate(BatchResult& batch) {
  if (batch.rows.empty()) throw std::invalid_argument("batch has no episodes");
  double decel = 0.0, dist = 0.0;
  int with_agents = 0, successes = 0;
  for (const auto& r : batch.rows) {
    decel += r.metrics.max_decel;
    if (std::isfinite(r.metrics.min_distance)) {
      dist += r.metrics.min_distance;
      ++with_agents;
    }
    if (r.metrics.success) ++successes;
  }
  const auto n = static_cast<double>(batch.rows.size());
  batch.mean_max_decel = decel / n;
  batch.mean_min_distance = with_agents > 0 ? dist / with_agents : std::numeric_limits<double>::infinity();
  batch.success_rate = successes / n;
}

BatchResult batch_run(const WorldConfig& cfg, BranchMode mode, int episodes, std::uint64_t base_seed) {
  if (episodes < 1) throw std::invalid_argument("batch needs at least one episode");
  BatchResult batch;
  batch.mode = mode;
  for (int i = 0; i < episodes; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    EpisodeResult r = run_episode(cfg, mode, seed);
    batch.rows.push_back({i, seed, r.metrics});
    batch.plan_ms.insert(batch.plan_ms.end(), r.plan_ms.begin(), r.plan_ms.end());
  }
  aggregate(batch);
  return batch;
}

}  // namespace riskplan
