#include "riskplan/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace riskplan {
namespace {

double tail_fraction(const PlannerConfig& cfg) {
  return cfg.mode == BranchMode::DynamicBranchRisk ? cfg.rcp.alpha : 1.0;
}

CostModel model_for(const PlannerConfig& cfg, const VehicleParams& vehicle) {
  CostModel m = cfg.cost;
  const CostModel layout = default_cost_model(vehicle);
  m.vehicle = vehicle;
  m.circle_offsets = layout.circle_offsets;
  m.circle_radius = layout.circle_radius;
  return m;
}

}  // namespace

std::string to_string(BranchMode mode) {
  switch (mode) {
    case BranchMode::NoBranch: return "no_branch";
    case BranchMode::FixedBranch: return "fixed_branch";
    case BranchMode::DynamicBranch: return "dynamic_branch";
    case BranchMode::DynamicBranchRisk: return "dynamic_branch_risk";
  }
  return "?";
}

BranchMode branch_mode_from_string(const std::string& s) {
  for (auto m : {BranchMode::NoBranch, BranchMode::FixedBranch, BranchMode::DynamicBranch, BranchMode::DynamicBranchRisk}) {
    if (to_string(m) == s) return m;
  }
  throw std::invalid_argument("unknown branch mode: " + s);
}

void PlannerConfig::validate() const {
  sim.ego_driver.validate();
  sim.agent_driver.validate();
  divergence.validate();
  cost.validate();
  rcp.validate();
  reward.validate();
  policies.validate();
  if (std::abs(sim.dt - prediction.dt) > 1e-12 || std::abs(sim.dt - divergence.dt) > 1e-12) {
    throw std::invalid_argument("simulation, prediction and divergence must share dt");
  }
  if (sim.horizon_steps != prediction.horizon_steps) {
    throw std::invalid_argument("simulation and prediction must share the horizon");
  }
  if (!(fixed_branch_time >= 0.0)) throw std::invalid_argument("fixed branch time must be non-negative");
}

ScenarioTree scenario_tree_for_mode(std::vector<Scenario> scenarios, const PlannerConfig& cfg) {
  if (scenarios.empty()) throw std::invalid_argument("no scenarios to branch");
  if (cfg.mode == BranchMode::NoBranch) {
    // Most likely scenario only; build_tree orders by probability then id.
    ScenarioTree full = build_tree(std::move(scenarios), cfg.divergence);
    Scenario best = full.branches.front();
    best.probability = 1.0;
    return build_tree({best}, cfg.divergence);
  }
  ScenarioTree tree = build_tree(std::move(scenarios), cfg.divergence);
  if (cfg.mode == BranchMode::FixedBranch) {
    const int fixed = static_cast<int>(std::lround(cfg.fixed_branch_time / cfg.divergence.dt));
    tree.branch_step = std::min(fixed, tree.horizon_steps);
  }
  return tree;
}

int select_policy(const std::vector<PolicyEvaluation>& evaluations, const std::optional<PolicySpec>& previous) {
  double best = -INFINITY;
  for (const auto& e : evaluations) {
    if (e.feasible) best = std::max(best, e.reward.total);
  }
  if (best == -INFINITY) return -1;
  const double tol = 1e-12 * std::max(1.0, std::abs(best));
  int chosen = -1;
  for (std::size_t i = 0; i < evaluations.size(); ++i) {
    const auto& e = evaluations[i];
    if (!e.feasible || e.reward.total < best - tol) continue;
    if (previous && e.policy.same_behavior(*previous)) return static_cast<int>(i);
    if (chosen < 0 || e.policy.id < evaluations[static_cast<std::size_t>(chosen)].policy.id) chosen = static_cast<int>(i);
  }
  return chosen;
}

PlanResult plan(const WorldSnapshot& world, const Route& route, const PlannerConfig& cfg,
                const std::optional<PolicySpec>& previous) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  if (!world.map) throw std::invalid_argument("world has no map");
  const double dt = cfg.sim.dt;
  const CostModel model = model_for(cfg, world.ego_params);
  RcpOptions rcp = cfg.rcp;
  rcp.alpha = tail_fraction(cfg);

  const PredictionBundle bundle =
      build_prediction_bundle(world, cfg.prediction, cfg.caps, cfg.sim.frs_inflation, cfg.noise);
  const std::vector<PolicySpec> policies = enumerate_policies(world, route, cfg.policies);
  if (policies.empty()) throw std::invalid_argument("no policies to evaluate");
  const LaneId ego_lane = current_lane(world);

  PlanResult out;
  for (const auto& policy : policies) {
    const PolicyContext ctx = make_policy_context(world, policy, route, cfg.policies);
    std::vector<Scenario> scenarios = render_scenarios(world, bundle, ctx, cfg.sim);
    for (auto& s : scenarios) s.policy_id = policy.id;
    PolicyEvaluation ev;
    ev.policy = policy;
    ev.feasible = std::any_of(scenarios.begin(), scenarios.end(), [](const Scenario& s) { return !s.unsafe; });
    ev.scenarios = scenario_tree_for_mode(std::move(scenarios), cfg);
    ev.scenarios.policy_id = policy.id;
    const RcpProblem problem = make_rcp_problem(ev.scenarios, bundle, ctx, world.map->drivable(), world.ego_params, dt);
    ev.solution = rcp_optimize(problem, model, rcp);
    ev.reward = evaluate_policy(policy, ev.scenarios, ev.solution.tree, ev.solution.objective,
                                navigation_cost(policy, route, *world.map, ego_lane), route.desired_speed,
                                cfg.divergence.tau_max, dt, world.ego_params, cfg.reward);
    out.evaluations.push_back(std::move(ev));
  }

  out.chosen = select_policy(out.evaluations, previous);
  if (out.chosen >= 0) {
    const auto& best = out.evaluations[static_cast<std::size_t>(out.chosen)];
    out.policy = best.policy;
    out.tree = best.solution.tree;
    out.scenarios = best.scenarios;
    out.risk = best.solution.risk;
  } else {
    // Every policy collides even with the fallback: execute the optimised
    // plan of the lane-keeping braking policy anyway.
    const auto lk = std::find_if(out.evaluations.begin(), out.evaluations.end(), [](const PolicyEvaluation& e) {
      return e.policy.lateral == LateralPolicy::LaneKeep && e.policy.longitudinal == LongitudinalPolicy::Decelerate;
    });
    const auto& source = lk != out.evaluations.end() ? *lk : out.evaluations.front();
    out.degraded = true;
    out.policy = source.policy;
    out.tree = source.solution.tree;
    out.scenarios = source.scenarios;
    out.risk = source.solution.risk;
  }
  out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace riskplan
