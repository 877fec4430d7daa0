#include "riskplan/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskplan {
namespace {

Control clamp_control(double jerk, double steer_rate, const VehicleParams& p) {
  return {std::clamp(jerk, p.control_lb[kJerk], p.control_ub[kJerk]),
          std::clamp(steer_rate, p.control_lb[kSteerRate], p.control_ub[kSteerRate])};
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

AgentState interpolate(const std::vector<AgentState>& states, double step) {
  const double last = static_cast<double>(states.size() - 1);
  const double s = std::clamp(step, 0.0, last);
  const auto i = static_cast<std::size_t>(std::floor(s));
  if (i + 1 >= states.size()) return states.back();
  const double f = s - static_cast<double>(i);
  const AgentState& a = states[i];
  const AgentState& b = states[i + 1];
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.heading + f * wrap_angle(b.heading - a.heading),
          a.speed + f * (b.speed - a.speed)};
}

}  // namespace

double branch_match_error(const Scenario& scenario, const std::map<AgentId, AgentState>& observed, double step) {
  double err = 0.0;
  for (AgentId id : scenario.key_vehicles) {
    const auto obs = observed.find(id);
    const AgentTrajectory* traj = scenario.agent(id);
    if (obs == observed.end() || traj == nullptr || traj->states.empty()) continue;
    err += distance(obs->second.position(), interpolate(traj->states, step).position());
  }
  return err;
}

Control comfort_braking(const EgoState& ego, const ControllerConfig& cfg, const VehicleParams& params) {
  const double target = ego.v > 0.0 ? -cfg.comfort_decel : 0.0;
  return clamp_control(cfg.k_a * (target - ego.a), -cfg.k_delta * ego.delta, params);
}

TrackCommand controller_track(const TrajectoryTree& tree, const ScenarioTree& scenarios, double age, double plan_dt,
                              double max_age, const EgoState& ego, const std::map<AgentId, AgentState>& observed,
                              const ControllerConfig& cfg, const VehicleParams& params) {
  if (!(plan_dt > 0.0)) throw std::invalid_argument("plan step must be positive");
  TrackCommand out;
  const double step = age / plan_dt;
  // Small slack so that ages that are exact multiples of the step land on
  // the node rather than just before it.
  const int i = static_cast<int>(std::floor(step + 1e-9));
  if (tree.nodes().empty() || age < 0.0 || age > max_age + 1e-9 || i >= tree.horizon()) {
    out.control = comfort_braking(ego, cfg, params);
    out.stale = true;
    return out;
  }

  int branch = 0;
  if (i >= tree.branch_step() && tree.num_branches() > 1) {
    double best = INFINITY;
    for (int k = 0; k < tree.num_branches() && k < static_cast<int>(scenarios.branches.size()); ++k) {
      const double e = branch_match_error(scenarios.branches[static_cast<std::size_t>(k)], observed, step);
      if (e < best) {
        best = e;
        branch = k;
      }
    }
    out.branch = branch;
  } else if (i >= tree.branch_step()) {
    out.branch = 0;
  }

  const TreeNode& here = tree.nodes()[static_cast<std::size_t>(tree.node_at(branch, i))];
  const TreeNode& next = tree.nodes()[static_cast<std::size_t>(tree.node_at(branch, i + 1))];
  const double f = std::clamp(step - i, 0.0, 1.0);
  const StateVec ref = here.state + f * (next.state - here.state);
  const double ref_theta = here.state[kTheta] + f * wrap_angle(next.state[kTheta] - here.state[kTheta]);

  const double c = std::cos(ref_theta), s = std::sin(ref_theta);
  const double dx = ego.x - ref[kX], dy = ego.y - ref[kY];
  const double e_lon = c * dx + s * dy;
  const double e_lat = -s * dx + c * dy;
  const double e_v = ego.v - ref[kV];
  const double e_a = ego.a - ref[kAcc];
  const double e_heading = wrap_angle(ego.theta - ref_theta);

  const double jerk = next.control[kJerk] - cfg.k_s * e_lon - cfg.k_v * e_v - cfg.k_a * e_a;
  // Steering target that drives the lateral error as a damped second-order
  // system at the current speed; the angle then follows it at rate k_delta.
  const double v = std::max(ego.v, 1.0);
  const double delta_fb = -params.wheelbase * (cfg.k_lat * e_lat / (v * v) + cfg.k_heading * e_heading / v);
  const double steer_rate = next.control[kSteerRate] - cfg.k_delta * (ego.delta - ref[kDelta] - delta_fb);
  out.control = clamp_control(jerk, steer_rate, params);
  return out;
}

}  // namespace riskplan
