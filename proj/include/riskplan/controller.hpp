#pragma once

#include "riskplan/scenario_tree.hpp"
#include "riskplan/trajectory_tree.hpp"
#include "riskplan/world_config.hpp"

#include <map>

namespace riskplan {

struct TrackCommand {
  Control control;
  int branch{-1};  // -1 while on the shared trunk
  bool stale{false};
};

/// Sum over the scenario's key vehicles of the distance between the observed
/// and the predicted position at `step` (fractional steps interpolate).
/// Unobserved key vehicles are skipped.
double branch_match_error(const Scenario& scenario, const std::map<AgentId, AgentState>& observed, double step);

/// Tracks a plan made `age` seconds ago. Before the branch step the trunk is
/// followed; after it, the branch whose scenario best matches the observed
/// agents (ties go to the lower index). The control is the feedforward input
/// leaving the current node plus feedback on the error to the reference state
/// interpolated at `age`. A plan older than `max_age`, or one that has run
/// out of nodes, yields comfort braking.
TrackCommand controller_track(const TrajectoryTree& tree, const ScenarioTree& scenarios, double age, double plan_dt,
                              double max_age, const EgoState& ego, const std::map<AgentId, AgentState>& observed,
                              const ControllerConfig& cfg, const VehicleParams& params);

/// Braking toward the comfort deceleration with the steering centred.
Control comfort_braking(const EgoState& ego, const ControllerConfig& cfg, const VehicleParams& params);

}  // namespace riskplan
