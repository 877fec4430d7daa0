#pragma once

#include "riskplan/forward_sim.hpp"
#include "riskplan/policy_spec.hpp"
#include "riskplan/scenario_tree.hpp"
#include "riskplan/trajectory_tree.hpp"

#include <optional>
#include <vector>

namespace riskplan {

struct Route {
  LaneSequence lanes;
  double desired_speed{10.0};
  std::optional<Point2> stop_point;  // stop position on the route, if any
};

struct PolicyEnumerationConfig {
  std::size_t max_policies{9};
  double speed_step{3.0};       // Accelerate / Decelerate target change, m/s
  double sensor_range{80.0};    // metres ahead for blockers and stop points
  double blocker_speed{0.5};    // agents slower than this count as static
  double bypass_margin{0.5};    // lateral clearance to a blocker when bypassing
  int sequence_depth{3};
  bool lane_keep_only{false};   // drop bypass and lane-change options
  void validate() const;
};

/// Lateral options (LaneKeep always, LaneChange per adjacent lane, Bypass
/// when a static blocker sits in the ego lane) crossed with Maintain,
/// Accelerate and Decelerate, plus StopAt when the route stops within sensor
/// range. Route-preserving options come first; ids follow the final order.
std::vector<PolicySpec> enumerate_policies(const WorldSnapshot& world, const Route& route,
                                           const PolicyEnumerationConfig& cfg = {});

PolicyContext make_policy_context(const WorldSnapshot& world, const PolicySpec& policy, const Route& route,
                                  const PolicyEnumerationConfig& cfg = {});

/// Lane the ego currently drives in; throws when it is off the map.
LaneId current_lane(const WorldSnapshot& world);

struct RewardWeights {
  double safety{10.0};
  double efficiency{1.0};
  double navigation{2.0};
  double risk{0.5};
  double uncertainty{1.0};
  double safe_distance{3.0};          // metres
  double divergence_scale{10.0};      // metres
  void validate() const;
};

struct PolicyReward {
  double safety{0.0};       // probability-weighted mean shortfall below the safe distance
  double efficiency{0.0};   // |mean planned speed - desired speed|
  double navigation{0.0};   // normalised lane edits between target and route
  double risk{0.0};         // optimiser objective per step
  double uncertainty{0.0};  // early branching + terminal spread of the branches
  double total{0.0};

  static double combine(const PolicyReward& r, const RewardWeights& w);
};

/// Shortest distance between the ego box and any agent box of the scenario
/// at `step` (1e9 without agents).
double scenario_clearance(const EgoState& ego, const Scenario& scenario, int step, const VehicleParams& vehicle);

/// Edit distance between lane sequences.
int lane_edits(const LaneSequence& a, const LaneSequence& b);

/// Route window the target is compared against: the route from the ego's
/// lane (or its neighbour on the route) on, as long as the target.
double navigation_cost(const PolicySpec& policy, const Route& route, const LaneMap& map, const LaneId& ego_lane);

PolicyReward evaluate_policy(const PolicySpec& policy, const ScenarioTree& scenarios, const TrajectoryTree& plan,
                             double rcp_objective, double navigation, double desired_speed, double tau_max, double dt,
                             const VehicleParams& vehicle, const RewardWeights& weights = {});

}  // namespace riskplan
