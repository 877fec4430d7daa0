#pragma once

#include "riskplan/dynamics.hpp"
#include "riskplan/geometry.hpp"
#include "riskplan/lane_map.hpp"
#include "riskplan/policy_spec.hpp"
#include "riskplan/prediction.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace riskplan {

/// IDM longitudinal + pure-pursuit lateral driver.
struct DriverModelParams {
  double desired_speed{0.0};  // <= 0 means "use the lane speed limit"
  double time_headway{1.2};
  double min_gap{2.0};
  double max_accel{2.0};
  double comfort_decel{3.0};
  double max_decel{8.0};
  double exponent{4.0};
  double lookahead_time{1.2};
  double min_lookahead{8.0};

  void validate() const;
};

struct LeaderInfo {
  double gap{0.0};    // bumper to bumper
  double speed{0.0};  // projected onto the follower's path
  AgentId id{-1};
};

double idm_acceleration(double speed, double desired_speed, const std::optional<LeaderInfo>& leader,
                        const DriverModelParams& p);

struct TrafficParticipant {
  AgentId id{-1};  // -1 is the ego
  AgentState state;
  AgentShape shape;
};

/// Nearest participant ahead on `reference` whose lateral offset overlaps the
/// follower's body (plus `lateral_margin`), either where the follower is now
/// or on the reference itself. With `path_only` only the reference counts.
std::optional<LeaderInfo> find_leader(const TrafficParticipant& self, const Polyline& reference,
                                      const std::vector<TrafficParticipant>& others, double lateral_margin = 0.3,
                                      bool path_only = false);

struct TimedOccupancy {
  int step{0};
  std::vector<Polygon> polygons;
};

/// Per-step union of every predicted footprint of one agent.
struct ForwardReachableSet {
  AgentId agent{0};
  std::vector<TimedOccupancy> steps;

  const std::vector<Polygon>& at(int step) const;
};

ForwardReachableSet compute_frs(const IntentionSet& predictions, double inflation = 0.2);

struct WorldSnapshot {
  std::shared_ptr<const LaneMap> map;
  double time{0.0};
  EgoState ego;
  VehicleParams ego_params;
  std::vector<AgentTrack> agents;
};

/// Predictions shared by every policy in one planning cycle.
struct PredictionBundle {
  std::vector<IntentionSet> sets;
  std::map<AgentId, ForwardReachableSet> frs;
  std::vector<IntentionCombination> combinations;

  const IntentionSet& set_for(AgentId id) const;
};

/// Predicts every agent, applies per-agent noise, and computes reachable sets
/// and the capped intention combinations.
PredictionBundle build_prediction_bundle(const WorldSnapshot& world, const PredictionConfig& prediction,
                                         const CombinationCaps& caps, double frs_inflation = 0.2,
                                         const std::map<AgentId, NoiseSpec>& noise = {});

struct ForwardSimConfig {
  double dt{0.2};
  int horizon_steps{25};
  DriverModelParams ego_driver;
  DriverModelParams agent_driver;
  double frs_inflation{0.2};
  double corridor_margin{0.5};
  std::size_t max_key_vehicles{4};
  double fallback_max_offset{1.5};
  double leader_lateral_margin{0.3};
};

struct AgentTrajectory {
  AgentId id{0};
  AgentShape shape;
  bool key{false};
  std::vector<AgentState> states;
};

struct Scenario {
  int id{0};
  int policy_id{0};
  IntentionCombination combination;
  std::vector<EgoState> ego;
  std::vector<AgentTrajectory> agents;
  std::vector<AgentId> key_vehicles;
  double probability{1.0};
  bool fallback{false};
  bool unsafe{false};
  int collision_step{-1};

  int steps() const { return static_cast<int>(ego.size()) - 1; }
  const AgentTrajectory* agent(AgentId id) const;
};

Polygon ego_footprint(const EgoState& s, const VehicleParams& params, double inflation = 0.0);

/// Strips of half-width (ego half width + margin) around the policy corridor
/// lines, from just behind the ego to its reach over the horizon.
std::vector<Polygon> policy_corridor(const WorldSnapshot& world, const PolicyContext& policy,
                                     const ForwardSimConfig& cfg);

std::vector<AgentId> select_key_vehicles(const WorldSnapshot& world, const PredictionBundle& bundle,
                                         const IntentionCombination& combo, const PolicyContext& policy,
                                         const ForwardSimConfig& cfg);

Scenario simulate_scenario(const WorldSnapshot& world, const PredictionBundle& bundle,
                           const IntentionCombination& combo, const std::vector<AgentId>& key_vehicles,
                           const PolicyContext& policy, const ForwardSimConfig& cfg);

struct SafetyResult {
  bool pass{true};
  int step{-1};
  AgentId agent{-1};
};

/// Fails on ego overlap with a key vehicle's simulated footprint or with a
/// non-key agent's reachable set, at the first such step.
SafetyResult safety_assess(const Scenario& scenario, const PredictionBundle& bundle,
                           const VehicleParams& ego_params);

/// Lateral shift (left positive) that moves the ego away from the violating
/// reachable set while its footprint stays inside the drivable area.
double fallback_offset(const WorldSnapshot& world, const PredictionBundle& bundle, const Scenario& failed,
                       const SafetyResult& failure, const PolicyContext& policy, const ForwardSimConfig& cfg);

/// Second pass: comfort braking along the current lane with a lateral offset
/// away from the violation. The result is flagged fallback, and unsafe when
/// it still fails the assessment.
Scenario simulate_with_fallback(const WorldSnapshot& world, const PredictionBundle& bundle,
                                const IntentionCombination& combo, const std::vector<AgentId>& key_vehicles,
                                const PolicyContext& policy, const Scenario& failed, const SafetyResult& failure,
                                const ForwardSimConfig& cfg);

/// Two-pass rendering of the critical scenario set for one policy: one
/// retained scenario per intention combination.
std::vector<Scenario> render_scenarios(const WorldSnapshot& world, const PredictionBundle& bundle,
                                       const PolicyContext& policy, const ForwardSimConfig& cfg);

}  // namespace riskplan
