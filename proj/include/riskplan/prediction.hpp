#pragma once

#include "riskplan/geometry.hpp"
#include "riskplan/lane_map.hpp"

#include <map>
#include <string_view>
#include <vector>

namespace riskplan {

using AgentId = int;

enum class LonIntent { Maintain, Accelerate, Decelerate };
std::string_view to_string(LonIntent intent);

struct AgentState {
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double speed{0.0};

  Point2 position() const { return {x, y}; }
  bool operator==(const AgentState&) const = default;
};

struct AgentShape {
  double half_length{2.4};
  double half_width{1.0};

  double wheelbase() const { return 1.2 * half_length; }
};

Polygon footprint(const AgentState& s, const AgentShape& shape, double inflation = 0.0);

/// Observed agent: history oldest first, back() is the current state.
struct AgentTrack {
  AgentId id{0};
  AgentShape shape;
  std::vector<AgentState> history;
};

struct AgentIntention {
  LaneSequence lateral;  // empty for the free-space fallback intention
  LonIntent longitudinal{LonIntent::Maintain};
  double probability{1.0};
};

struct PredictedTrajectory {
  AgentIntention intention;
  std::vector<AgentState> states;  // horizon_steps + 1 samples, states[0] is now

  double probability() const { return intention.probability; }
};

struct IntentionSet {
  AgentId agent{0};
  AgentShape shape;
  std::vector<PredictedTrajectory> predictions;

  double total_probability() const;
};

struct PredictionConfig {
  std::map<LonIntent, double> longitudinal_prior{{LonIntent::Maintain, 1.0}};
  double nominal_accel{1.0};
  double vote_temperature{1.0};  // metres
  std::size_t vote_window{5};    // most recent history samples used by the lateral vote
  int horizon_steps{25};
  double dt{0.2};
  double min_lookahead{8.0};
  double lookahead_time{1.2};
  double max_speed{25.0};
};

// Agent kinematics shared by the predictor and the forward simulator.
AgentState agent_step(const AgentState& s, double accel, double steer, double wheelbase, double dt);
double pure_pursuit_steer(const AgentState& s, const Polyline& reference, double lookahead, double wheelbase,
                          double lateral_offset = 0.0, double max_steer = 0.6);

/// Probability of each candidate lane from the distance vote: softmax of the
/// negative mean absolute lateral offset of the recent history, per lane.
std::map<LaneId, double> lateral_vote(const std::vector<AgentState>& history, const std::vector<LaneId>& lanes,
                                      const LaneMap& map, const PredictionConfig& cfg);

/// One intention per reachable lane sequence and longitudinal action, each
/// with a constant-action rollout. Off-map agents get a single
/// constant-velocity intention.
IntentionSet predict_agent(const AgentTrack& track, const LaneMap& map, const PredictionConfig& cfg);

struct NoiseSpec {
  LaneId target_lane;
  double boost{0.0};  // fraction of the non-target mass moved onto the target
};

/// Moves `boost` of the remaining mass onto intentions heading for the target
/// lane. No-op when no intention targets that lane.
IntentionSet inject_noise(const IntentionSet& set, const NoiseSpec& noise);

struct AgentChoice {
  AgentId agent{0};
  std::size_t prediction{0};  // index into that agent's IntentionSet
};

struct IntentionCombination {
  std::vector<AgentChoice> choices;
  double probability{1.0};

  /// Prediction index chosen for `agent`; throws std::out_of_range if absent.
  std::size_t choice_for(AgentId agent) const;
};

struct CombinationCaps {
  std::size_t per_agent{2};
  std::size_t max_combinations{4};
};

/// Cartesian product of each agent's top intentions, sorted by joint
/// probability, truncated to the cap and renormalised.
std::vector<IntentionCombination> intention_combinations(const std::vector<IntentionSet>& sets,
                                                         const CombinationCaps& caps);

}  // namespace riskplan
