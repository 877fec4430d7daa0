#pragma once

#include "riskplan/planner.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace riskplan {

inline constexpr int kWorldSchemaVersion = 1;

enum class AgentBehavior { Scripted, Idm, IntentionSwitch };

std::string to_string(AgentBehavior b);
AgentBehavior agent_behavior_from_string(const std::string& s);

struct Waypoint {
  double t{0.0};
  double x{0.0};
  double y{0.0};
};

struct AgentConfig {
  AgentId id{0};
  AgentShape shape;
  AgentState initial;
  AgentBehavior behavior{AgentBehavior::Idm};
  LaneId lane;                   // followed lane (Idm, IntentionSwitch)
  double desired_speed{0.0};     // <= 0 keeps the initial speed
  // Scripted: piecewise-linear positions; equal times make a teleport.
  std::vector<Waypoint> waypoints;
  // IntentionSwitch: from `switch_time` the agent steers for `switch_lane`
  // and ignores everything behind it.
  double switch_time{0.0};
  LaneId switch_lane;
};

struct EgoConfig {
  EgoState initial;
  VehicleParams params;
  Route route;
  double route_length{100.0};  // progress along the route that completes it
};

/// Prediction noise applied to one agent over [start, end).
struct NoiseWindow {
  double start{0.0};
  double end{0.0};
  AgentId agent{0};
  NoiseSpec spec;
};

struct ControllerConfig {
  // Longitudinal error feedback, s/v/a; defaults place all poles at -1.5.
  double k_s{3.375};
  double k_v{6.75};
  double k_a{4.5};
  // Lateral: offset and heading errors shape a steering target that the
  // steering angle follows at rate k_delta.
  double k_lat{0.5};
  double k_heading{1.2};
  double k_delta{5.0};
  double comfort_decel{2.0};  // stale-plan braking target, m/s^2

  void validate() const;
};

struct EpisodeConfig {
  double control_dt{0.05};
  double replan_period{0.2};
  double timeout{40.0};
  double sensor_range{100.0};
  int history_samples{5};

  void validate() const;
};

/// Ranges sampled per seed for one agent: gap ahead of the ego at the switch
/// time (bumper to bumper along the agent's lane, assuming both keep their
/// initial speeds until then), switch time and speed.
struct Randomization {
  bool enabled{false};
  AgentId agent{0};
  double gap_min{8.0}, gap_max{20.0};
  double trigger_min{0.5}, trigger_max{2.0};
  double speed_min{4.0}, speed_max{8.0};

  void validate() const;
};

struct WorldConfig {
  int schema_version{kWorldSchemaVersion};
  std::string name;
  std::uint64_t seed{0};  // default episode seed
  std::shared_ptr<const LaneMap> map;
  EgoConfig ego;
  std::vector<AgentConfig> agents;
  PlannerConfig planner;
  std::vector<NoiseWindow> noise;
  ControllerConfig controller;
  EpisodeConfig episode;
  Randomization randomization;

  /// Lanes referenced anywhere exist, times are non-negative, ids unique.
  void validate() const;
  const AgentConfig& agent(AgentId id) const;
};

/// Parses the JSON world description; throws std::invalid_argument on schema
/// or value errors, naming the offending key.
WorldConfig parse_world_config(const std::string& text);
WorldConfig load_world_config(const std::filesystem::path& path);

/// Copy of `cfg` with the randomized quantities drawn from `seed`.
WorldConfig randomize(const WorldConfig& cfg, std::uint64_t seed);

}  // namespace riskplan
