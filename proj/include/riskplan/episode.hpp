#pragma once

#include "riskplan/controller.hpp"
#include "riskplan/world_config.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace riskplan {

inline constexpr int kTraceSchemaVersion = 1;

struct EpisodeMetrics {
  double completion_time{0.0};  // s
  double avg_speed{0.0};        // m/s
  double rms_acc{0.0};          // m/s^2
  double max_abs_acc{0.0};      // m/s^2
  double min_distance{std::numeric_limits<double>::infinity()};  // m, footprint to footprint
  double max_decel{0.0};        // m/s^2, positive number
  bool success{true};           // no collision
};

enum class EpisodeOutcome { Running, Completed, Collision, Timeout };
std::string to_string(EpisodeOutcome o);
EpisodeOutcome episode_outcome_from_string(const std::string& s);

struct AgentRecord {
  AgentId id{0};
  AgentState state;
};

struct TraceStep {
  double t{0.0};
  EgoState ego;
  Control control;
  int policy_id{-1};
  std::string policy;
  int branch{-1};
  bool degraded{false};
  bool replanned{false};
  std::vector<AgentRecord> agents;
};

/// Chosen plan at one replanning instant: ego positions per branch.
struct PlanRecord {
  double t{0.0};
  int policy_id{-1};
  std::string policy;
  bool degraded{false};
  int branch_step{0};
  std::vector<double> probabilities;
  std::vector<double> risk_weights;   // q per branch
  std::vector<double> branch_safety;  // unweighted safe cost per branch
  std::map<std::string, double> rewards;  // total reward of each feasible policy
  std::vector<std::vector<Point2>> branches;
};

struct Trace {
  int schema_version{kTraceSchemaVersion};
  std::string world;
  std::string mode;
  std::uint64_t seed{0};
  double control_dt{0.05};
  AgentShape ego_shape;
  std::map<AgentId, AgentShape> agent_shapes;
  EpisodeOutcome outcome{EpisodeOutcome::Running};
  std::vector<TraceStep> steps;
  std::vector<PlanRecord> plans;
};

/// Streaming metric computation over logged steps.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(AgentShape ego_shape) : ego_shape_(ego_shape) {}
  /// Returns true when this step is in contact with some agent.
  bool add(const TraceStep& step, const std::map<AgentId, AgentShape>& shapes);
  EpisodeMetrics result() const;

 private:
  AgentShape ego_shape_;
  std::size_t n_{0};
  double last_t_{0.0};
  double sum_v_{0.0};
  double sum_a2_{0.0};
  EpisodeMetrics m_;
};

EpisodeMetrics metrics_from_trace(const Trace& trace);

/// Number of replans whose chosen behaviour differs from the previous one.
int count_policy_switches(const Trace& trace);

struct EpisodeResult {
  EpisodeMetrics metrics;
  Trace trace;
  std::vector<double> plan_ms;  // wall-clock per planning cycle, never exported
};

/// Sees every successful planning cycle: the snapshot, the planner settings
/// in force (noise included) and the result.
using PlanObserver = std::function<void(const WorldSnapshot&, const PlannerConfig&, const PlanResult&)>;

/// Closed-loop run: replan at the replan period, track at the control step,
/// advance every agent, log. Ends on route completion, collision or timeout.
/// The seed only drives the configured randomization.
EpisodeResult run_episode(const WorldConfig& cfg, BranchMode mode, std::uint64_t seed,
                          const PlanObserver& observer = {});

struct EpisodeRow {
  int episode{0};
  std::uint64_t seed{0};
  EpisodeMetrics metrics;
};

struct BatchResult {
  BranchMode mode{BranchMode::DynamicBranchRisk};
  std::vector<EpisodeRow> rows;
  double mean_max_decel{0.0};
  double mean_min_distance{0.0};  // over episodes with at least one agent
  double success_rate{0.0};       // fraction in [0, 1]
  std::vector<double> plan_ms;
};

/// Episodes 0..n-1 run with seeds base_seed + i, one after the other.
BatchResult batch_run(const WorldConfig& cfg, BranchMode mode, int episodes, std::uint64_t base_seed);

/// Aggregates over already computed rows (used by batch_run).
void aggregate(BatchResult& batch);

}  // namespace riskplan
