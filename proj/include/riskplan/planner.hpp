#pragma once

#include "riskplan/policy.hpp"
#include "riskplan/rcp.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace riskplan {

enum class BranchMode { NoBranch, FixedBranch, DynamicBranch, DynamicBranchRisk };

std::string to_string(BranchMode mode);
BranchMode branch_mode_from_string(const std::string& s);

struct PlannerConfig {
  ForwardSimConfig sim;
  PredictionConfig prediction;
  CombinationCaps caps;
  DivergenceConfig divergence;
  CostModel cost{default_cost_model(VehicleParams{})};
  RcpOptions rcp;  // rcp.alpha is the tail fraction in DynamicBranchRisk
  RewardWeights reward;
  PolicyEnumerationConfig policies;
  BranchMode mode{BranchMode::DynamicBranchRisk};
  double fixed_branch_time{1.0};  // seconds, FixedBranch only
  std::map<AgentId, NoiseSpec> noise;

  /// Keeps the shared time step and horizon consistent across stages.
  void validate() const;
};

struct PolicyEvaluation {
  PolicySpec policy;
  ScenarioTree scenarios;
  RcpResult solution;
  PolicyReward reward;
  bool feasible{true};  // at least one scenario passes the safety check
};

struct PlanResult {
  PolicySpec policy;
  TrajectoryTree tree;
  ScenarioTree scenarios;
  RiskModel risk;
  std::vector<PolicyEvaluation> evaluations;
  int chosen{-1};  // index into evaluations, -1 when degraded
  bool degraded{false};
  double elapsed_ms{0.0};  // wall-clock diagnostics only
};

/// Scenario tree for one policy under the configured branching mode.
ScenarioTree scenario_tree_for_mode(std::vector<Scenario> scenarios, const PlannerConfig& cfg);

/// One planning cycle: predict, then per policy simulate, branch, optimise
/// and score; the best reward wins, ties go to the previous policy and then
/// to the lowest id. When every policy is infeasible the optimised plan of the
/// lane-keeping braking policy is returned and flagged degraded.
PlanResult plan(const WorldSnapshot& world, const Route& route, const PlannerConfig& cfg,
                const std::optional<PolicySpec>& previous = std::nullopt);

/// Index of the winning evaluation (feasible ones only, -1 if none).
int select_policy(const std::vector<PolicyEvaluation>& evaluations, const std::optional<PolicySpec>& previous);

}  // namespace riskplan
