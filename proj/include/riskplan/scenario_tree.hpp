#pragma once

#include "riskplan/forward_sim.hpp"

#include <vector>

namespace riskplan {

struct DivergenceConfig {
  double theta{0.5};    // metres
  double tau_max{3.0};  // seconds
  double dt{0.2};
  // Optional speed term in the divergence measure; positional only by default.
  bool include_speed{false};
  double speed_weight{1.0};  // metres per (m/s)

  void validate() const;
  int cap_steps() const;
};

/// Ego positional distance between two scenarios at `step`.
double divergence(const Scenario& a, const Scenario& b, int step, const DivergenceConfig& cfg = {});

/// Latest step (capped at tau_max / dt and the horizon) up to which every
/// pair of scenarios stays within theta at every earlier step.
int branch_time(const std::vector<Scenario>& scenarios, const DivergenceConfig& cfg);

/// Scenario set sharing one trunk up to `branch_step`, one branch per scenario.
struct ScenarioTree {
  std::vector<Scenario> branches;  // by descending probability, then scenario id
  int branch_step{0};
  int horizon_steps{0};
  int policy_id{0};
};

ScenarioTree build_tree(std::vector<Scenario> scenarios, const DivergenceConfig& cfg);

}  // namespace riskplan
