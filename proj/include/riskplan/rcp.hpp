#pragma once

#include "riskplan/cost_model.hpp"
#include "riskplan/cvar.hpp"
#include "riskplan/ilqr.hpp"
#include "riskplan/policy_spec.hpp"
#include "riskplan/scenario_tree.hpp"

#include <optional>
#include <vector>

namespace riskplan {

struct RiskModel {
  double alpha{1.0};
  std::vector<double> p;   // branch probabilities, sum to one
  std::vector<double> xi;  // summed safety cost of each branch
  std::vector<double> q;   // tail weights
};

/// Geometry and targets for one tree solve. Per-branch vectors are indexed
/// [branch][step] with step 0..horizon.
struct RcpProblem {
  StateVec root{StateVec::Zero()};
  double dt{0.2};
  int branch_step{0};
  int horizon{0};
  std::vector<double> probabilities;
  std::vector<ControlVec> trunk_controls;
  std::vector<std::vector<ControlVec>> branch_controls;

  Polygon drivable{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}};
  Polyline reference{{{0.0, 0.0}, {1.0, 0.0}}};
  std::optional<Polygon> desired;
  std::vector<std::vector<std::vector<Polygon>>> boxes;
  std::vector<std::vector<std::vector<Polygon>>> reachable;
  std::vector<std::vector<double>> speed_ref;

  int num_branches() const { return static_cast<int>(probabilities.size()); }
  void validate() const;
};

/// Builds the solve from a scenario tree: ego trajectories seed the controls
/// (probability-weighted mean on the trunk), agent footprints become box
/// obstacles, reachable sets of non-key agents become reachable-set
/// obstacles, and a StopAt target becomes a desired area ending at the stop
/// position.
RcpProblem make_rcp_problem(const ScenarioTree& tree, const PredictionBundle& bundle, const PolicyContext& policy,
                            const Polygon& drivable, const VehicleParams& vehicle, double dt);

struct RcpOptions {
  double alpha{1.0};
  IlqrOptions ilqr;
  HessianMode hessian{HessianMode::GaussNewton};
  int max_outer_iterations{20};
  double relative_tolerance{1e-4};
  bool weight_non_safe_by_probability{false};
  void validate() const;
};

struct RcpResult {
  TrajectoryTree tree;
  RiskModel risk;
  double objective{0.0};
  int outer_iterations{0};
  int ilqr_iterations{0};
  bool converged{false};
  std::vector<double> objective_history;
};

/// Tree cost for fixed tail weights: branch nodes weigh their safety cost by
/// p_k q_k, shared nodes see every branch's obstacles at full weight.
class ContingencyCost final : public TreeCost {
 public:
  ContingencyCost(const RcpProblem& problem, const TrajectoryTree& layout, const CostModel& model, HessianMode mode,
                  bool weight_non_safe_by_probability);
  void set_weights(const std::vector<double>& q);
  double value(int node, const StateVec& x, const ControlVec& u) const override;
  CostExpansion expand(int node, const StateVec& x, const ControlVec& u) const override;
  CostSplit split(int node, const StateVec& x, const ControlVec& u) const;
  /// Unweighted safety cost summed over each branch's own nodes.
  std::vector<double> branch_safety(const TrajectoryTree& tree) const;

 private:
  const RcpProblem* problem_;
  const CostModel* model_;
  HessianMode mode_;
  bool weight_non_safe_;
  std::vector<NodeEnvironment> env_;
  std::vector<int> branch_of_;
  std::vector<double> safe_w_;
  std::vector<double> other_w_;
};

TrajectoryTree initial_tree(const RcpProblem& problem, const VehicleParams& vehicle);

/// Alternates tree iLQR with the tail-risk LP until the objective settles.
RcpResult rcp_optimize(const RcpProblem& problem, const CostModel& model, const RcpOptions& options = {});

}  // namespace riskplan
