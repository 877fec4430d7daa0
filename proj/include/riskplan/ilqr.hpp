#pragma once

#include "riskplan/cost_model.hpp"
#include "riskplan/trajectory_tree.hpp"

#include <vector>

namespace riskplan {

/// Stage cost attached to a tree node, evaluated on the node's state and the
/// control on its incoming edge. Node 0 carries no cost.
class TreeCost {
 public:
  virtual ~TreeCost() = default;
  virtual double value(int node, const StateVec& x, const ControlVec& u) const = 0;
  virtual CostExpansion expand(int node, const StateVec& x, const ControlVec& u) const = 0;
};

struct IlqrOptions {
  int max_iterations{50};
  double relative_tolerance{1e-4};
  double mu_init{1e-6};
  double mu_max{1e10};
  int line_search_steps{9};  // step sizes 1, 1/2, ..., 2^-(steps-1)
  double consistency_tolerance{1e-6};
  void validate() const;
};

struct IlqrResult {
  TrajectoryTree tree;
  double cost{0.0};
  int iterations{0};
  bool converged{false};
  std::vector<double> cost_history;  // accepted costs, starting with the initial tree
};

double tree_cost(const TrajectoryTree& tree, const TreeCost& cost);

/// Tree-structured iLQR. Branch value functions are summed at the fork and
/// the recursion continues down the shared chain. Throws invalid_argument
/// when the initial tree is not dynamically consistent and runtime_error when
/// regularization cannot make the control Hessian positive definite.
IlqrResult ilqr_solve(TrajectoryTree tree, const TreeDynamics& dynamics, const TreeCost& cost,
                      const IlqrOptions& options = {});

}  // namespace riskplan
