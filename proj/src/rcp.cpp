#include "riskplan/rcp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace riskplan {
namespace {

// Rate controls that reproduce consecutive states of a bicycle rollout.
ControlVec recover_control(const EgoState& from, const EgoState& to, double dt) {
  return ControlVec((to.a - from.a) / dt, (to.delta - from.delta) / dt);
}

double objective(const ContingencyCost& cost, const TrajectoryTree& tree) { return tree_cost(tree, cost); }

}  // namespace

void RcpProblem::validate() const {
  const std::size_t K = probabilities.size();
  if (K == 0) throw std::invalid_argument("problem needs at least one branch");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (branch_step < 0 || branch_step > horizon) throw std::invalid_argument("branch step outside the horizon");
  if (static_cast<int>(trunk_controls.size()) != branch_step) throw std::invalid_argument("trunk control count");
  if (branch_controls.size() != K || boxes.size() != K || reachable.size() != K || speed_ref.size() != K) {
    throw std::invalid_argument("per-branch data does not match the branch count");
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (static_cast<int>(branch_controls[k].size()) != horizon - branch_step) {
      throw std::invalid_argument("branch control count");
    }
    const auto steps = static_cast<std::size_t>(horizon) + 1;
    if (boxes[k].size() != steps || reachable[k].size() != steps || speed_ref[k].size() != steps) {
      throw std::invalid_argument("per-step data does not cover the horizon");
    }
  }
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p > 0.0)) throw std::invalid_argument("branch probabilities must be positive");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("branch probabilities must sum to one");
}

RcpProblem make_rcp_problem(const ScenarioTree& tree, const PredictionBundle& bundle, const PolicyContext& policy,
                            const Polygon& drivable, const VehicleParams& vehicle, double dt) {
  if (tree.branches.empty()) throw std::invalid_argument("scenario tree has no branches");
  RcpProblem pb;
  pb.dt = dt;
  pb.horizon = tree.horizon_steps;
  pb.branch_step = tree.branch_step;
  pb.drivable = drivable;
  pb.reference = policy.reference;
  const auto& first = tree.branches.front();
  pb.root = first.ego.front().to_vector();

  double mass = 0.0;
  for (const auto& s : tree.branches) mass += s.probability;
  if (!(mass > 0.0)) throw std::invalid_argument("scenario probabilities must be positive");
  for (const auto& s : tree.branches) {
    if (s.steps() != pb.horizon) throw std::invalid_argument("scenario horizon does not match the tree");
    pb.probabilities.push_back(s.probability / mass);
  }

  // Trunk: probability-weighted mean of the scenarios' controls.
  for (int t = 1; t <= pb.branch_step; ++t) {
    ControlVec u = ControlVec::Zero();
    for (std::size_t k = 0; k < tree.branches.size(); ++k) {
      const auto& ego = tree.branches[k].ego;
      u += pb.probabilities[k] * recover_control(ego[static_cast<std::size_t>(t - 1)], ego[static_cast<std::size_t>(t)], dt);
    }
    pb.trunk_controls.push_back(u);
  }

  for (const auto& s : tree.branches) {
    std::vector<ControlVec> controls;
    for (int t = pb.branch_step + 1; t <= pb.horizon; ++t) {
      controls.push_back(recover_control(s.ego[static_cast<std::size_t>(t - 1)], s.ego[static_cast<std::size_t>(t)], dt));
    }
    pb.branch_controls.push_back(std::move(controls));

    std::vector<std::vector<Polygon>> boxes(static_cast<std::size_t>(pb.horizon) + 1);
    std::vector<std::vector<Polygon>> reach(static_cast<std::size_t>(pb.horizon) + 1);
    std::vector<double> speeds;
    for (int t = 0; t <= pb.horizon; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      speeds.push_back(s.ego[ts].v);
      for (const auto& a : s.agents) {
        if (ts < a.states.size()) boxes[ts].push_back(footprint(a.states[ts], a.shape));
        if (a.key) continue;
        const auto it = bundle.frs.find(a.id);
        if (it != bundle.frs.end() && t < static_cast<int>(it->second.steps.size())) {
          const auto& polys = it->second.at(t);
          reach[ts].insert(reach[ts].end(), polys.begin(), polys.end());
        }
      }
    }
    pb.boxes.push_back(std::move(boxes));
    pb.reachable.push_back(std::move(reach));
    pb.speed_ref.push_back(std::move(speeds));
  }

  if (policy.stop_s) {
    const double s_ego = policy.reference.project({pb.root[kX], pb.root[kY]}).s;
    const double back = s_ego - vehicle.half_length - 40.0;
    if (*policy.stop_s > back + 1.0) pb.desired = strip_polygon(policy.reference, back, *policy.stop_s, 10.0);
  }
  pb.validate();
  return pb;
}

void RcpOptions::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (max_outer_iterations < 1) throw std::invalid_argument("max_outer_iterations must be at least 1");
  if (!(relative_tolerance > 0.0)) throw std::invalid_argument("relative_tolerance must be positive");
  ilqr.validate();
}

ContingencyCost::ContingencyCost(const RcpProblem& problem, const TrajectoryTree& layout, const CostModel& model,
                                 HessianMode mode, bool weight_non_safe_by_probability)
    : problem_(&problem), model_(&model), mode_(mode), weight_non_safe_(weight_non_safe_by_probability) {
  const auto& nodes = layout.nodes();
  env_.resize(nodes.size());
  branch_of_.resize(nodes.size(), -1);
  const std::size_t K = problem.probabilities.size();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto t = static_cast<std::size_t>(nodes[j].step);
    auto& e = env_[j];
    e.drivable = &problem.drivable;
    e.reference = &problem.reference;
    e.desired = problem.desired ? &*problem.desired : nullptr;
    branch_of_[j] = nodes[j].branch;
    if (nodes[j].branch >= 0) {
      const auto k = static_cast<std::size_t>(nodes[j].branch);
      for (const auto& p : problem.boxes[k][t]) e.boxes.push_back(&p);
      for (const auto& p : problem.reachable[k][t]) e.reachable.push_back(&p);
      e.speed_ref = problem.speed_ref[k][t];
    } else {
      // Shared nodes must respect every contingency at once.
      double v = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        for (const auto& p : problem.boxes[k][t]) e.boxes.push_back(&p);
        for (const auto& p : problem.reachable[k][t]) e.reachable.push_back(&p);
        v += problem.probabilities[k] * problem.speed_ref[k][t];
      }
      e.speed_ref = v;
    }
  }
  set_weights(std::vector<double>(K, 1.0));
}

void ContingencyCost::set_weights(const std::vector<double>& q) {
  if (q.size() != problem_->probabilities.size()) throw std::invalid_argument("one weight per branch expected");
  safe_w_.assign(env_.size(), 1.0);
  other_w_.assign(env_.size(), 1.0);
  for (std::size_t j = 0; j < env_.size(); ++j) {
    if (branch_of_[j] < 0) continue;
    const auto k = static_cast<std::size_t>(branch_of_[j]);
    safe_w_[j] = problem_->probabilities[k] * q[k];
    if (weight_non_safe_) other_w_[j] = problem_->probabilities[k];
  }
}

CostSplit ContingencyCost::split(int node, const StateVec& x, const ControlVec& u) const {
  return node_cost(x, u, env_.at(static_cast<std::size_t>(node)), *model_);
}

double ContingencyCost::value(int node, const StateVec& x, const ControlVec& u) const {
  const auto j = static_cast<std::size_t>(node);
  const CostSplit c = split(node, x, u);
  return safe_w_[j] * c.safe + other_w_[j] * c.non_safe;
}

CostExpansion ContingencyCost::expand(int node, const StateVec& x, const ControlVec& u) const {
  const auto j = static_cast<std::size_t>(node);
  const SplitExpansion e = node_cost_expansion(x, u, env_.at(j), *model_, mode_);
  CostExpansion out;
  out.add(e.safe, safe_w_[j]);
  out.add(e.non_safe, other_w_[j]);
  return out;
}

std::vector<double> ContingencyCost::branch_safety(const TrajectoryTree& tree) const {
  std::vector<double> xi(problem_->probabilities.size(), 0.0);
  const auto& nodes = tree.nodes();
  for (std::size_t j = 1; j < nodes.size(); ++j) {
    if (nodes[j].branch < 0) continue;
    xi[static_cast<std::size_t>(nodes[j].branch)] += split(static_cast<int>(j), nodes[j].state, nodes[j].control).safe;
  }
  return xi;
}

TrajectoryTree initial_tree(const RcpProblem& problem, const VehicleParams& vehicle) {
  const BicycleDynamics dyn(vehicle, problem.dt);
  return TrajectoryTree::build(problem.root, problem.trunk_controls, problem.branch_controls, dyn);
}

RcpResult rcp_optimize(const RcpProblem& problem, const CostModel& model, const RcpOptions& options) {
  problem.validate();
  options.validate();
  model.validate();
  const BicycleDynamics dyn(model.vehicle, problem.dt);
  TrajectoryTree tree = initial_tree(problem, model.vehicle);
  ContingencyCost cost(problem, tree, model, options.hessian, options.weight_non_safe_by_probability);

  RcpResult res;
  res.risk.alpha = options.alpha;
  res.risk.p = problem.probabilities;
  res.risk.q.assign(problem.probabilities.size(), 1.0);
  cost.set_weights(res.risk.q);

  double previous = objective(cost, tree);
  res.objective_history.push_back(previous);
  for (int outer = 0; outer < options.max_outer_iterations; ++outer) {
    const IlqrResult inner = ilqr_solve(std::move(tree), dyn, cost, options.ilqr);
    tree = inner.tree;
    res.ilqr_iterations += inner.iterations;
    res.outer_iterations = outer + 1;

    res.risk.xi = cost.branch_safety(tree);
    const CvarSolution lp = cvar_lp(res.risk.p, res.risk.xi, options.alpha);
    const bool same_weights = lp.q == res.risk.q;
    res.risk.q = lp.q;
    cost.set_weights(res.risk.q);

    const double current = objective(cost, tree);
    res.objective_history.push_back(current);
    const bool settled = std::abs(current - previous) <= options.relative_tolerance * std::max(std::abs(previous), 1e-9);
    previous = current;
    if (settled || same_weights) {
      res.converged = true;
      break;
    }
  }
  res.objective = previous;
  res.tree = std::move(tree);
  return res;
}

}  // namespace riskplan
