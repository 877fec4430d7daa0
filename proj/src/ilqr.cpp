#include "riskplan/ilqr.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <string>

namespace riskplan {
namespace {

using GainMat = Eigen::Matrix<double, kControlDim, kStateDim>;

struct Gains {
  std::vector<ControlVec> k;
  std::vector<GainMat> K;
};

// One backward sweep at regularization mu. Returns false when some control
// Hessian is not positive definite.
bool backward_pass(const TrajectoryTree& tree, const TreeDynamics& dynamics, const TreeCost& cost, double mu,
                   Gains& gains) {
  const auto& nodes = tree.nodes();
  const std::size_t n = nodes.size();
  std::vector<StateVec> vx(n, StateVec::Zero());
  std::vector<StateMat> vxx(n, StateMat::Zero());
  gains.k.assign(n, ControlVec::Zero());
  gains.K.assign(n, GainMat::Zero());

  for (std::size_t j = n; j-- > 1;) {
    const auto& node = nodes[j];
    const auto& parent = nodes[static_cast<std::size_t>(node.parent)];
    const CostExpansion l = cost.expand(static_cast<int>(j), node.state, node.control);
    const Linearization lin = dynamics.linearize(parent.state, node.control);

    const StateVec wx = l.lx + vx[j];
    const StateMat wxx = l.lxx + vxx[j];
    const StateVec qx = lin.A.transpose() * wx;
    const ControlVec qu = lin.B.transpose() * wx + l.lu;
    StateMat qxx = lin.A.transpose() * wxx * lin.A;
    Eigen::Matrix2d quu = lin.B.transpose() * wxx * lin.B + l.luu;
    quu = 0.5 * (quu + quu.transpose());
    const GainMat qux = lin.B.transpose() * wxx * lin.A;

    const Eigen::Matrix2d reg = quu + mu * Eigen::Matrix2d::Identity();
    Eigen::LLT<Eigen::Matrix2d> llt(reg);
    if (llt.info() != Eigen::Success || !reg.allFinite()) return false;
    const ControlVec k = -llt.solve(qu);
    const GainMat K = -llt.solve(qux);
    gains.k[j] = k;
    gains.K[j] = K;

    // Value of the parent's state, summed over children at the fork.
    const std::size_t p = static_cast<std::size_t>(node.parent);
    vx[p] += qx + K.transpose() * quu * k + K.transpose() * qu + qux.transpose() * k;
    StateMat dv = qxx + K.transpose() * quu * K + K.transpose() * qux + qux.transpose() * K;
    vxx[p] += 0.5 * (dv + dv.transpose());
  }
  return true;
}

TrajectoryTree forward_pass(const TrajectoryTree& tree, const TreeDynamics& dynamics, const Gains& gains,
                            double step) {
  TrajectoryTree out = tree;
  auto& nodes = out.nodes();
  const auto& old = tree.nodes();
  for (std::size_t j = 1; j < nodes.size(); ++j) {
    const std::size_t p = static_cast<std::size_t>(nodes[j].parent);
    const StateVec dx = nodes[p].state - old[p].state;
    nodes[j].control = old[j].control + step * gains.k[j] + gains.K[j] * dx;
    nodes[j].state = dynamics.step(nodes[p].state, nodes[j].control);
  }
  return out;
}

}  // namespace

void IlqrOptions::validate() const {
  if (max_iterations < 0) throw std::invalid_argument("max_iterations must be non-negative");
  if (!(relative_tolerance > 0.0)) throw std::invalid_argument("relative_tolerance must be positive");
  if (!(mu_init > 0.0) || !(mu_max >= mu_init)) throw std::invalid_argument("invalid regularization range");
  if (line_search_steps < 1) throw std::invalid_argument("line_search_steps must be at least 1");
}

double tree_cost(const TrajectoryTree& tree, const TreeCost& cost) {
  double total = 0.0;
  const auto& nodes = tree.nodes();
  for (std::size_t j = 1; j < nodes.size(); ++j) total += cost.value(static_cast<int>(j), nodes[j].state, nodes[j].control);
  return total;
}

IlqrResult ilqr_solve(TrajectoryTree tree, const TreeDynamics& dynamics, const TreeCost& cost,
                      const IlqrOptions& options) {
  options.validate();
  const double err = tree.max_consistency_error(dynamics);
  if (!(err <= options.consistency_tolerance)) {
    throw std::invalid_argument("initial tree is not dynamically consistent (error " + std::to_string(err) + ")");
  }

  IlqrResult result;
  result.cost = tree_cost(tree, cost);
  result.cost_history.push_back(result.cost);
  // Regularization is only switched on when a control Hessian fails the
  // positive-definite test.
  double mu = 0.0;
  Gains gains;

  for (int it = 0; it < options.max_iterations; ++it) {
    while (!backward_pass(tree, dynamics, cost, mu, gains)) {
      mu = std::max(options.mu_init, mu * 10.0);
      if (mu > options.mu_max) {
        throw std::runtime_error("control Hessian not positive definite at maximum regularization");
      }
    }
    result.iterations = it + 1;

    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < options.line_search_steps; ++ls, step *= 0.5) {
      TrajectoryTree candidate = forward_pass(tree, dynamics, gains, step);
      const double c = tree_cost(candidate, cost);
      if (std::isfinite(c) && c < result.cost) {
        const double previous = result.cost;
        tree = std::move(candidate);
        result.cost = c;
        result.cost_history.push_back(c);
        accepted = true;
        if (std::abs(previous - c) <= options.relative_tolerance * std::max(std::abs(previous), 1e-12)) {
          result.converged = true;
        }
        break;
      }
    }
    // No descent along the Newton direction: the iterate is stationary to
    // the accuracy of the line search.
    if (!accepted) result.converged = true;
    if (result.converged) break;
    mu = mu * 0.1 < options.mu_init ? 0.0 : mu * 0.1;
  }
  result.tree = std::move(tree);
  return result;
}

}  // namespace riskplan
