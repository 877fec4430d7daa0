#pragma once

#include <span>
#include <vector>

namespace riskplan {

struct CvarSolution {
  std::vector<double> q;  // weight per branch, 0 <= q_k <= 1/alpha, sum q_k p_k = 1
  double value{0.0};      // sum q_k p_k xi_k
};

/// Maximises sum q_k p_k xi_k over the CVaR weight polytope in closed form:
/// branches are filled at 1/alpha in descending order of risk until the
/// budget runs out. Branches with equal risk share their weight equally.
/// alpha = 1 gives the expectation, alpha <= min p gives the worst case.
CvarSolution cvar_lp(std::span<const double> p, std::span<const double> xi, double alpha);

}  // namespace riskplan
