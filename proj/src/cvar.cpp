#include "riskplan/cvar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace riskplan {

CvarSolution cvar_lp(std::span<const double> p, std::span<const double> xi, double alpha) {
  if (p.size() != xi.size()) throw std::invalid_argument("cvar_lp: p and xi differ in length");
  if (p.empty()) throw std::invalid_argument("cvar_lp: no branches");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("cvar_lp: alpha must lie in (0, 1]");
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0)) throw std::invalid_argument("cvar_lp: probabilities must be positive");
    if (!std::isfinite(xi[k])) throw std::invalid_argument("cvar_lp: risk cost is not finite");
    total += p[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("cvar_lp: probabilities must sum to one");

  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&xi](std::size_t a, std::size_t b) { return xi[a] > xi[b]; });

  CvarSolution sol;
  sol.q.assign(p.size(), 0.0);
  const double cap = 1.0 / alpha;
  double budget = 1.0;
  for (std::size_t i = 0; i < order.size() && budget > 0.0;) {
    std::size_t j = i;
    double mass = 0.0;
    while (j < order.size() && xi[order[j]] == xi[order[i]]) mass += p[order[j++]];
    const double q = std::min(cap, budget / mass);
    for (std::size_t k = i; k < j; ++k) sol.q[order[k]] = q;
    budget = q == cap ? budget - cap * mass : 0.0;
    i = j;
  }
  for (std::size_t k = 0; k < p.size(); ++k) sol.value += sol.q[k] * p[k] * xi[k];
  return sol;
}

}  // namespace riskplan
