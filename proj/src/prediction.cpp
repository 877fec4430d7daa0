#include "riskplan/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace riskplan {
namespace {

constexpr int kSubsteps = 2;

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

double lon_accel(LonIntent intent, double nominal) {
  switch (intent) {
    case LonIntent::Accelerate:
      return nominal;
    case LonIntent::Decelerate:
      return -nominal;
    case LonIntent::Maintain:
      break;
  }
  return 0.0;
}

std::vector<AgentState> rollout(const AgentState& start, const AgentShape& shape, const Polyline* reference,
                                double accel, double speed_cap, const PredictionConfig& cfg) {
  std::vector<AgentState> states{start};
  states.reserve(static_cast<std::size_t>(cfg.horizon_steps) + 1);
  AgentState s = start;
  const double h = cfg.dt / kSubsteps;
  for (int k = 0; k < cfg.horizon_steps; ++k) {
    for (int sub = 0; sub < kSubsteps; ++sub) {
      double steer = 0.0;
      if (reference != nullptr) {
        const double lookahead = std::max(cfg.min_lookahead, cfg.lookahead_time * s.speed);
        steer = pure_pursuit_steer(s, *reference, lookahead, shape.wheelbase());
      }
      double a = accel;
      if (s.speed + a * h > speed_cap) a = std::max(0.0, (speed_cap - s.speed) / h);
      s = agent_step(s, a, steer, shape.wheelbase(), h);
    }
    states.push_back(s);
  }
  return states;
}

}  // namespace

std::string_view to_string(LonIntent intent) {
  switch (intent) {
    case LonIntent::Maintain:
      return "maintain";
    case LonIntent::Accelerate:
      return "accelerate";
    case LonIntent::Decelerate:
      return "decelerate";
  }
  return "unknown";
}

Polygon footprint(const AgentState& s, const AgentShape& shape, double inflation) {
  return make_box(s.position(), s.heading, shape.half_length, shape.half_width, inflation);
}

double IntentionSet::total_probability() const {
  double acc = 0.0;
  for (const auto& p : predictions) acc += p.probability();
  return acc;
}

AgentState agent_step(const AgentState& s, double accel, double steer, double wheelbase, double dt) {
  AgentState n;
  n.x = s.x + s.speed * std::cos(s.heading) * dt;
  n.y = s.y + s.speed * std::sin(s.heading) * dt;
  n.heading = wrap_angle(s.heading + s.speed / wheelbase * std::tan(steer) * dt);
  n.speed = std::max(0.0, s.speed + accel * dt);
  return n;
}

double pure_pursuit_steer(const AgentState& s, const Polyline& reference, double lookahead, double wheelbase,
                          double lateral_offset, double max_steer) {
  const auto proj = reference.project(s.position());
  const Point2 target = reference.frenet_to_cartesian(proj.s + lookahead, lateral_offset);
  const Point2 rel = target - s.position();
  const double alpha = wrap_angle(std::atan2(rel.y, rel.x) - s.heading);
  const double dist = std::max(rel.norm(), 1e-3);
  return std::clamp(std::atan(2.0 * wheelbase * std::sin(alpha) / dist), -max_steer, max_steer);
}

std::map<LaneId, double> lateral_vote(const std::vector<AgentState>& history, const std::vector<LaneId>& lanes,
                                      const LaneMap& map, const PredictionConfig& cfg) {
  if (history.empty()) throw std::invalid_argument("lateral_vote needs at least one observed state");
  const std::size_t window = std::min(std::max<std::size_t>(cfg.vote_window, 1), history.size());
  std::vector<double> score;
  for (const auto& id : lanes) {
    const Polyline& line = map.reference_line({id});
    double acc = 0.0;
    for (std::size_t i = history.size() - window; i < history.size(); ++i) {
      acc += std::abs(line.project(history[i].position()).d);
    }
    score.push_back(-acc / static_cast<double>(window) / cfg.vote_temperature);
  }
  const double top = *std::max_element(score.begin(), score.end());
  double den = 0.0;
  for (double& s : score) den += (s = std::exp(s - top));
  std::map<LaneId, double> out;
  for (std::size_t i = 0; i < lanes.size(); ++i) out[lanes[i]] = score[i] / den;
  return out;
}

IntentionSet predict_agent(const AgentTrack& track, const LaneMap& map, const PredictionConfig& cfg) {
  if (track.history.empty()) throw std::invalid_argument("predict_agent needs at least one observed state");
  const AgentState& now = track.history.back();
  IntentionSet set;
  set.agent = track.id;
  set.shape = track.shape;

  const auto match = map.locate(now.position(), now.heading);
  if (!match) {
    AgentIntention free{{}, LonIntent::Maintain, 1.0};
    set.predictions.push_back({free, rollout(now, track.shape, nullptr, 0.0, now.speed, cfg)});
    return set;
  }

  std::vector<LaneId> candidates{match->lane};
  const Lane& current = map.lane(match->lane);
  for (const auto* side : {&current.left, &current.right}) {
    if (!*side) continue;
    const Lane& nb = map.lane(**side);
    const double h = nb.centerline.heading_at(nb.centerline.project(now.position()).s);
    if (std::abs(wrap_angle(h - now.heading)) < std::numbers::pi / 2) candidates.push_back(nb.id);
  }
  const auto lateral = lateral_vote(track.history, candidates, map, cfg);

  double prior_sum = 0.0;
  for (const auto& [intent, p] : cfg.longitudinal_prior) {
    if (p < 0.0) throw std::invalid_argument("negative longitudinal prior");
    prior_sum += p;
  }
  if (!(prior_sum > 0.0)) throw std::invalid_argument("longitudinal prior has no mass");

  for (const auto& lane_id : candidates) {
    const auto sequences = map.sequences_from(lane_id);
    const double p_lane = lateral.at(lane_id) / static_cast<double>(sequences.size());
    const double cap = std::min(cfg.max_speed, std::max(now.speed, map.lane(lane_id).speed_limit));
    for (const auto& seq : sequences) {
      const Polyline& ref = map.reference_line(seq);
      for (const auto& [intent, prior] : cfg.longitudinal_prior) {
        const double p = p_lane * prior / prior_sum;
        if (p <= 0.0) continue;
        const double speed_cap = intent == LonIntent::Accelerate ? cap : now.speed;
        set.predictions.push_back(
            {AgentIntention{seq, intent, p},
             rollout(now, track.shape, &ref, lon_accel(intent, cfg.nominal_accel), speed_cap, cfg)});
      }
    }
  }
  return set;
}

IntentionSet inject_noise(const IntentionSet& set, const NoiseSpec& noise) {
  if (noise.boost < 0.0 || noise.boost >= 1.0) throw std::invalid_argument("noise boost must lie in [0, 1)");
  IntentionSet out = set;
  std::vector<bool> hit(out.predictions.size(), false);
  double target_mass = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < out.predictions.size(); ++i) {
    const auto& lat = out.predictions[i].intention.lateral;
    if (!lat.empty() && lat.front() == noise.target_lane) {
      hit[i] = true;
      ++hits;
      target_mass += out.predictions[i].probability();
    }
  }
  if (hits == 0 || noise.boost == 0.0 || target_mass >= 1.0) return out;
  const double boosted = target_mass + noise.boost * (1.0 - target_mass);
  for (std::size_t i = 0; i < out.predictions.size(); ++i) {
    double& p = out.predictions[i].intention.probability;
    if (hit[i]) {
      p = target_mass > 0.0 ? p * boosted / target_mass : boosted / static_cast<double>(hits);
    } else {
      p *= (1.0 - boosted) / (1.0 - target_mass);
    }
  }
  return out;
}

std::size_t IntentionCombination::choice_for(AgentId agent) const {
  for (const auto& c : choices) {
    if (c.agent == agent) return c.prediction;
  }
  throw std::out_of_range("agent not part of the intention combination");
}

std::vector<IntentionCombination> intention_combinations(const std::vector<IntentionSet>& sets,
                                                         const CombinationCaps& caps) {
  if (caps.per_agent == 0 || caps.max_combinations == 0) throw std::invalid_argument("caps must be positive");
  std::vector<IntentionCombination> beam{IntentionCombination{}};
  // Keeping the best partial products at every stage is exact for products
  // of non-negative factors under the (probability, lexicographic) order.
  for (const auto& set : sets) {
    std::vector<std::size_t> order(set.predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&set](std::size_t a, std::size_t b) {
      return set.predictions[a].probability() > set.predictions[b].probability();
    });
    if (order.size() > caps.per_agent) order.resize(caps.per_agent);
    if (order.empty()) continue;

    std::vector<IntentionCombination> next;
    next.reserve(beam.size() * order.size());
    for (const auto& partial : beam) {
      for (std::size_t idx : order) {
        IntentionCombination c = partial;
        c.choices.push_back({set.agent, idx});
        c.probability *= set.predictions[idx].probability();
        next.push_back(std::move(c));
      }
    }
    std::stable_sort(next.begin(), next.end(), [](const IntentionCombination& a, const IntentionCombination& b) {
      return a.probability > b.probability;
    });
    if (next.size() > caps.max_combinations) next.resize(caps.max_combinations);
    beam = std::move(next);
  }
  double total = 0.0;
  for (const auto& c : beam) total += c.probability;
  if (total > 0.0) {
    for (auto& c : beam) c.probability /= total;
  } else {
    for (auto& c : beam) c.probability = 1.0 / static_cast<double>(beam.size());
  }
  return beam;
}

}  // namespace riskplan
