#include "riskplan/lane_map.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace riskplan {
namespace {

constexpr double kExtension = 300.0;

double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * std::numbers::pi);
  if (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
  if (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
  return d;
}

}  // namespace

std::string to_string(const LaneSequence& seq) {
  std::string out;
  for (const auto& id : seq) {
    if (!out.empty()) out += ">";
    out += id;
  }
  return out;
}

LaneMap::LaneMap(std::vector<Lane> lanes, std::optional<Polygon> drivable) : lanes_(std::move(lanes)) {
  if (lanes_.empty()) throw std::invalid_argument("lane map has no lanes");
  for (std::size_t i = 0; i < lanes_.size(); ++i) {
    if (!index_.emplace(lanes_[i].id, i).second) throw std::invalid_argument("duplicate lane id " + lanes_[i].id);
    if (!(lanes_[i].width > 0.0)) throw std::invalid_argument("lane width must be positive");
  }
  for (const auto& l : lanes_) {
    for (const auto* ref : {&l.left, &l.right}) {
      if (*ref && !has_lane(**ref)) throw std::invalid_argument("unknown neighbour lane " + **ref);
    }
    for (const auto& s : l.successors) {
      if (!has_lane(s)) throw std::invalid_argument("unknown successor lane " + s);
    }
  }
  if (drivable) {
    drivable_ = std::move(drivable);
  } else {
    std::vector<Polygon> strips;
    for (const auto& l : lanes_) strips.push_back(lane_polygon(l.id));
    auto merged = occupancy_union(strips);
    if (merged.size() != 1) throw std::invalid_argument("lane strips do not form a single drivable area");
    drivable_ = std::move(merged.front());
  }
  for (const auto& l : lanes_) {
    for (const auto& seq : sequences_from(l.id)) {
      for (std::size_t n = 1; n <= seq.size(); ++n) {
        const LaneSequence prefix(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(n));
        references_.try_emplace(to_string(prefix), build_reference(prefix));
      }
    }
  }
}

const Lane& LaneMap::lane(const LaneId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown lane " + id);
  return lanes_[it->second];
}

std::optional<LaneMatch> LaneMap::locate(const Point2& p, double heading, double margin) const {
  std::optional<LaneMatch> best;
  for (const auto& l : lanes_) {
    const auto proj = l.centerline.project(p);
    if (std::abs(proj.d) > l.width * 0.5 + margin) continue;
    if (std::abs(angle_diff(heading, l.centerline.heading_at(proj.s))) > std::numbers::pi / 2) continue;
    if (!best || std::abs(proj.d) < std::abs(best->projection.d)) best = LaneMatch{l.id, proj};
  }
  return best;
}

std::vector<LaneSequence> LaneMap::sequences_from(const LaneId& start, int depth) const {
  std::vector<LaneSequence> out;
  std::vector<LaneSequence> stack{{start}};
  while (!stack.empty()) {
    LaneSequence seq = std::move(stack.back());
    stack.pop_back();
    const auto& succ = lane(seq.back()).successors;
    if (static_cast<int>(seq.size()) >= depth || succ.empty()) {
      out.push_back(std::move(seq));
      continue;
    }
    for (auto it = succ.rbegin(); it != succ.rend(); ++it) {
      LaneSequence next = seq;
      next.push_back(*it);
      stack.push_back(std::move(next));
    }
  }
  return out;
}

Polyline LaneMap::build_reference(const LaneSequence& seq) const {
  if (seq.empty()) throw std::invalid_argument("empty lane sequence");
  std::vector<Point2> pts;
  for (const auto& id : seq) {
    for (const auto& p : lane(id).centerline.points()) {
      if (pts.empty() || distance(pts.back(), p) > 1e-6) pts.push_back(p);
    }
  }
  const Polyline& first = lane(seq.front()).centerline;
  const Polyline& last = lane(seq.back()).centerline;
  const double h0 = first.heading_at(0.0);
  const double h1 = last.heading_at(last.length());
  pts.insert(pts.begin(), pts.front() - Point2{std::cos(h0), std::sin(h0)} * kExtension);
  pts.push_back(pts.back() + Point2{std::cos(h1), std::sin(h1)} * kExtension);
  return Polyline(std::move(pts));
}

const Polyline& LaneMap::reference_line(const LaneSequence& seq) const {
  const auto it = references_.find(to_string(seq));
  if (it == references_.end()) throw std::out_of_range("unknown lane sequence " + to_string(seq));
  return it->second;
}

Polygon LaneMap::lane_polygon(const LaneId& id) const {
  const Lane& l = lane(id);
  const Polyline left = l.centerline.offset(l.width * 0.5);
  const Polyline right = l.centerline.offset(-l.width * 0.5);
  std::vector<Point2> ring(right.points().begin(), right.points().end());
  ring.insert(ring.end(), left.points().rbegin(), left.points().rend());
  return Polygon(std::move(ring));
}

}  // namespace riskplan
