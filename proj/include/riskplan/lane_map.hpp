#pragma once

#include "riskplan/geometry.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace riskplan {

/// Lateral slack (m) beyond the lane edge when the ego is matched to its lane
/// while offset from it, e.g. during a bypass.
inline constexpr double kOffLaneMargin = 2.0;

using LaneId = std::string;
/// Ordered chain of lanes following successor links.
using LaneSequence = std::vector<LaneId>;

std::string to_string(const LaneSequence& seq);

struct Lane {
  LaneId id;
  Polyline centerline;
  double width{3.5};
  double speed_limit{15.0};
  std::optional<LaneId> left;
  std::optional<LaneId> right;
  std::vector<LaneId> successors;
};

struct LaneMatch {
  LaneId lane;
  Polyline::Projection projection;
};

class LaneMap {
 public:
  /// When no drivable polygon is given it is derived as the union of lane
  /// strips, which must form a single piece.
  LaneMap(std::vector<Lane> lanes, std::optional<Polygon> drivable = std::nullopt);

  bool has_lane(const LaneId& id) const { return index_.count(id) != 0; }
  const Lane& lane(const LaneId& id) const;
  const std::vector<Lane>& lanes() const { return lanes_; }
  const Polygon& drivable() const { return *drivable_; }

  /// Closest lane whose strip (plus `margin`) contains p and whose direction
  /// is within 90 degrees of `heading`.
  std::optional<LaneMatch> locate(const Point2& p, double heading, double margin = 0.5) const;

  /// Every successor chain starting at `start`, up to `depth` lanes long.
  std::vector<LaneSequence> sequences_from(const LaneId& start, int depth = 3) const;

  /// Centreline of the sequence, extended straight by `extension` metres at
  /// both ends so projections stay inside the line over a planning horizon.
  const Polyline& reference_line(const LaneSequence& seq) const;

  /// Lane strip polygon for one lane.
  Polygon lane_polygon(const LaneId& id) const;

 private:
  Polyline build_reference(const LaneSequence& seq) const;

  std::vector<Lane> lanes_;
  std::map<LaneId, std::size_t> index_;
  std::optional<Polygon> drivable_;
  std::map<std::string, Polyline> references_;
};

}  // namespace riskplan
