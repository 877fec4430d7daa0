#include "riskplan/geometry.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace riskplan;
using riskplan::testing::uniform;

namespace {

Polygon square(double cx, double cy, double half) { return make_box({cx, cy}, 0.0, half, half); }

// Dense boundary sampling: minimum distance from p to the polygon outline.
double sampled_boundary_distance(const Point2& p, const Polygon& poly, int per_edge = 20000) {
  double best = std::numeric_limits<double>::infinity();
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2 a = v[i];
    const Point2 b = v[(i + 1) % v.size()];
    for (int k = 0; k <= per_edge; ++k) {
      const double t = static_cast<double>(k) / per_edge;
      best = std::min(best, distance(p, a + (b - a) * t));
    }
  }
  return best;
}

// Monte Carlo free area oracle: fraction of a bounding grid covered.
double grid_area(const std::vector<Polygon>& polys, double x0, double x1, double y0, double y1, int n) {
  const double hx = (x1 - x0) / n;
  const double hy = (y1 - y0) / n;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (point_in_any({x0 + (i + 0.5) * hx, y0 + (j + 0.5) * hy}, polys)) ++hits;
    }
  }
  return hits * hx * hy;
}

double total_area(const std::vector<Polygon>& polys) {
  double a = 0.0;
  for (const auto& p : polys) a += p.area();
  return a;
}

}  // namespace

TEST_CASE("signed distance examples") {
  const Polygon unit = square(0.0, 0.0, 0.5);
  CHECK(signed_distance({0.0, 0.0}, unit) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(signed_distance({0.5, 0.5}, unit) == doctest::Approx(0.0).epsilon(1e-12));
  // Brute-force sampled boundary oracle.
  const double oracle = sampled_boundary_distance({2.0, 0.0}, unit);
  CHECK(oracle == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(signed_distance({2.0, 0.0}, unit) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("degenerate and malformed polygons are rejected") {
  CHECK_THROWS_AS(Polygon({{0, 0}, {1, 0}, {2, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(Polygon({{0, 0}, {1e-7, 0}, {0, 1e-7}}), std::invalid_argument);
  CHECK_THROWS_AS(Polygon({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(Polygon({{0, 0}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("polygon construction normalises orientation and collinear vertices") {
  const Polygon cw({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
  CHECK(cw.area() == doctest::Approx(1.0));
  CHECK(signed_area(cw.vertices()) > 0.0);
  const Polygon extra({{0, 0}, {0.5, 0}, {1, 0}, {1, 1}, {0, 1}});
  CHECK(extra.size() == 4);
}

TEST_CASE("signed distance on a non-convex polygon matches the sampled oracle") {
  const Polygon ell({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 3}, {0, 3}});
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Point2 p{uniform(rng, -1.0, 4.0), uniform(rng, -1.0, 4.0)};
    const double sd = signed_distance(p, ell);
    const double oracle = sampled_boundary_distance(p, ell, 2000);
    CHECK(std::abs(sd) == doctest::Approx(oracle).epsilon(1e-3).scale(1.0));
    CHECK((sd < 0.0) == (ell.contains(p) && oracle > 1e-9));
  }
}

TEST_CASE("signed distance is 1-Lipschitz") {
  const Polygon ell({{0, 0}, {3, 0}, {3, 1}, {1, 1}, {1, 3}, {0, 3}});
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const Point2 a{uniform(rng, -2.0, 5.0), uniform(rng, -2.0, 5.0)};
    const Point2 b{uniform(rng, -2.0, 5.0), uniform(rng, -2.0, 5.0)};
    CHECK(std::abs(signed_distance(a, ell) - signed_distance(b, ell)) <= distance(a, b) + 1e-12);
  }
}

TEST_CASE("signed distance expansion matches finite differences") {
  const Polygon box = make_box({1.0, -0.5}, 0.4, 2.0, 0.8);
  std::mt19937_64 rng(3);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 300) {
    const Point2 p{uniform(rng, -3.0, 5.0), uniform(rng, -3.0, 3.0)};
    const auto e = signed_distance_expansion(p, box);
    CHECK(e.value == doctest::Approx(signed_distance(p, box)).epsilon(1e-12));
    // Skip points near the medial axis where the closest feature switches.
    bool smooth = true;
    Eigen::Vector2d g_fd;
    Eigen::Matrix2d h_fd;
    for (int k = 0; k < 2; ++k) {
      const Point2 dp = k == 0 ? Point2{h, 0.0} : Point2{0.0, h};
      const auto ep = signed_distance_expansion(p + dp, box);
      const auto em = signed_distance_expansion(p - dp, box);
      g_fd[k] = (ep.value - em.value) / (2.0 * h);
      h_fd.col(k) = (ep.gradient - em.gradient) / (2.0 * h);
      if ((ep.gradient - em.gradient).norm() > 0.5) smooth = false;
    }
    if (!smooth) continue;
    ++checked;
    CHECK((e.gradient - g_fd).norm() < 1e-6);
    CHECK((e.hessian - h_fd).norm() < 1e-4 * std::max(1.0, e.hessian.norm()));
  }
}

TEST_CASE("polyline projection examples") {
  const Polyline line({{0, 0}, {10, 0}, {10, 10}});
  const auto on = line.project({4.0, 0.0});
  CHECK(on.d == doctest::Approx(0.0));
  CHECK(on.s == doctest::Approx(4.0));

  const auto left = line.project({5.0, 1.0});
  CHECK(left.d == doctest::Approx(1.0));
  CHECK(left.s == doctest::Approx(5.0));

  // Beyond the last vertex: sampled nearest-point oracle.
  const Point2 p{12.0, 13.0};
  const auto beyond = line.project(p);
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (int k = 0; k <= 200000; ++k) {
    const double s = line.length() * k / 200000.0;
    const double dd = distance(p, line.point_at(s));
    if (dd < best) {
      best = dd;
      best_s = s;
    }
  }
  CHECK(beyond.s == doctest::Approx(line.length()));
  CHECK(beyond.s == doctest::Approx(best_s).epsilon(1e-4));
  CHECK(std::abs(beyond.d) == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("projection reconstructs the nearest-point foot") {
  const Polyline line({{0, 0}, {5, 1}, {9, -2}, {14, 0}, {20, 6}});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Point2 p{uniform(rng, -3.0, 23.0), uniform(rng, -6.0, 9.0)};
    const auto pr = line.project(p);
    CHECK(pr.s >= 0.0);
    CHECK(pr.s <= line.length());
    CHECK(distance(line.point_at(pr.s), pr.foot) < 1e-9);
    CHECK(std::abs(std::abs(pr.d) - distance(p, pr.foot)) < 1e-9);
  }
}

TEST_CASE("polyline validation") {
  CHECK_THROWS_AS(Polyline({{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(Polyline({{0, 0}, {0, 0}, {1, 0}}), std::invalid_argument);
}

TEST_CASE("smooth aggregate examples") {
  const std::vector<double> equal{2.5, 2.5, 2.5};
  CHECK(smooth_aggregate(equal, -7.0) == doctest::Approx(2.5).epsilon(1e-15));
  const std::vector<double> pair{0.0, 1.0};
  // Direct evaluation: e^-10 / (1 + e^-10).
  const double oracle = std::exp(-10.0) / (1.0 + std::exp(-10.0));
  CHECK(oracle == doctest::Approx(4.539e-5).epsilon(1e-3));
  CHECK(smooth_aggregate(pair, -10.0) == doctest::Approx(oracle).epsilon(1e-12));
  const std::vector<double> mean{3.0, 7.0};
  CHECK(smooth_aggregate(mean, 0.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(smooth_aggregate(std::vector<double>{}, -1.0), std::invalid_argument);
}

TEST_CASE("smooth aggregate stays bounded, tends to the minimum and is monotone") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<double> g(n);
    for (auto& x : g) x = uniform(rng, -50.0, 50.0);
    const double lo = *std::min_element(g.begin(), g.end());
    const double hi = *std::max_element(g.begin(), g.end());
    for (double beta : {-1e4, -10.0, -1.0, -0.1, 0.0, 0.5, 1e3}) {
      const double v = smooth_aggregate(g, beta);
      CHECK(std::isfinite(v));
      CHECK(v >= lo - 1e-9);
      CHECK(v <= hi + 1e-9);
    }
    CHECK(smooth_aggregate(g, -1e6) == doctest::Approx(lo).epsilon(1e-9));
    // dS/dg_i = w_i (1 + beta (g_i - S)) is non-negative whenever
    // |beta| (max - min) <= 1, which is where monotonicity is guaranteed.
    const int i = static_cast<int>(rng() % n);
    const double spread = hi - lo + 0.25;
    for (double beta : {-1.0 / spread, -0.3 / spread, 0.0}) {
      auto bumped = g;
      bumped[i] += 0.25;
      CHECK(smooth_aggregate(bumped, beta) >= smooth_aggregate(g, beta) - 1e-12);
    }
  }
}

TEST_CASE("smooth aggregate is not monotone for a wide spread under strong negative beta") {
  // Raising an element far above the soft minimum lowers its weight faster
  // than its value rises, so the aggregate decreases.
  const std::vector<double> g{0.0, 0.5};
  const std::vector<double> bumped{0.0, 0.75};
  CHECK(smooth_aggregate(bumped, -10.0) < smooth_aggregate(g, -10.0));
}

TEST_CASE("smooth aggregate expansion matches finite differences") {
  std::mt19937_64 rng(21);
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 5);
    std::vector<double> g(n);
    for (auto& x : g) x = uniform(rng, -2.0, 2.0);
    const double beta = uniform(rng, -5.0, 0.0);
    const auto e = smooth_aggregate_expansion(g, beta);
    CHECK(e.value == doctest::Approx(smooth_aggregate(g, beta)).epsilon(1e-12));
    for (int k = 0; k < n; ++k) {
      auto gp = g, gm = g;
      gp[k] += h;
      gm[k] -= h;
      const auto ep = smooth_aggregate_expansion(gp, beta);
      const auto em = smooth_aggregate_expansion(gm, beta);
      CHECK(e.gradient[k] == doctest::Approx((ep.value - em.value) / (2 * h)).epsilon(1e-6));
      for (int j = 0; j < n; ++j) {
        CHECK(e.hessian(j, k) ==
              doctest::Approx((ep.gradient[j] - em.gradient[j]) / (2 * h)).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("occupancy union examples") {
  const Polygon a = square(0.0, 0.0, 0.5);
  const auto single = occupancy_union({a});
  REQUIRE(single.size() == 1);
  CHECK(single[0].vertices() == a.vertices());

  const Polygon far = square(5.0, 0.0, 0.5);
  const auto disjoint = occupancy_union({a, far});
  REQUIRE(disjoint.size() == 2);
  CHECK(total_area(disjoint) == doctest::Approx(2.0));

  // Inclusion-exclusion: 1 + 1 - 0.5.
  const Polygon half = square(0.5, 0.0, 0.5);
  const auto merged = occupancy_union({a, half});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].area() == doctest::Approx(1.0 + 1.0 - 0.5).epsilon(1e-9));

  const auto twice = occupancy_union({a, a});
  REQUIRE(twice.size() == 1);
  CHECK(twice[0].area() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("occupancy union area bounds and coverage") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Polygon> boxes;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      boxes.push_back(make_box({uniform(rng, -3, 3), uniform(rng, -3, 3)}, uniform(rng, -1.5, 1.5),
                               uniform(rng, 0.3, 2.5), uniform(rng, 0.3, 1.2)));
    }
    const auto u = occupancy_union(boxes);
    double max_in = 0.0, sum_in = 0.0;
    for (const auto& b : boxes) {
      max_in = std::max(max_in, b.area());
      sum_in += b.area();
    }
    const double area = total_area(u);
    CHECK(area >= max_in - 1e-9);
    CHECK(area <= sum_in + 1e-9);
    for (const auto& b : boxes) {
      for (const auto& v : b.vertices()) CHECK(point_in_any(v, u));
    }
  }
  // One instance against a grid oracle.
  const std::vector<Polygon> boxes{make_box({0, 0}, 0.3, 2.0, 1.0), make_box({1.5, 0.5}, -0.4, 1.5, 0.8)};
  const auto u = occupancy_union(boxes);
  CHECK(total_area(u) == doctest::Approx(grid_area(boxes, -4, 4, -4, 4, 800)).epsilon(5e-3));
}

TEST_CASE("polygon intersection and distance") {
  const Polygon a = square(0.0, 0.0, 0.5);
  CHECK(polygons_intersect(a, square(0.9, 0.0, 0.5)));
  CHECK_FALSE(polygons_intersect(a, square(1.3, 0.0, 0.5)));
  CHECK(polygons_intersect(a, square(0.0, 0.0, 0.1)));  // containment
  CHECK(polygon_distance(a, square(2.0, 0.0, 0.5)) == doctest::Approx(1.0));
  CHECK(polygon_distance(a, square(0.5, 0.0, 0.5)) == doctest::Approx(0.0));
}
