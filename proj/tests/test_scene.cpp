#include <gtest/gtest.h>

#include <cmath>

#include "fatou/rng.hpp"
#include "fatou/scene.hpp"

using namespace fatou;

namespace {

/// Arclength of the part of a polygonal graph inside B(x, r), by a midpoint
/// rule on a fine abscissa partition.
double graph_ball_length(const std::vector<Point>& v, Point x, double r, double lo, double hi, int n) {
  auto f = [&](double t) {
    if (t <= v.front().x) return v.front().y;
    if (t >= v.back().x) return v.back().y;
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
      if (t <= v[i + 1].x) return v[i].y + (v[i + 1].y - v[i].y) * (t - v[i].x) / (v[i + 1].x - v[i].x);
    return v.back().y;
  };
  double total = 0.0;
  const double h = (hi - lo) / n;
  for (int i = 0; i < n; ++i) {
    const double a = lo + i * h, b = a + h;
    const Point pa{a, f(a), 0.0}, pb{b, f(b), 0.0};
    const Point mid = 0.5 * (pa + pb);
    if (dist(mid, x) < r) total += dist(pa, pb);
  }
  return total;
}

/// Area of B(c, r) ∩ square by a midpoint rule on vertical chords.
double chord_area(Point c, double r, const Box2& b, int n) {
  double a = 0.0;
  const double h = b.width() / n;
  for (int i = 0; i < n; ++i) {
    const double x = b.x0 + (i + 0.5) * h;
    const double dx = x - c.x;
    if (std::abs(dx) >= r) continue;
    const double half = std::sqrt(r * r - dx * dx);
    const double lo = std::max(b.y0, c.y - half), hi = std::min(b.y1, c.y + half);
    if (hi > lo) a += (hi - lo) * h;
  }
  return a;
}

double cantor_brute_measure(const CantorSet& c, Point x, double r) {
  double total = 0.0;
  const double mass = std::ldexp(1.0, -2 * c.level());
  for (const Box2& sq : c.pieces(c.level())) {
    if (point_box_distance(x, sq) >= r) continue;
    total += mass * chord_area(x, r, sq, 400) / (sq.width() * sq.height());
  }
  return total;
}

}  // namespace

TEST(Scene, HyperplaneUnitBallMeetsLengthTwo) {
  auto e = make_hyperplane(2);
  EXPECT_DOUBLE_EQ(e->surface_measure({0.3, 0.0, 0.0}, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(e->surface_measure({-7.0, 0.0, 0.0}, 0.25), 0.5);
}

TEST(Scene, HyperplaneThreeDimensionalDisk) {
  auto e = make_hyperplane(3);
  EXPECT_NEAR(e->surface_measure({0.1, 0.2, 0.0}, 2.0), 4.0 * kPi, 1e-12);
}

TEST(Scene, CantorPieceMassFromSelfSimilarity) {
  auto e = make_cantor(4);
  const CantorSet& c = *e->cantor();
  for (int k = 1; k <= 3; ++k) {
    for (const Box2& piece : c.pieces(k)) {
      const double got = e->measure_raw(piece.center(), piece.width());
      EXPECT_NEAR(got, std::ldexp(1.0, -2 * k), 1e-12) << "k=" << k;
    }
  }
}

TEST(Scene, CantorMeasureMatchesBruteForce) {
  auto e = make_cantor(3);
  const CantorSet& c = *e->cantor();
  CounterRng rng(11);
  for (int t = 0; t < 20; ++t) {
    const Point x{rng.uniform(), rng.uniform(), 0.0};
    const double r = rng.uniform(0.01, 0.4);
    EXPECT_NEAR(e->measure_raw(x, r), cantor_brute_measure(c, x, r), 2e-4 * std::max(1e-3, e->measure_raw(x, r)) + 1e-7);
  }
}

TEST(Scene, LipschitzGraphMeasureAgainstArclengthQuadrature) {
  auto e = make_lipschitz_graph(0.5);
  const double got = e->surface_measure({0.0, 0.0, 0.0}, 1.0);
  const double oracle = graph_ball_length(e->curve()->vertices(), {0.0, 0.0, 0.0}, 1.0, -1.5, 1.5, 2000000);
  EXPECT_NEAR(got, oracle, 1e-4 * oracle);
  EXPECT_GE(got, 1.0);
  EXPECT_LE(got, 2.237);
}

TEST(Scene, MeasureMonotoneInRadius) {
  for (const auto& e : {make_lipschitz_graph(0.5), make_koch_curve(30.0, 4), make_cantor(5)}) {
    const Point x = e->nearest({0.4, 0.3, 0.0});
    double prev = 0.0;
    for (double r = 0.01; r < 0.5; r *= 1.3) {
      const double m = e->measure_raw(x, r);
      EXPECT_GE(m, prev);
      prev = m;
    }
  }
}

TEST(Scene, MeasureAdditiveOnDisjointBalls) {
  auto e = make_koch_curve(30.0, 4);
  const Polyline& c = *e->curve();
  const Point a = c.at(0.2), b = c.at(0.9);
  const double r = 0.2 * dist(a, b);
  // Two disjoint balls versus one ball covering both arcs of the curve.
  const double both = e->measure_raw(a, r) + e->measure_raw(b, r);
  EXPECT_GT(both, 0.0);
  EXPECT_LE(e->measure_raw(a, r) + e->measure_raw(b, r), e->measure_raw(0.5 * (a + b), 0.5 * dist(a, b) + r) + 1e-9);
}

TEST(Scene, DistanceIsOneLipschitz) {
  const std::vector<ScenePtr> scenes = {make_hyperplane(2), make_lipschitz_graph(0.5), make_koch_curve(30.0, 4),
                                        make_cantor(5), make_segment({0, 0, 0}, {1, 0, 0}), make_sphere(2)};
  for (const auto& e : scenes) {
    CounterRng rng(hash_key(3, static_cast<std::uint64_t>(e->kind())));
    for (int t = 0; t < 10000; ++t) {
      const Point x{rng.uniform(-1.0, 2.0), rng.uniform(-1.0, 2.0), 0.0};
      const Point y{rng.uniform(-1.0, 2.0), rng.uniform(-1.0, 2.0), 0.0};
      ASSERT_LE(std::abs(e->distance(x) - e->distance(y)), dist(x, y) + 1e-12) << to_string(e->kind());
    }
  }
}

TEST(Scene, NearestRealizesDistance) {
  for (const auto& e : {make_lipschitz_graph(0.3), make_koch_curve(30.0, 3), make_cantor(4)}) {
    CounterRng rng(5);
    for (int t = 0; t < 200; ++t) {
      const Point x{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5), 0.0};
      EXPECT_NEAR(dist(x, e->nearest(x)), e->distance(x), 1e-12);
      EXPECT_LE(e->distance(e->nearest(x)), 1e-12);
    }
  }
}

TEST(Scene, BoxDistanceAgreesWithCornerSampling) {
  for (const auto& e : {make_koch_curve(30.0, 3), make_cantor(4), make_hyperplane(2)}) {
    CounterRng rng(9);
    for (int t = 0; t < 100; ++t) {
      const double x = rng.uniform(-0.2, 1.0), y = rng.uniform(-0.3, 1.0), s = rng.uniform(0.001, 0.2);
      const Box2 b{x, y, x + s, y + s};
      const double d = e->box_distance(b);
      // The box distance can not exceed the distance of any box point.
      EXPECT_LE(d, e->distance(b.center()) + 1e-12);
      EXPECT_GE(d, e->distance(b.center()) - 0.5 * b.diameter() - 1e-12);
    }
  }
}

TEST(Scene, AdrHyperplaneExactlyTwo) {
  auto e = make_hyperplane(2);
  const AdrReport rep = verify_adr(*e, {{0, 0, 0}, {5, 0, 0}}, {0.01, 0.1, 1.0, 10.0});
  EXPECT_DOUBLE_EQ(rep.lower_constant, 2.0);
  EXPECT_DOUBLE_EQ(rep.upper_constant, 2.0);
  EXPECT_EQ(rep.samples.size(), 8u);
}

TEST(Scene, AdrCantorBoundedRatio) {
  auto e = make_cantor(6);
  std::vector<Point> centers;
  for (const Box2& sq : e->cantor()->pieces(3)) centers.push_back({sq.x0, sq.y0, 0.0});
  std::vector<double> scales;
  for (int k = 1; k <= 5; ++k) scales.push_back(std::ldexp(1.0, -2 * k));
  const AdrReport rep = verify_adr(*e, centers, scales);
  EXPECT_GT(rep.lower_constant, 0.0);
  EXPECT_LE(rep.upper_constant / rep.lower_constant, 16.0);
  for (const auto& s : rep.samples) {
    EXPECT_GE(s.ratio, rep.lower_constant);
    EXPECT_LE(s.ratio, rep.upper_constant);
  }
}

TEST(Scene, AdrKochFinite) {
  auto e = make_koch_curve(30.0, 4);
  const Polyline& c = *e->curve();
  std::vector<Point> centers;
  for (int i = 0; i <= 10; ++i) centers.push_back(c.at(c.length() * i / 10.0));
  const AdrReport rep = verify_adr(*e, centers, {0.001, 0.01, 0.1, 0.5});
  EXPECT_GT(rep.lower_constant, 0.0);
  EXPECT_TRUE(std::isfinite(rep.upper_constant));
}

TEST(Scene, Errors) {
  auto e = make_hyperplane(2);
  try {
    e->surface_measure({0.0, 0.5, 0.0}, 1.0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kPointOffBoundary);
  }
  try {
    e->surface_measure({0.0, 0.0, 0.0}, 0.0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kNonPositiveRadius);
  }
  try {
    verify_adr(*e, {}, {1.0});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kEmptySample);
  }
}

TEST(Scene, CorkscrewHalfPlane) {
  auto e = make_hyperplane(2);
  const Corkscrew c = corkscrew_point(*e, {0, 0, 0}, 1.0);
  EXPECT_NEAR(c.point.x, 0.0, 1e-9);
  EXPECT_NEAR(c.point.y, 0.5, 1e-9);
  EXPECT_NEAR(c.clearance, 0.5, 1e-9);
}

TEST(Scene, CorkscrewGraphClearance) {
  auto e = make_lipschitz_graph(0.5);
  const Corkscrew c = corkscrew_point(*e, {0, 0, 0}, 1.0);
  EXPECT_GE(c.clearance, 1.0 / (2.0 * std::sqrt(1.25)) - 1e-9);
  EXPECT_TRUE(e->in_domain(c.point));
}

TEST(Scene, CorkscrewClearanceHolds) {
  auto cantor = make_cantor(6);
  const Box2 piece = cantor->cantor()->pieces(3)[5];
  const Point x{piece.x0, piece.y0, 0.0};
  const double r = std::ldexp(1.0, -6);
  const Corkscrew c = corkscrew_point(*cantor, x, r);
  EXPECT_GE(cantor->distance(c.point), c.clearance * r * (1 - 1e-12));
  EXPECT_LE(dist(c.point, x), (1.0 - c.clearance) * r * (1 + 1e-12));
  EXPECT_GT(c.clearance, 0.1);
}

TEST(Scene, NoCorkscrewWhenClearanceUnreachable) {
  auto e = make_hyperplane(2);
  try {
    corkscrew_point(*e, {0, 0, 0}, 1.0, 0.75);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::kNoCorkscrew);
  }
}

TEST(Scene, JsonRoundTrip) {
  for (const auto& e : {make_lipschitz_graph(0.25, 16, 4), make_koch_curve(25.0, 3), make_cantor(3), make_hyperplane(3)}) {
    const auto j = e->to_json();
    EXPECT_EQ(j.at("schema"), 1);
    const auto back = scene_from_json(j);
    EXPECT_EQ(back->kind(), e->kind());
    EXPECT_EQ(back->ur_label(), e->ur_label());
    const Point p{0.31, 0.47, 0.2};
    EXPECT_DOUBLE_EQ(back->distance(p), e->distance(p));
  }
  EXPECT_THROW(scene_from_json(nlohmann::json{{"kind", "torus"}}), Error);
}

TEST(Scene, UrLabels) {
  EXPECT_TRUE(make_lipschitz_graph(0.5)->ur_label());
  EXPECT_TRUE(make_koch_curve()->ur_label());
  EXPECT_FALSE(make_cantor()->ur_label());
}

TEST(Scene, KochLengthGrowth) {
  const double th = 30.0 * kPi / 180.0;
  for (int level = 0; level <= 4; ++level) {
    auto e = make_koch_curve(30.0, level);
    EXPECT_NEAR(e->curve()->length(), std::pow(2.0 / (1.0 + std::cos(th)), level), 1e-12);
  }
}
