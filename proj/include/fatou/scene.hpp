#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fatou/error.hpp"
#include "fatou/geometry.hpp"

namespace fatou {

enum class SceneKind { kHyperplane, kLipschitzGraph, kKochCurve, kFourCornerCantor, kPolyline, kSphere };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& name);

class Polyline;
class CantorSet;

/// A closed boundary set E with exact oracles for dist(., E) and the surface
/// measure of surface balls. Scenes are immutable; every oracle is const and
/// safe for concurrent use.
class Scene {
 public:
  virtual ~Scene() = default;

  SceneKind kind() const { return kind_; }
  int ambient_dim() const { return ambient_dim_; }
  bool ur_label() const { return ur_label_; }
  /// Region of E covered by dyadic grids (the whole set when E is bounded).
  const Box2& extent() const { return extent_; }
  /// Declared relative accuracy of surface_measure.
  double measure_accuracy() const { return measure_accuracy_; }
  const nlohmann::json& params() const { return params_; }

  virtual double distance(const Point& p) const = 0;
  virtual Point nearest(const Point& p) const = 0;
  /// dist(box, E) for a closed planar box.
  virtual double box_distance(const Box2& box) const;
  /// Unchecked sigma(B(x, r) ∩ E).
  virtual double measure_raw(const Point& x, double r) const = 0;
  /// diam(E); infinite for unbounded scenes.
  virtual double diameter() const = 0;
  virtual bool bounded() const { return std::isfinite(diameter()); }
  /// Membership in the designated open set Omega (one side of E).
  virtual bool in_domain(const Point& p) const = 0;

  virtual const Polyline* curve() const { return nullptr; }
  virtual const CantorSet* cantor() const { return nullptr; }

  /// Tolerance used to decide that a point lies on E.
  double on_boundary_tolerance() const { return 1e-9; }

  /// sigma(Delta(x, r)) with precondition checks.
  double surface_measure(const Point& x, double r) const;

  nlohmann::json to_json() const;

 protected:
  Scene(SceneKind kind, int ambient_dim, Box2 extent, bool ur_label, double accuracy, nlohmann::json params)
      : kind_(kind),
        ambient_dim_(ambient_dim),
        extent_(extent),
        ur_label_(ur_label),
        measure_accuracy_(accuracy),
        params_(std::move(params)) {}
  void set_extent(const Box2& extent) { extent_ = extent; }

 private:
  SceneKind kind_;
  int ambient_dim_;
  Box2 extent_;
  bool ur_label_;
  double measure_accuracy_;
  nlohmann::json params_;
};

using ScenePtr = std::shared_ptr<const Scene>;

/// Planar polygonal chain, optionally closed, optionally continued by two
/// rays (used for Lipschitz graphs that extend to infinity).
class Polyline final : public Scene {
 public:
  enum class Side { kAbove, kInside, kComplement };

  struct Options {
    SceneKind kind = SceneKind::kPolyline;
    bool closed = false;
    bool rays = false;  // horizontal rays leaving the first and last vertex
    Side side = Side::kComplement;
    bool ur_label = true;
    nlohmann::json params;
  };

  Polyline(std::vector<Point> vertices, Options opts);

  double distance(const Point& p) const override;
  Point nearest(const Point& p) const override;
  double box_distance(const Box2& box) const override;
  double measure_raw(const Point& x, double r) const override;
  double diameter() const override;
  bool bounded() const override { return !opts_.rays; }
  bool in_domain(const Point& p) const override;
  const Polyline* curve() const override { return this; }

  const std::vector<Point>& vertices() const { return vertices_; }
  std::size_t segment_count() const { return segs_.size(); }
  /// Total arclength of the finite segments.
  double length() const { return cumulative_.back(); }
  /// Point at arclength parameter s in [0, length()].
  Point at(double s) const;
  /// Arclength parameter of the point of the finite chain nearest to p.
  double parameter_of(const Point& p) const;
  /// The sub-chain with parameters in [s0, s1] as consecutive vertices.
  std::vector<Point> sub_chain(double s0, double s1) const;
  /// Height of the graph at abscissa x (graph scenes only).
  double graph_height(double x) const;

 private:
  struct Seg {
    Point a, b;
  };
  struct Node {
    Box2 box;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };

  int build(int begin, int end);
  template <typename Visit, typename Bound>
  void traverse(Bound&& bound, double& best, Visit&& visit) const;

  std::vector<Point> vertices_;
  std::vector<Seg> segs_;          // finite segments, BVH order
  std::vector<int> seg_index_;     // BVH slot -> chain index
  std::vector<double> cumulative_; // arclength at chain vertices
  std::vector<Node> nodes_;
  Options opts_;
  Seg ray_lo_{}, ray_hi_{};
};

/// Four-corner Cantor prefractal of a given level in the unit square: the
/// union of 4^level closed squares of side 4^-level, carrying the self-similar
/// measure (a generation-k piece has mass 4^-k).
class CantorSet final : public Scene {
 public:
  CantorSet(int level, nlohmann::json params);

  double distance(const Point& p) const override;
  Point nearest(const Point& p) const override;
  double box_distance(const Box2& box) const override;
  double measure_raw(const Point& x, double r) const override;
  double diameter() const override { return std::sqrt(2.0); }
  bool in_domain(const Point& p) const override;
  const CantorSet* cantor() const override { return this; }

  int level() const { return level_; }
  /// Squares of generation k in depth-first (quadrant) order.
  std::vector<Box2> pieces(int k) const;

 private:
  template <typename F>
  void descend(const Box2& sq, int depth, F&& f) const;
  int level_;
};

class Hyperplane final : public Scene {
 public:
  Hyperplane(int ambient_dim, nlohmann::json params);
  double distance(const Point& p) const override;
  Point nearest(const Point& p) const override;
  double box_distance(const Box2& box) const override;
  double measure_raw(const Point& x, double r) const override;
  double diameter() const override { return kInf; }
  bool in_domain(const Point& p) const override;
  /// The extent [0,1] as a chain, so curve grids apply.
  const Polyline* curve() const override { return &chain_; }

 private:
  Polyline chain_;
};

/// Unit circle (ambient 2) or unit sphere (ambient 3); Omega is the interior.
class Sphere final : public Scene {
 public:
  Sphere(int ambient_dim, nlohmann::json params);
  double distance(const Point& p) const override;
  Point nearest(const Point& p) const override;
  double box_distance(const Box2& box) const override;
  double measure_raw(const Point& x, double r) const override;
  double diameter() const override { return 2.0; }
  bool in_domain(const Point& p) const override;
};

ScenePtr make_hyperplane(int ambient_dim = 2);
/// Piecewise-linear graph over [0,1] with `pieces` slopes drawn in [-slope, slope],
/// continued horizontally; passes through the origin.
ScenePtr make_lipschitz_graph(double slope, int pieces = 16, std::uint64_t seed = 1);
/// Generalized Koch prefractal on [0,1]x{0}; spike angle in degrees.
ScenePtr make_koch_curve(double angle_deg = 30.0, int level = 4);
ScenePtr make_cantor(int level = 6);
ScenePtr make_segment(Point a, Point b);
ScenePtr make_polyline(std::vector<Point> vertices, bool closed);
ScenePtr make_sphere(int ambient_dim = 2);

/// Builds a scene from its JSON description {schema, kind, params, ambient_dim}.
ScenePtr scene_from_json(const nlohmann::json& j);
ScenePtr load_scene(const std::string& path);

/// sigma(Delta(x, r)) / r^n statistics over a sample of centers and scales.
struct AdrReport {
  struct Sample {
    Point x;
    double r;
    double ratio;
  };
  std::vector<Sample> samples;
  double lower_constant = kInf;
  double upper_constant = 0.0;
  std::vector<double> scales_tested;
};

AdrReport verify_adr(const Scene& scene, const std::vector<Point>& centers, const std::vector<double>& scales);

struct Corkscrew {
  Point point;
  double clearance;  // achieved c: B(X, c r) ⊂ B(x, r) ∩ Omega
};

/// Interior corkscrew point for Delta(x, r), found by scanning a candidate
/// lattice over B(x, r) and refining by pattern search.
Corkscrew corkscrew_point(const Scene& scene, const Point& x, double r, double c_min = 1e-3);

}  // namespace fatou
