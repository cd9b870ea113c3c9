#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fatou/scene.hpp"

namespace fatou {

/// Boundary quadrature node. The patches of all nodes partition E ∩ extent:
/// an arclength interval [s0, s1] on curve scenes, a closed square on the
/// Cantor scene.
struct SampleNode {
  Point p;
  double weight = 0.0;
  double s0 = 0.0, s1 = 0.0;
  Box2 box;
};

struct DyadicCube {
  int k = 0;
  int id = 0;
  int parent = -1;
  int child_begin = 0, child_end = 0;  // ids in generation k + 1
  Point center;                        // x_Q, a point of E inside Q
  double ell = 1.0;                    // 2^-k
  double sigma = 0.0;
  int node_begin = 0, node_end = 0;
  double s0 = 0.0, s1 = 0.0;  // arclength range (curve scenes)
  Box2 bounds;                 // bounding box of the patches

  int node_count() const { return node_end - node_begin; }
  bool owns(int node) const { return node >= node_begin && node < node_end; }
};

struct CubeRef {
  int k = 0;
  int id = 0;
  friend bool operator==(const CubeRef&, const CubeRef&) = default;
  friend auto operator<=>(const CubeRef&, const CubeRef&) = default;
};

/// Dyadic cube tree over E ∩ extent. Nodes are stored in depth-first order so
/// every cube owns a contiguous node range. Plain data: tests may copy and
/// corrupt a grid to exercise the axiom checker.
struct DyadicGrid {
  ScenePtr scene;
  int k_min = 0, k_max = 0;
  std::uint64_t seed = 0;
  std::vector<SampleNode> nodes;
  std::vector<std::vector<DyadicCube>> generations;  // index k - k_min

  const std::vector<DyadicCube>& generation(int k) const;
  const DyadicCube& cube(int k, int id) const { return generation(k).at(id); }
  const DyadicCube& cube(CubeRef r) const { return cube(r.k, r.id); }
  int depth() const { return k_max - k_min; }
  std::size_t cube_count() const;
  double total_sigma() const;
  /// Node whose patch contains the boundary point p, or -1 off E ∩ extent.
  int node_of(const Point& p) const;
  /// The generation-k cube owning a node.
  int cube_of(int k, int node) const;
  /// The ancestor of (k, id) in generation k_anc <= k.
  int ancestor(int k, int id, int k_anc) const;
  /// dist(x, Q) over the exact patches of Q.
  double distance_to(const DyadicCube& q, const Point& x) const;
  /// dist(box, Q) over the exact patches of Q.
  double distance_to(const DyadicCube& q, const Box2& box) const;
};

struct GridOptions {
  int depth_cap = 12;
};

/// Builds the grid for generations k_min..k_max. Generations with
/// 2^-k >= diam(E)/2 are skipped on bounded scenes, so the effective k_min may
/// be larger than requested. Planar scenes only.
DyadicGrid build_grid(const ScenePtr& scene, int k_min, int k_max, std::uint64_t seed = 0, GridOptions opts = {});

struct AxiomReport {
  bool covering = true;    // each generation partitions the nodes, masses add up
  bool nesting = true;     // children lie inside their parent
  bool disjoint = true;    // same-generation cubes do not share nodes
  bool diameter = true;    // diam(Q) <= 2^-k
  bool inner_ball = true;  // a0 > 0
  double a0 = kInf;        // min over Q of r_Q / 2^-k
  double c1 = 0.0;         // max over Q of sup_{y in Q} |y - x_Q| / 2^-k
  double max_diam_ratio = 0.0;
  std::vector<std::string> witnesses;

  bool all_pass() const { return covering && nesting && disjoint && diameter && inner_ball; }
};

AxiomReport verify_grid_axioms(const DyadicGrid& grid);

/// Radius of the largest surface ball around x_Q (relative to E ∩ extent)
/// contained in Q.
double inner_radius(const DyadicGrid& grid, const DyadicCube& q);

/// λQ = {x : dist(x, Q) <= (λ - 1) ℓ(Q)}.
class Dilate {
 public:
  Dilate(const DyadicGrid& grid, CubeRef q, double lambda);
  bool contains(const Point& x) const;
  /// Nodes whose sample point lies in λQ, ascending.
  const std::vector<int>& nodes() const { return nodes_; }
  double sigma() const { return sigma_; }
  double lambda() const { return lambda_; }

 private:
  const DyadicGrid* grid_;
  CubeRef q_;
  double lambda_;
  double reach_;
  std::vector<int> nodes_;
  double sigma_ = 0.0;
};

Dilate dilate(const DyadicGrid& grid, CubeRef q, double lambda);

struct CubeRecord {
  int k = 0, id = 0, parent_id = -1;
  double cx = 0.0, cy = 0.0, ell = 0.0, sigma = 0.0;
  friend bool operator==(const CubeRecord&, const CubeRecord&) = default;
};

std::vector<CubeRecord> grid_records(const DyadicGrid& grid);
void write_grid_csv(const DyadicGrid& grid, const std::string& path);
std::vector<CubeRecord> read_grid_csv(const std::string& path);

}  // namespace fatou
