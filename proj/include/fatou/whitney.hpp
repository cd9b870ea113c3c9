#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "fatou/dyadic.hpp"

namespace fatou {

/// Closed dyadic square of side 2^-level with lower corner (ix, iy) * side.
struct WhitneyCell {
  Box2 box;
  int level = 0;
  std::int64_t ix = 0, iy = 0;
  double side = 0.0;
  double dist = 0.0;  // dist(J, E)
  bool in_domain = true;
  std::vector<int> neighbors;

  double diam() const { return side * std::sqrt(2.0); }
  /// The concentric dilate J*(τ) = (1 + τ)J.
  Box2 dilated(double tau) const { return box.scaled(1.0 + tau); }
};

/// Fixed dilation constant: τ ≤ τ0 keeps J1*(τ) ∩ J2*(τ) ≠ ∅ equivalent to
/// J1, J2 touching.
inline constexpr double kTau0 = 0.125;

struct WhitneyOptions {
  double min_cell = 1e-3;
  /// Cells farther than relevance_ratio * side from `focus` are not refined;
  /// their area is reported as pruned instead of tiled.
  Box2 focus = Box2::empty();
  double relevance_ratio = kInf;
};

class WhitneyDecomposition {
 public:
  WhitneyDecomposition(ScenePtr scene, Box2 box, WhitneyOptions opts);

  const Scene& scene() const { return *scene_; }
  const Box2& box() const { return box_; }
  const WhitneyOptions& options() const { return opts_; }
  const std::vector<WhitneyCell>& cells() const { return cells_; }
  const WhitneyCell& cell(int id) const { return cells_[id]; }
  std::size_t size() const { return cells_.size(); }
  /// Area of Ω ∩ box left untiled because refinement reached min_cell.
  double collar_area() const { return collar_area_; }
  double pruned_area() const { return pruned_area_; }
  bool capped() const { return collar_area_ > 0.0; }
  /// Cell with the given dyadic address, or -1.
  int find(int level, std::int64_t ix, std::int64_t iy) const;
  /// Cells of the given level whose squares meet `region`, ascending id.
  std::vector<int> cells_meeting(int level, const Box2& region) const;
  int min_level() const { return min_level_; }
  int max_level() const { return max_level_; }
  /// Cell containing p (closed squares; lowest id on shared edges), or -1.
  int locate(const Point& p) const;

 private:
  struct Key {
    int level;
    std::int64_t ix, iy;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };

  void link_neighbors();

  ScenePtr scene_;
  Box2 box_;
  WhitneyOptions opts_;
  std::vector<WhitneyCell> cells_;
  std::unordered_map<Key, int, KeyHash> index_;
  std::vector<std::vector<int>> by_level_;  // per level: ids sorted by (ix, iy)
  int min_level_ = 0, max_level_ = -1;
  double collar_area_ = 0.0;
  double pruned_area_ = 0.0;
};

WhitneyDecomposition whitney_decompose(const ScenePtr& scene, const Box2& box, WhitneyOptions opts);

struct WhitneyViolation {
  int cell;
  double lower, dist4, dist, upper;  // 4 diam(J), dist(4J), dist(J), 40 diam(J)
};

/// Cells violating 4 diam(J) <= dist(4J, E) <= dist(J, E) <= 40 diam(J),
/// recomputed from the scene.
std::vector<WhitneyViolation> check_whitney_property(const WhitneyDecomposition& w);

struct RegionParams {
  double eta = 1e-4;
  double K = 1e4;
  double tau = kTau0 / 2.0;
  int s_max = 8;
};

/// Whitney decomposition sized for every W_Q^0 of the grid: the box reaches
/// K^{1/2} ℓ beyond E ∩ extent and refinement stops at η^{1/4} 2^-k_max.
WhitneyDecomposition whitney_for_grid(const DyadicGrid& grid, const RegionParams& p);

/// W_Q^0: cells with η^{1/4}ℓ(Q) <= ℓ(J) <= K^{1/2}ℓ(Q) and dist(J, Q) <= K^{1/2}ℓ(Q).
/// Throws kEmptyRegion naming Q when no cell qualifies.
std::vector<int> collect_WQ0(const DyadicGrid& grid, const WhitneyDecomposition& w, CubeRef q, double eta, double K);

/// The three inequalities defining W_Q^0, evaluated exactly as written.
inline bool wq0_admits(double side, double dist_jq, double ell, double eta, double K) {
  const double lo = std::pow(eta, 0.25) * ell;
  const double hi = std::sqrt(K) * ell;
  return lo <= side && side <= hi && dist_jq <= hi;
}

struct Component {
  std::vector<int> cells;  // ascending id
  Box2 bounds;
  Point centroid;          // area-weighted
  double area = 0.0;
  bool interior = false;   // every member cell lies in Ω
  std::size_t n_cells = 0;
  std::vector<int> samples;
};

struct WhitneyRegion {
  CubeRef q;
  double eta = 0.0, K = 0.0, tau = 0.0;
  std::vector<int> cells;  // W_Q^0, ascending id; empty when dropped
  std::size_t n_cells = 0;
  std::vector<Component> components;

  bool contains(const WhitneyDecomposition& w, const Point& y) const;
};

/// U_Q with components ordered by the lexicographic lower corner of their
/// smallest-id cell. Samples: up to s_max cells per component, largest first,
/// then nearest to x_Q, then lowest id.
WhitneyRegion build_UQ(const DyadicGrid& grid, const WhitneyDecomposition& w, CubeRef q, std::vector<int> wq0,
                       double tau, int s_max = 8);

/// Upper bound on #W_Q^0 from volume packing.
double packing_bound(double eta, double K);

/// All regions of a grid. Member cell lists are dropped unless keep_cells is set.
struct Catalog {
  const DyadicGrid* grid = nullptr;
  const WhitneyDecomposition* whitney = nullptr;
  RegionParams params;
  std::vector<std::vector<WhitneyRegion>> regions;  // [k - k_min][id]

  const WhitneyRegion& region(CubeRef q) const { return regions[q.k - grid->k_min][q.id]; }
  std::size_t max_components() const;
  std::size_t max_cells() const;
};

Catalog build_catalog(const DyadicGrid& grid, const WhitneyDecomposition& w, const RegionParams& p,
                      bool keep_cells = false);

enum class SubcatalogStrategy { kInteriorFirst, kLowestIndex, kAdversarialRandom };

std::string to_string(SubcatalogStrategy s);
SubcatalogStrategy subcatalog_strategy_from_string(const std::string& name);

struct Subcatalog {
  SubcatalogStrategy strategy = SubcatalogStrategy::kInteriorFirst;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> choice;  // [k - k_min][id] -> component index

  int at(const DyadicGrid& g, CubeRef q) const { return choice[q.k - g.k_min][q.id]; }
};

Subcatalog select_subcatalog(const Catalog& catalog, SubcatalogStrategy strategy, std::uint64_t seed = 0);

/// Per-Q records {q_k, q_id, cell ids, component of each cell, chosen index}.
void write_regions_csv(const Catalog& catalog, const Subcatalog& sub, const std::string& path);

}  // namespace fatou
