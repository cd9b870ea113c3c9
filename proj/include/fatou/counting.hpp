#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fatou/dyadic.hpp"
#include "fatou/harmonic.hpp"
#include "fatou/whitney.hpp"

namespace fatou {

/// Values of u at the sample points of the chosen component of each region.
struct SampledSolution {
  int k_min = 0, k_max = 0;
  std::vector<std::vector<std::vector<double>>> values;  // [k - k_min][id][slot]
  std::vector<std::vector<double>> std_error;            // [k - k_min][id], max over slots
  std::string provenance;

  const std::vector<double>& at(CubeRef q) const { return values[q.k - k_min][q.id]; }
  double max_abs() const;
  double max_std_error() const;
};

/// Sample points (member cell centers) of the chosen component of U_Q.
std::vector<Point> sample_points(const Catalog& catalog, const Subcatalog& sub, CubeRef q);

/// Evaluates a closed-form u at every sample point.
SampledSolution sample_solution(const Catalog& catalog, const Subcatalog& sub,
                                const std::function<double(const Point&)>& u, const std::string& provenance);

/// WoS estimates for several node-valued boundary data at once. Every sample
/// point gets one exit batch shared by all data sets; the shell is
/// shell_factor * ℓ(Q).
std::vector<SampledSolution> sample_solutions_wos(const Catalog& catalog, const Subcatalog& sub,
                                                  const HarmonicDomain& domain,
                                                  const std::vector<std::vector<double>>& node_data, long n_walks,
                                                  std::uint64_t seed, double shell_factor = 1e-3);

/// 1_A for A a random union of generation-k cubes, each kept with probability p.
struct DyadicIndicator {
  int k = 0;
  std::vector<int> cubes;  // ascending ids
  std::vector<double> node_values;
};

DyadicIndicator random_dyadic_indicator(const DyadicGrid& grid, int k, std::uint64_t seed, double p = 0.5);

/// Poisson extension of a dyadic indicator on a hyperplane grid to the upper half-plane.
double halfplane_extension(const DyadicGrid& grid, const DyadicIndicator& data, const Point& x);

/// One cube of a nested chain with the sample values of its region. Cubes
/// are indexed by generation, so a finer generation is strictly nested even
/// when the underlying sets coincide.
struct ChainLevel {
  CubeRef q;
  const std::vector<double>* values = nullptr;
};

struct OscillationPath {
  int count = 0;                              // k_0, the number of jumps
  std::vector<std::pair<int, int>> steps;     // (chain level, sample slot), top to bottom
};

/// Longest sequence over strictly nested levels with consecutive jumps > eps.
OscillationPath longest_oscillation(const std::vector<ChainLevel>& chain, double eps);

/// Cubes containing node from `top` down to generation k_last, or down to
/// `bottom` when given. Throws when the node is outside `top` or `bottom` is
/// not inside `top`.
std::vector<CubeRef> cube_chain(const DyadicGrid& grid, int node, CubeRef top, std::optional<CubeRef> bottom = {},
                                int k_last = -1);

/// N^{Q_0}u(x, eps, I) over generations up to k_last (default: the finest).
int counting_function(const SampledSolution& u, const DyadicGrid& grid, int node, double eps, CubeRef q0,
                      int k_last = -1);

/// The count restricted to chains between `bottom` and `top`; an empty
/// `bottom` stands for the point itself.
int doubly_truncated_counting(const SampledSolution& u, const DyadicGrid& grid, int node, double eps,
                              std::optional<CubeRef> bottom, CubeRef top);

struct CountingResult {
  CubeRef root;
  double eps = 0.0;
  int k_last = 0;
  std::string subcatalog;
  std::vector<int> nodes;  // node ids of root
  std::vector<int> N;
  double carleson_average = 0.0;
};

/// (1/σ) Σ N(x) w(x).
double carleson_average(const std::vector<int>& N, const std::vector<double>& weights, double sigma);

/// N at every node of q0. A depth-first pass shares the chain prefix among
/// all leaves below a cube.
CountingResult count_over_cube(const SampledSolution& u, const DyadicGrid& grid, double eps, CubeRef q0,
                               int k_last = -1, const std::string& subcatalog = "");

/// N for every generation-k_last cube below q0, in id order.
std::vector<int> leaf_counts(const SampledSolution& u, const DyadicGrid& grid, double eps, CubeRef q0, int k_last = -1);

/// Rows "x_id,eps,depth,N".
void write_counting_csv(const std::vector<CountingResult>& results, const std::string& path);

struct ConeCell {
  int cell = 0;
  CubeRef q;  // contributing cube of smallest side
};

struct DyadicCone {
  double tau = 0.0;
  std::vector<CubeRef> cubes;
  std::vector<ConeCell> cells;  // ascending cell id, each once
};

/// Union of the regions of `cubes` at fattening 2 tau. Needs a catalog built with cells.
DyadicCone build_cone(const Catalog& catalog, const std::vector<CubeRef>& cubes, double tau);
DyadicCone cone_at(const Catalog& catalog, int node, CubeRef q0, double tau);
DyadicCone cone_between(const Catalog& catalog, CubeRef bottom, CubeRef top, double tau);
/// T_{Q_0}: every cube inside q0.
DyadicCone carleson_region(const Catalog& catalog, CubeRef q0, double tau);

struct OverlapStats {
  std::map<int, long> histogram;  // multiplicity -> number of cells
  int max_multiplicity = 0;
};

/// How many regions each Whitney cell belongs to.
OverlapStats region_overlap(const Catalog& catalog);

/// Partition of the grid into stopping-time regimes (index >= 0) and bad cubes (-1).
struct CubePartition {
  std::vector<std::vector<int>> regime;  // [k - k_min][id]
  std::vector<CubeRef> top;              // Q(S) per regime

  int regime_of(const DyadicGrid& g, CubeRef q) const { return regime[q.k - g.k_min][q.id]; }
};

struct RegimeSplitReport {
  int node = 0;
  double eps = 0.0;
  int lhs = 0;
  int sigma1 = 0, sigma2 = 0, sigma3 = 0;
  bool holds = true;
  std::vector<CubeRef> witness;  // cubes of a longest chain
};

/// Compares N^{Q_0}u(x, eps) with the regime-wise doubly truncated counts,
/// the bad cubes containing x and the regime tops containing x.
RegimeSplitReport regime_split_check(const SampledSolution& u, const DyadicGrid& grid, const CubePartition& partition,
                               int node, double eps, CubeRef q0);

}  // namespace fatou
