#pragma once

#include <functional>
#include <vector>

#include "fatou/corona.hpp"
#include "fatou/counting.hpp"
#include "fatou/whitney.hpp"

namespace fatou {

using SolutionFn = std::function<double(const Point&)>;

struct Ball {
  Point x;
  double r = 0.0;
};

// ---- Carleson gradient estimate ----

struct CarlesonGradientOptions {
  double step_factor = 1e-2;  // FD step = step_factor * δ(Y)
  int subdivisions = 4;       // midpoint rule on an s x s subgrid per cell
};

struct CarlesonBallSum {
  Ball ball;
  double sum = 0.0;         // Σ |∇u|² δ dY over B ∩ Ω
  double normalized = 0.0;  // sum / r^n
  long points = 0;
};

struct CarlesonGradientReport {
  std::vector<CarlesonBallSum> balls;
  double sup = 0.0;
  double richardson = 0.0;  // relative change of one gradient when the step is halved
};

/// Sup over balls of r^-n ∫_{B ∩ Ω} |∇u|² δ with central-difference gradients.
/// The decomposition must tile the balls.
CarlesonGradientReport carleson_gradient_norm(const SolutionFn& u, const WhitneyDecomposition& w,
                                              const std::vector<Ball>& balls, const CarlesonGradientOptions& opts = {});

// ---- Stopping-time approximant ----

/// A face shared by two Whitney cells.
struct CellFace {
  int a = 0, b = 0;  // a < b
  double length = 0.0;
  Point mid;
};

/// Faces of positive length between cells of an ascending list, sorted by (a, b).
std::vector<CellFace> cell_faces(const WhitneyDecomposition& w, const std::vector<int>& cells);

struct ApproxGroup {
  CubeRef top;
  int regime = -1;  // corona regime it came from; -1 for a bad cube
  std::vector<CubeRef> cubes;
  double value = 0.0;
};

struct Approximant {
  const WhitneyDecomposition* whitney = nullptr;
  std::vector<double> value;  // per cell id; NaN where φ is undefined
  std::vector<int> group_of;  // per cell id; -1 where φ is undefined
  std::vector<ApproxGroup> groups;
  double eps = 0.0;
  double deviation = 0.0;  // max over defined cells of |u - φ| at the cell center
  std::vector<double> deviation_history;  // before and after each refinement round
  int rounds = 0;
  std::vector<CarlesonBallSum> carleson;  // face-jump TV per ball B(x_Q, K^{1/2} ℓ(Q))
  double carleson_candidate = 0.0;

  bool defined(int cell) const { return group_of[cell] >= 0; }
  /// Stopping-time partition of the grid induced by the groups.
  CubePartition partition(const DyadicGrid& grid) const;
};

/// φ constant per regime and per bad cube. A cell shared by several regions
/// belongs to its finest cube, and a group takes the value of u at the first
/// cell it owns in sample order, top first. Each refinement round splits a
/// regime whose cells deviate by more than eps at the top, and keeps the split
/// only when the regime's deviation does not grow.
Approximant build_approximant(const SolutionFn& u, const Catalog& catalog, const CoronaDecomposition& corona,
                              double eps, int max_rounds = 1);

/// Approximant with explicit per-cell values (NaN for undefined cells).
Approximant approximant_from_values(const WhitneyDecomposition& w, std::vector<double> value);

// ---- Cone functional ----

/// Σ over faces inside the cone of |jump φ| · length · δ(face)^-n. Each face
/// is charged to its lower-id cell; the result is aligned with cone.cells.
std::vector<double> cone_gradient_contributions(const Approximant& phi, const DyadicCone& cone);
double cone_gradient_functional(const Approximant& phi, const DyadicCone& cone);

struct ConeBoundSample {
  int node = 0;
  int group = 0;
  int count = 0;  // doubly truncated N between the group top and the cube of x
  double functional = 0.0;
};

struct ConeBoundReport {
  std::vector<ConeBoundSample> samples;
  double constant = 0.0;  // max count / functional over samples with functional > 0
  long unbounded = 0;     // samples with count > 0 and functional = 0
};

/// Counts against the cone functional over (x, group) pairs with x drawn from
/// the nodes under the group's top.
ConeBoundReport cone_bound_check(const SampledSolution& u, const Catalog& catalog, const Approximant& phi, double eps,
                               int n_pairs, std::uint64_t seed);

// ---- Fubini collapse ----

struct FubiniReport {
  double lhs = 0.0;  // Σ_x w(x) functional(Γ(x))
  double rhs = 0.0;  // Σ_faces TV · σ(Q_face)
  double ratio = 0.0;
  long faces = 0;
  std::vector<long> face_nodes;  // per charged face of T_{Q_0}: nodes whose cone holds it
  std::vector<long> face_predicted;  // nodes in the finer contributing cube
};

FubiniReport fubini_collapse_check(const Approximant& phi, const Catalog& catalog, CubeRef q0, double tau);

}  // namespace fatou
