#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fatou/dyadic.hpp"
#include "fatou/rng.hpp"

namespace fatou {

struct WosParams {
  double shell = 1e-3;   // absorb when δ(X) < shell
  double safety = 1e-3;  // jump radius is δ(X)(1 - safety)
  long max_steps = 100000;
};

/// Ω is the side of the scene selected by Scene::in_domain.
struct HarmonicDomain {
  ScenePtr scene;
  WosParams params;

  HarmonicDomain with_shell(double h) const {
    HarmonicDomain d = *this;
    d.params.shell = h;
    return d;
  }
};

struct ExitSample {
  Point exit;
  long steps = 0;
  bool capped = false;
};

ExitSample wos_exit_sample(const HarmonicDomain& domain, const Point& x, CounterRng& rng);

struct MeasureEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_walks = 0;  // completed walks
  long capped = 0;
  std::uint64_t seed = 0;

  double capped_fraction() const { return n_walks + capped > 0 ? static_cast<double>(capped) / (n_walks + capped) : 0.0; }
};

/// Mean and standard error of per-walk values.
MeasureEstimate summarize(const std::vector<double>& values, long capped, std::uint64_t seed);

/// One batch of exit points from X. Walk i uses the stream (seed, stream, i),
/// so every functional evaluated on the same batch shares its random numbers.
struct ExitBatch {
  Point origin;
  std::uint64_t seed = 0;
  std::vector<Point> exits;  // completed walks only
  long capped = 0;
  long total_steps = 0;

  MeasureEstimate mean(const std::function<double(const Point&)>& f) const;
  MeasureEstimate measure(const std::function<bool(const Point&)>& target) const;
};

ExitBatch sample_exits(const HarmonicDomain& domain, const Point& x, long n_walks, std::uint64_t seed,
                       std::uint64_t stream = 0);

/// Exit batch reduced to grid nodes: node[i] is the node whose patch holds exit i,
/// or -1 when the exit leaves E ∩ extent.
struct NodeBatch {
  Point origin;
  std::uint64_t seed = 0;
  std::vector<int> node;
  long capped = 0;

  /// Estimate of ∫ f dω where f is given per node (0 off the grid).
  MeasureEstimate mean(const std::vector<double>& node_values) const;
  /// ω of the node range [begin, end).
  MeasureEstimate range(int begin, int end) const;
  /// ω of a sorted node set.
  MeasureEstimate set(const std::vector<int>& sorted_nodes) const;
};

NodeBatch sample_exit_nodes(const HarmonicDomain& domain, const DyadicGrid& grid, const Point& x, long n_walks,
                            std::uint64_t seed, std::uint64_t stream = 0);

MeasureEstimate harmonic_measure(const HarmonicDomain& domain, const Point& x,
                                 const std::function<bool(const Point&)>& target, long n_walks, std::uint64_t seed);

/// ∫ f dω^X for boundary data with |f| <= 1.
MeasureEstimate evaluate_solution(const HarmonicDomain& domain, const Point& x,
                                  const std::function<double(const Point&)>& f, long n_walks, std::uint64_t seed);

/// Harmonic measure of the boundary interval [a, b] (a, b may be infinite) in the
/// upper half-plane, seen from (x, t). Also valid in the upper half-space for
/// slabs {a <= y_1 <= b}.
double halfplane_interval_measure(const Point& x, double a, double b, int ambient_dim = 2);

/// Harmonic measure of the counterclockwise arc [θ0, θ1] of the unit circle,
/// seen from a point of the open unit disk.
double disk_arc_measure(const Point& x, double theta0, double theta1);

/// (1/ρ) ∫_{D(center, ρ)} c_n |X - y|^{1-n} dσ(y) for a flat disk in the
/// boundary plane of a three-dimensional half-space, with c_n = 1/(4π).
/// Refuses ambient dimension 2, where the kernel is logarithmic.
double single_layer_potential(const Scene& scene, const Point& x, const Point& center, double radius);

/// Finite-difference solution of the Dirichlet problem on a rectangle, for
/// cross-validation of the Monte Carlo estimates.
class FdRectangle {
 public:
  FdRectangle(const Box2& rect, int n, const std::function<double(const Point&)>& f, double tol = 1e-10);
  double at(const Point& p) const;
  int iterations() const { return iterations_; }

 private:
  Box2 rect_;
  int nx_, ny_;
  double hx_, hy_;
  std::vector<double> u_;
  int iterations_ = 0;
};

/// One case of the half-plane/disk validation battery.
struct BatteryCase {
  std::string domain;  // "half-plane" or "disk"
  Point x;
  double a = 0.0, b = 0.0;  // interval or arc
  double exact = 0.0;
  MeasureEstimate estimate;
  bool within_3se = false;
};

struct BatteryReport {
  std::vector<BatteryCase> cases;
  int passed = 0;
  double max_capped_fraction = 0.0;
};

BatteryReport validation_battery(int n_cases, long n_walks, std::uint64_t seed, double shell = 1e-3);

}  // namespace fatou
