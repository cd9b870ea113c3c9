#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fatou/counting.hpp"
#include "fatou/dyadic.hpp"
#include "fatou/harmonic.hpp"
#include "fatou/whitney.hpp"

namespace fatou {

// ---- Calibration and poles ----

struct CalibrationParams {
  double C_eta_K = 0.0;  // C^{-1}ℓ(Q) <= |y - X| <= Cℓ(Q) for y in Q, X in U_Q
  double a = 0.0;        // C^{-2}/4
  double gamma = 0.0;    // a/4
  double eps = 0.1;
  double alpha = 0.5;
  int M1 = 0, M2 = 0;
  bool brackets_hold = true;  // false once M1, M2 are overridden for desk-scale depth
  double c2 = 0.0, c3 = 0.0, c4 = 0.0, eps0 = 0.0;
};

/// C_{η,K} measured over every region of a catalog built with cells.
double region_constant(const Catalog& catalog);

/// Constants with M1, M2 the smallest integers satisfying the dyadic brackets.
CalibrationParams calibrate(double C_eta_K, double eps = 0.1, double alpha = 0.5);

/// Replaces M1, M2 and clears brackets_hold.
CalibrationParams with_depth_override(CalibrationParams c, int M1, int M2);

struct PolePlacement {
  CubeRef q, big, little;
  Point x_Q, p, s;
  int p_slot = 0, s_slot = 0;  // sample slots in the chosen components of Q(big), Q(little)
  double p_dist = 0.0, s_dist = 0.0;
  bool p_bracket = false;  // aεℓ <= |p - x_Q| <= εℓ
  bool s_bracket = false;  // |s - x_Q| <= γεℓ
};

/// p_Q and s_Q are the first samples of the chosen components of U_{Q(big)}
/// and U_{Q(little)}. Throws kInsufficientDepth past k_max, and
/// kBracketViolation when brackets_hold is set but a bracket fails.
PolePlacement place_poles(const Catalog& catalog, const Subcatalog& sub, CubeRef q, const CalibrationParams& calib);

// ---- Density stopping ----

struct DensityOptions {
  long walks = 4000;
  std::uint64_t seed = 0;
  int max_doublings = 2;
  double z = 2.0;  // stderr multiple a comparison must clear
  double shell_factor = 1e-3;  // shell = shell_factor * 2^-k_max
};

struct DensityCube {
  CubeRef q;
  double ratio = 0.0;  // density of Q (or 2Q) over density of R (or 2R)
  double std_error = 0.0;
  long walks = 0;
};

struct DensityStoppingState {
  CubeRef root;
  Point pole;
  double A = 0.0, delta = 0.0;
  std::vector<DensityCube> hd, ld, indeterminate;
  std::vector<long> budget_history;  // walks per escalation level actually drawn
};

/// Maximal strict subcubes of R with high density (2Q against 2R, factor A)
/// and low density (Q against R, factor delta). A = infinity disables HD.
DensityStoppingState density_stopping(const DyadicGrid& grid, CubeRef R, const Point& pole, double A, double delta,
                                      const HarmonicDomain& domain, const DensityOptions& opts);

// ---- LD iteration ----

struct EQCheck {
  CubeRef q;
  MeasureEstimate omega_E, omega_Q;
  double margin = 0.0, margin_se = 0.0;  // ω(E) - (1 - δ)ω(Q)
  bool ok = false;                       // margin >= -3 stderr
};

struct LDForest {
  CubeRef root;
  int m = 0;
  double delta = 0.0;
  std::vector<std::vector<CubeRef>> levels;       // LD^0 .. LD^m
  std::map<CubeRef, std::vector<CubeRef>> ld_of;  // LD(Q) for R and every member of F_{1,m}
  std::map<CubeRef, PolePlacement> poles;
  std::vector<CubeRef> no_pole;  // too deep for Q(little); LD(Q) taken empty
  std::vector<CubeRef> F1, F2;
  std::map<CubeRef, std::vector<int>> E;  // E_Q node sets, ascending
  std::vector<EQCheck> e_checks;
  long indeterminate = 0;
  std::vector<std::pair<CubeRef, DensityCube>> undecided;  // (stopping root, cube) with its final budget
  bool e_disjoint = true;
  bool separated = true;
  double mass_F1 = 0.0, mass_F2 = 0.0;
};

/// Largest-first thinning: nested survivors differ by more than M2 generations.
std::vector<CubeRef> separate_family(const DyadicGrid& grid, std::vector<CubeRef> F1, int M2);

LDForest iterate_LD(const Catalog& catalog, const Subcatalog& sub, CubeRef R, const CalibrationParams& calib,
                    double delta, int m, const HarmonicDomain& domain, const DensityOptions& opts);

// ---- Oscillating solutions ----

struct UQSetup {
  Point x_Q;
  double ell = 1.0;
  Point p, s;
  std::function<bool(const Point&)> in_E;  // E_Q
  std::function<bool(const Point&)> in_Q;
  bool force_case2 = false;
};

struct OscillatingSolution {
  int case_tag = 1;
  bool dichotomy_unverified = false;  // planar run where the test selected the potential case
  MeasureEstimate omega_p_Q, omega_p_E, omega_s_E;
  MeasureEstimate u_p, u_s;
  double g_p = 0.0, g_s = 0.0;  // normalized potential at p, s (potential case)
  double separation = 0.0, separation_se = 0.0;
  double target = 0.0;  // c2 = ε^α / 2
  bool meets_target = false;
};

/// Throws kPrecondition unless ω^p(E) >= (1 - ε)ω^p(Q) within 3 stderr.
OscillatingSolution construct_uQ(const HarmonicDomain& domain, const UQSetup& setup, const CalibrationParams& calib,
                                 long walks, std::uint64_t seed);

// ---- Khintchine randomization ----

struct KhintchineOptions {
  int B = 256;
  long walks = 2000;
  std::uint64_t seed = 1;
};

struct KhintchineReport {
  int B = 0;
  std::size_t family = 0;
  double c4 = 0.0, threshold = 0.0, eps0 = 0.0, predicted_frequency = 0.0;
  long pairs = 0, passes = 0;  // (leaf x, b) pairs
  std::vector<double> pass_rate_per_b;
  std::vector<double> frequency;   // per family member: share of b with |u_b(p) - u_b(s)| > threshold
  std::vector<double> separation;  // |u_Q(p_Q) - u_Q(s_Q)|
  double min_frequency = 0.0;
  double max_abs_ub = 0.0, max_ub_excess = 0.0;  // excess = |u_b| - 1 - 3 stderr
  bool bounded = true;
  long witnesses = 0, witnesses_valid = 0;
  bool all_pass() const { return passes == pairs && bounded && witnesses_valid == witnesses; }
};

/// u_b = Σ b_Q ω(E_Q) over F_{2,m} at every sample of R's subtree, from one
/// exit batch per sample point. Checks Σ_Q 1_{F(Q,b)}(x) <= N^R u_b(x, ε0)
/// at every leaf and rebuilds the alternating p/s witness chain.
KhintchineReport khintchine_experiment(const Catalog& catalog, const Subcatalog& sub, const LDForest& forest,
                                       const CalibrationParams& calib, const HarmonicDomain& domain,
                                       const KhintchineOptions& opts);

// ---- Bilateral corona ----

struct CoronaParams {
  double eta = 0.2;
  double K = 2.0;
  int line_samples = 64;
};

struct CubeFit {
  Point origin, dir;  // fitted line
  double set_to_graph = 0.0, graph_to_set = 0.0;
  double error = 0.0;  // sum of the two one-sided errors
  bool good = false;   // error < η ℓ(Q)
  std::size_t nodes = 0;
};

/// Line fit over the grid nodes in B(x_Q, Kℓ(Q)). With `within` set, the
/// direction is clamped to angle atan(η) around it.
CubeFit fit_cube(const DyadicGrid& grid, CubeRef q, const CoronaParams& p, const Point* within = nullptr);

struct Regime {
  CubeRef top;
  std::vector<CubeRef> cubes;  // sorted
  Point origin, dir;           // the graph Γ_S fitted at the top
};

struct PackingReport {
  std::vector<CubeRef> roots;
  std::vector<double> constant;  // Σ_{Q ⊆ R, Q in family} σ(Q) / σ(R)
  double max = 0.0;
};

struct CoronaDecomposition {
  const DyadicGrid* grid = nullptr;
  CoronaParams params;
  std::vector<std::vector<CubeFit>> fits;  // [k - k_min][id], as used for the verdict
  CubePartition partition;
  std::vector<Regime> regimes;
  std::vector<CubeRef> bad;
  PackingReport packing;  // family = bad cubes and regime tops, roots = every cube

  bool good(CubeRef q) const { return partition.regime_of(*grid, q) >= 0; }
};

CoronaDecomposition bilateral_corona(const DyadicGrid& grid, const CoronaParams& p = {});

struct CoherencyReport {
  bool unique_top = true;
  bool interval_closed = true;
  bool all_or_no_children = true;
  bool coherent() const { return unique_top && interval_closed && all_or_no_children; }
};

CoherencyReport check_coherency(const DyadicGrid& grid, const std::vector<CubeRef>& cubes);

PackingReport verify_packing(const DyadicGrid& grid, const std::vector<CubeRef>& family,
                             const std::vector<CubeRef>& roots);

/// Every cube of the grid, generation by generation.
std::vector<CubeRef> all_cubes(const DyadicGrid& grid);

// ---- Augmented regions and sawtooths ----

struct AugmentedRegion {
  CubeRef q;
  bool split = false;      // false for bad cubes: W_Q = W_Q^0
  std::vector<int> cells;  // W*_Q (W_Q^0 for bad cubes), ascending
  std::vector<int> plus, minus;  // cells above / below Γ_S, ascending
  std::vector<int> connectors;
  bool ok = true;
  std::string diagnostic;
};

/// W*_Q for a good cube: W_Q^0 plus shortest connector paths reaching each
/// child of the same regime on each side of Γ_S. A missing connector clears
/// `ok` and leaves a diagnostic.
AugmentedRegion augment_and_split(const Catalog& catalog, const CoronaDecomposition& corona, CubeRef q);

struct SawtoothDomain {
  std::vector<CubeRef> cubes;
  int sign = 1;
  std::vector<int> cells;
  std::vector<int> harnack;  // BFS steps between each parent/child region pair
  int max_harnack = 0;
  double min_clearance = 0.0;  // min over Q of max over its cells of dist(center, ∂Ω_S) / ℓ(Q)
  double dist_ratio_min = 0.0, dist_ratio_max = 0.0;  // dist(X, E) / dist(X, ∂Ω_S) at sampled centers
  std::size_t samples = 0;
  std::vector<std::string> diagnostics;
};

SawtoothDomain build_sawtooth(const Catalog& catalog, const CoronaDecomposition& corona,
                              const std::vector<CubeRef>& cubes, int sign, std::size_t n_samples = 1000,
                              std::uint64_t seed = 0);

// ---- Harmonic-measure corona ----

struct CoronaHMEntry {
  int regime = 0;
  CubeRef top;
  Point pole;
  double pole_distance = 0.0;  // dist(p, Q(S)) / ℓ(Q(S))
  bool pole_ok = false;
  double min_ratio = 0.0, max_ratio = 0.0;  // ω^p(3R) σ(Q(S)) / σ(R)
  double max_std_error = 0.0;
  std::size_t members = 0;
};

struct CoronaHMReport {
  std::vector<CoronaHMEntry> entries;
  PackingReport packing;  // of the regime tops
};

CoronaHMReport verify_corona_hm(const DyadicGrid& grid, const std::vector<Regime>& regimes,
                                const std::vector<Point>& poles, const HarmonicDomain& domain, long walks,
                                std::uint64_t seed, double c_pole = 64.0);

}  // namespace fatou
