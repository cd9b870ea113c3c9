#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fatou/corona.hpp"

using namespace fatou;

namespace {

RegionParams small_params() {
  RegionParams p;
  p.eta = 1.0 / 256.0;
  p.K = 256.0;
  return p;
}

RegionParams cantor_params() {
  RegionParams p;
  p.eta = 1.0 / 64.0;
  p.K = 64.0;
  p.s_max = 4;
  return p;
}

struct World {
  DyadicGrid grid;
  WhitneyDecomposition whitney;
  Catalog catalog;
  Subcatalog sub;
};

std::unique_ptr<World> make_world(const ScenePtr& scene, int k_min, int k_max, const RegionParams& p) {
  DyadicGrid g = build_grid(scene, k_min, k_max);
  WhitneyDecomposition w = whitney_for_grid(g, p);
  auto world = std::unique_ptr<World>(new World{std::move(g), std::move(w), {}, {}});
  world->catalog = build_catalog(world->grid, world->whitney, p, true);
  world->sub = select_subcatalog(world->catalog, SubcatalogStrategy::kInteriorFirst);
  return world;
}

/// ω of the boundary interval [a, b] ∩ [0, 1] seen from x in the upper half-plane.
double clipped_measure(const Point& x, double a, double b) {
  a = std::max(a, 0.0);
  b = std::min(b, 1.0);
  return b > a ? halfplane_interval_measure(x, a, b) : 0.0;
}

/// Closed-form density ratio ω(Q)/σ(Q) over ω(R)/σ(R) on the unit interval.
double halfplane_density_ratio(const DyadicGrid& g, CubeRef q, CubeRef r, const Point& pole) {
  const Box2& bq = g.cube(q).bounds;
  const Box2& br = g.cube(r).bounds;
  return (clipped_measure(pole, bq.x0, bq.x1) / bq.width()) / (clipped_measure(pole, br.x0, br.x1) / br.width());
}

bool inside(const DyadicGrid& g, CubeRef outer, CubeRef inner) {
  return inner.k >= outer.k && g.ancestor(inner.k, inner.id, outer.k) == outer.id;
}

}  // namespace

// ---- Calibration ----

TEST(Calibration, DyadicBracketsAndConstants) {
  for (double C : {1.0, 2.0, 18.32, 100.0}) {
    for (double eps : {0.05, 0.1, 0.3}) {
      const CalibrationParams c = calibrate(C, eps);
      EXPECT_LT(std::ldexp(C, -c.M1), eps);
      EXPECT_LE(eps, std::ldexp(C, -c.M1 + 1));
      EXPECT_LT(std::ldexp(C, -c.M2), c.gamma);
      EXPECT_LE(c.gamma, std::ldexp(C, -c.M2 + 1));
      EXPECT_LT(c.gamma, c.a / 2.0);
      EXPECT_DOUBLE_EQ(c.a, 1.0 / (4.0 * C * C));
      EXPECT_DOUBLE_EQ(c.c2, 0.5 * std::sqrt(eps));
      EXPECT_DOUBLE_EQ(c.c4, c.c2 / std::sqrt(2.0));
      EXPECT_DOUBLE_EQ(c.eps0, c.c4 / 16.0);
      EXPECT_TRUE(c.brackets_hold);
    }
  }
  EXPECT_FALSE(with_depth_override(calibrate(4.0), 1, 1).brackets_hold);
  EXPECT_THROW(calibrate(0.5), Error);
  EXPECT_THROW(calibrate(4.0, 0.6), Error);
}

TEST(Calibration, RegionConstantBoundsEveryRegion) {
  const auto w = make_world(make_hyperplane(2), 0, 5, small_params());
  const double C = region_constant(w->catalog);
  EXPECT_GT(C, 1.0);
  // Independent check at the cube centers and every member cell center.
  for (int k = 0; k <= 5; ++k) {
    for (const DyadicCube& q : w->grid.generation(k)) {
      for (int c : w->catalog.region({k, q.id}).cells) {
        const double d = dist(q.center, w->whitney.cell(c).box.center());
        EXPECT_LE(d, C * q.ell);
        EXPECT_GE(d, q.ell / C);
      }
    }
  }
  const Catalog bare = build_catalog(w->grid, w->whitney, small_params(), false);
  try {
    region_constant(bare);
    FAIL() << "expected a precondition error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

// ---- Poles ----

TEST(Poles, HalfPlaneOuterBracketHoldsAtCalibratedM1) {
  const auto w = make_world(make_hyperplane(2), 0, 10, small_params());
  const CalibrationParams full = calibrate(region_constant(w->catalog));
  ASSERT_LE(full.M1 + 1, 10);
  const CalibrationParams c = with_depth_override(full, full.M1, 1);
  const PolePlacement pp = place_poles(w->catalog, w->sub, {0, 0}, c);
  EXPECT_EQ(pp.big.k, full.M1);
  EXPECT_EQ(pp.little.k, full.M1 + 1);
  EXPECT_TRUE(pp.p_bracket);
  EXPECT_NEAR(pp.p_dist, dist(pp.p, w->grid.cube(0, 0).center), 0.0);
  // Heights of order 2^-M1 and 2^-M1-M2.
  EXPECT_LE(pp.p.y, c.C_eta_K * std::ldexp(1.0, -c.M1));
  EXPECT_GE(pp.p.y, std::ldexp(1.0, -c.M1) / c.C_eta_K);
  EXPECT_LE(pp.s.y, c.C_eta_K * std::ldexp(1.0, -c.M1 - c.M2));
  EXPECT_TRUE(w->catalog.region(pp.big).contains(w->whitney, pp.p));
  EXPECT_TRUE(w->catalog.region(pp.little).contains(w->whitney, pp.s));
}

TEST(Poles, MiscalibratedM1RaisesBracketViolation) {
  const auto w = make_world(make_hyperplane(2), 0, 10, small_params());
  CalibrationParams c = calibrate(region_constant(w->catalog));
  c.M1 -= 3;
  c.M2 = 1;
  try {
    place_poles(w->catalog, w->sub, {0, 0}, c);
    FAIL() << "expected a bracket violation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBracketViolation);
  }
}

TEST(Poles, InsufficientDepth) {
  const auto w = make_world(make_hyperplane(2), 0, 4, small_params());
  const CalibrationParams c = with_depth_override(calibrate(4.0), 3, 2);
  try {
    place_poles(w->catalog, w->sub, {0, 0}, c);
    FAIL() << "expected an insufficient-depth error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientDepth);
  }
  EXPECT_NO_THROW(place_poles(w->catalog, w->sub, {0, 0}, with_depth_override(calibrate(4.0), 2, 2)));
}

TEST(Poles, CantorPolesLieInChosenComponents) {
  const auto w = make_world(make_cantor(4), 0, 7, cantor_params());
  const double C = region_constant(w->catalog);
  const CalibrationParams c = with_depth_override(calibrate(C), 2, 2);
  const CubeRef q{2, 1};
  const PolePlacement pp = place_poles(w->catalog, w->sub, q, c);
  EXPECT_TRUE(inside(w->grid, q, pp.big));
  EXPECT_TRUE(inside(w->grid, pp.big, pp.little));
  const auto& big = w->catalog.region(pp.big).components.at(w->sub.at(w->grid, pp.big));
  const auto& lit = w->catalog.region(pp.little).components.at(w->sub.at(w->grid, pp.little));
  EXPECT_EQ(pp.p, w->whitney.cell(big.samples.at(0)).box.center());
  EXPECT_EQ(pp.s, w->whitney.cell(lit.samples.at(0)).box.center());
  // The scale bracket that C guarantees: |s - x_Q| <= C ℓ(Q(little)).
  EXPECT_LE(pp.s_dist, C * w->grid.cube(pp.little).ell);
  EXPECT_LE(pp.p_dist, C * w->grid.cube(pp.big).ell);
}

// ---- Density stopping ----

TEST(DensityStopping, UniformHalfPlaneHasNoLowDensityCubes) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 8);
  const HarmonicDomain d{g.scene, {}};
  const DensityStoppingState st = density_stopping(g, {0, 0}, {0.5, 0.5, 0.0}, kInf, 0.01, d, {});
  EXPECT_TRUE(st.ld.empty());
  EXPECT_TRUE(st.hd.empty());
  EXPECT_EQ(st.budget_history.front(), 4000);
}

TEST(DensityStopping, LowDensityCubesMatchPoissonKernel) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 7);
  const HarmonicDomain d{g.scene, {}};
  const Point pole{0.5, 0.05, 0.0};
  const double delta = 0.1;
  DensityOptions o;
  o.walks = 20000;
  const DensityStoppingState st = density_stopping(g, {0, 0}, pole, kInf, delta, d, o);
  ASSERT_FALSE(st.ld.empty());
  std::set<CubeRef> unsure;
  for (const DensityCube& c : st.indeterminate) unsure.insert(c.q);
  for (const DensityCube& c : st.ld) {
    EXPECT_LT(halfplane_density_ratio(g, c.q, {0, 0}, pole), 1.5 * delta) << c.q.k << "," << c.q.id;
    // Maximality: the parent does not clearly qualify.
    if (c.q.k > 1) {
      const CubeRef parent{c.q.k - 1, g.cube(c.q).parent};
      EXPECT_GT(halfplane_density_ratio(g, parent, {0, 0}, pole), delta / 1.5);
    }
  }
  // Every cube well below the threshold is covered by a reported or undecided cube.
  for (int k = 1; k <= 7; ++k) {
    for (const DyadicCube& q : g.generation(k)) {
      if (halfplane_density_ratio(g, {k, q.id}, {0, 0}, pole) > delta / 2.0) continue;
      bool covered = false;
      for (int kk = 1; kk <= k && !covered; ++kk) {
        const CubeRef a{kk, g.ancestor(k, q.id, kk)};
        covered = unsure.count(a) > 0 ||
                  std::any_of(st.ld.begin(), st.ld.end(), [&](const DensityCube& c) { return c.q == a; });
      }
      EXPECT_TRUE(covered) << k << "," << q.id;
    }
  }
}

TEST(DensityStopping, HighDensityCubesSitUnderThePole) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 7);
  const HarmonicDomain d{g.scene, {}};
  const Point pole{0.3, 0.01, 0.0};
  const double A = 4.0;
  DensityOptions o;
  o.walks = 20000;
  const DensityStoppingState st = density_stopping(g, {0, 0}, pole, A, 0.01, d, o);
  ASSERT_FALSE(st.hd.empty());
  const Dilate two_r = dilate(g, {0, 0}, 2.0);
  const double dens_r = clipped_measure(pole, -1.0, 2.0) / two_r.sigma();
  for (const DensityCube& c : st.hd) {
    const Box2& b = g.cube(c.q).bounds;
    const double ell = g.cube(c.q).ell;
    const double dens_q = clipped_measure(pole, b.x0 - ell, b.x1 + ell) / dilate(g, c.q, 2.0).sigma();
    EXPECT_GT(dens_q / dens_r, A / 1.5) << c.q.k << "," << c.q.id;
    EXPECT_LT(std::abs(0.5 * (b.x0 + b.x1) - pole.x), 4.0 * ell);
  }
}

TEST(DensityStopping, InfiniteHighThresholdDisablesHighDensity) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 6);
  const HarmonicDomain d{g.scene, {}};
  EXPECT_TRUE(density_stopping(g, {0, 0}, {0.3, 0.01, 0.0}, kInf, 0.01, d, {}).hd.empty());
  EXPECT_THROW(density_stopping(g, {0, 0}, {0.3, 0.01, 0.0}, 1.0, 0.01, d, {}), Error);
  EXPECT_THROW(density_stopping(g, {0, 0}, {0.3, 0.01, 0.0}, 4.0, 0.0, d, {}), Error);
}

TEST(DensityStopping, CantorRootLowDensityIsReproducible) {
  const auto w = make_world(make_cantor(4), 0, 7, cantor_params());
  const CubeRef R{w->grid.k_min, 0};
  // A pole hugging one corner component starves the far corners.
  const PolePlacement pp =
      place_poles(w->catalog, w->sub, {4, 0}, with_depth_override(calibrate(region_constant(w->catalog)), 1, 1));
  const HarmonicDomain d{w->grid.scene, {}};
  std::vector<DensityStoppingState> runs;
  for (std::uint64_t seed : {1u, 2u}) {
    DensityOptions o;
    o.seed = seed;
    runs.push_back(density_stopping(w->grid, R, pp.p, kInf, 0.1, d, o));
  }
  EXPECT_FALSE(runs[0].ld.empty());
  std::set<CubeRef> a, b;
  for (const auto& c : runs[0].ld) a.insert(c.q);
  for (const auto& c : runs[1].ld) b.insert(c.q);
  std::size_t diff = 0;
  for (const CubeRef& q : a) diff += b.count(q) ? 0 : 1;
  for (const CubeRef& q : b) diff += a.count(q) ? 0 : 1;
  EXPECT_LE(diff, runs[0].indeterminate.size() + runs[1].indeterminate.size());
}

// ---- LD iteration ----

TEST(LowDensityForest, EmptyLowDensityGivesEmptyFamilies) {
  const auto w = make_world(make_hyperplane(2), 0, 8, small_params());
  const CalibrationParams c = with_depth_override(calibrate(region_constant(w->catalog)), 1, 1);
  const HarmonicDomain d{w->grid.scene, {}};
  for (int m = 1; m <= 3; ++m) {
    const LDForest f = iterate_LD(w->catalog, w->sub, {0, 0}, c, 0.01, m, d, {});
    EXPECT_TRUE(f.F1.empty());
    EXPECT_TRUE(f.F2.empty());
  }
  EXPECT_THROW(iterate_LD(w->catalog, w->sub, {0, 0}, c, 0.2, 1, d, {}), Error);
}

TEST(LowDensityForest, GreedySeparationOnSyntheticFamilies) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 9);
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    // Nested stopping family: each level picks disjoint strict subcubes of the previous one.
    CounterRng rng(seed);
    std::vector<CubeRef> F1, level{{0, 0}};
    for (int j = 0; j < 4; ++j) {
      std::vector<CubeRef> next;
      for (const CubeRef& q : level) {
        const int dk = 1 + static_cast<int>(rng.next_u64() % 3);
        if (q.k + dk > g.k_max) continue;
        const int lo = q.id << dk, hi = (q.id + 1) << dk;
        for (int id = lo; id < hi; ++id)
          if (rng.uniform() < 0.3) next.push_back({q.k + dk, id});
      }
      F1.insert(F1.end(), next.begin(), next.end());
      level = next;
    }
    const int M2 = 1 + static_cast<int>(seed % 3);
    const std::vector<CubeRef> F2 = separate_family(g, F1, M2);
    double m1 = 0.0, m2 = 0.0;
    for (const CubeRef& q : F1) m1 += g.cube(q).sigma;
    for (const CubeRef& q : F2) m2 += g.cube(q).sigma;
    EXPECT_LE(m1, (M2 + 1) * m2 + 1e-12);
    for (const CubeRef& a : F2)
      for (const CubeRef& b : F2)
        if (a != b && inside(g, a, b)) EXPECT_GE(b.k - a.k, M2 + 1);
    // Every dropped cube sits within M2 generations of a kept one.
    for (const CubeRef& q : F1) {
      if (std::find(F2.begin(), F2.end(), q) != F2.end()) continue;
      EXPECT_TRUE(std::any_of(F2.begin(), F2.end(), [&](const CubeRef& s) {
        return inside(g, s, q) && q.k - s.k <= M2;
      }));
    }
  }
}

TEST(LowDensityForest, HalfPlaneForestInvariants) {
  const auto w = make_world(make_hyperplane(2), 0, 11, small_params());
  const CalibrationParams full = calibrate(region_constant(w->catalog));
  const CalibrationParams c = with_depth_override(full, full.M1, 1);
  const HarmonicDomain d{w->grid.scene, {}};
  std::vector<double> packing;
  for (int m = 1; m <= 3; ++m) {
    const LDForest f = iterate_LD(w->catalog, w->sub, {0, 0}, c, 0.1, m, d, {});
    ASSERT_FALSE(f.F1.empty()) << m;
    EXPECT_TRUE(f.e_disjoint);
    EXPECT_TRUE(f.separated);
    EXPECT_LE(f.mass_F1, (c.M2 + 1) * f.mass_F2 + 1e-12);
    for (const EQCheck& e : f.e_checks) EXPECT_TRUE(e.ok) << e.q.k << "," << e.q.id << " margin " << e.margin;
    for (const auto& [q, nodes] : f.E)
      for (int n : nodes) EXPECT_TRUE(w->grid.cube(q).owns(n));
    packing.push_back(verify_packing(w->grid, f.F1, {{0, 0}}).max);
  }
  // The LD packing stays bounded as m grows.
  for (double p : packing) EXPECT_LE(p, 1.0);
}

// ---- Oscillating solutions ----

TEST(OscillatingSolution, EmptySetIsRejected) {
  const HarmonicDomain d{make_hyperplane(2), {}};
  UQSetup s;
  s.x_Q = {0.5, 0.0, 0.0};
  s.p = {0.5, 0.5, 0.0};
  s.s = {0.5, 0.001, 0.0};
  s.in_Q = [](const Point& y) { return y.x >= 0.0 && y.x < 1.0; };
  s.in_E = [](const Point&) { return false; };
  try {
    construct_uQ(d, s, calibrate(2.0), 2000, 1);
    FAIL() << "expected a precondition error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST(OscillatingSolution, PlanarMeasureCaseMatchesPoissonKernel) {
  const HarmonicDomain d{make_hyperplane(2), {1e-5, 1e-3, 100000}};
  const CalibrationParams c = calibrate(2.0);
  auto unit = [](const Point& y) { return y.x >= 0.0 && y.x < 1.0; };
  UQSetup s;
  s.x_Q = {0.5, 0.0, 0.0};
  s.p = {0.5, 0.5, 0.0};
  s.in_Q = unit;
  s.in_E = unit;
  // s far from E: ω^s(E) is small, the measure case applies directly.
  s.s = {1.5, 0.001, 0.0};
  OscillatingSolution u = construct_uQ(d, s, c, 20000, 3);
  EXPECT_EQ(u.case_tag, 1);
  EXPECT_FALSE(u.dichotomy_unverified);
  const double exact = halfplane_interval_measure(s.p, 0, 1) - halfplane_interval_measure(s.s, 0, 1);
  EXPECT_NEAR(u.u_p.value - u.u_s.value, exact, 4.0 * u.separation_se);
  EXPECT_TRUE(u.meets_target);
  // s close to E: the potential case is selected, and the plane falls back with a flag.
  s.s = {0.5, 0.001, 0.0};
  u = construct_uQ(d, s, c, 20000, 3);
  EXPECT_EQ(u.case_tag, 1);
  EXPECT_TRUE(u.dichotomy_unverified);
  const double exact2 = halfplane_interval_measure(s.s, 0, 1) - halfplane_interval_measure(s.p, 0, 1);
  EXPECT_NEAR(u.separation, exact2, 4.0 * u.separation_se);
  EXPECT_GE(u.u_s.value, 0.0);
  EXPECT_LE(u.u_s.value, 1.0);
}

TEST(OscillatingSolution, SpacePotentialCase) {
  CalibrationParams c = calibrate(1.0);  // a = 1/4, γ = 1/16
  const double rho = c.gamma * c.eps;
  const HarmonicDomain d{make_hyperplane(3), {1e-3 * rho, 1e-3, 100000}};
  auto square = [](const Point& y) { return std::abs(y.x) < 0.5 && std::abs(y.y) < 0.5; };
  UQSetup s;
  s.x_Q = {0.0, 0.0, 0.0};
  s.ell = 1.0;
  s.p = {0.0, 0.0, 0.05};
  s.s = {0.0, 0.0, 0.5 * rho};
  s.in_Q = square;
  s.in_E = square;
  s.force_case2 = true;
  const OscillatingSolution u = construct_uQ(d, s, c, 20000, 5);
  EXPECT_EQ(u.case_tag, 2);
  // On the axis the normalized potential is (sqrt(ρ² + z²) - z) / ρ.
  auto axis = [&](double z) { return (std::sqrt(rho * rho + z * z) - z) / rho; };
  EXPECT_NEAR(u.g_s, axis(s.s.z), 1e-6);
  EXPECT_NEAR(u.g_p, axis(s.p.z), 1e-6);
  // g is harmonic and nearly all of its boundary mass lies in E.
  EXPECT_NEAR(u.u_s.value, u.g_s, 4.0 * u.u_s.std_error + 0.01);
  EXPECT_NEAR(u.u_p.value, u.g_p, 4.0 * u.u_p.std_error + 0.01);
  EXPECT_TRUE(u.meets_target);
  EXPECT_GE(u.separation + 3.0 * u.separation_se, c.c2);
}

// ---- Khintchine randomization ----

TEST(Khintchine, EmptyFamilyIsVacuous) {
  const auto w = make_world(make_hyperplane(2), 0, 5, small_params());
  const CalibrationParams c = with_depth_override(calibrate(region_constant(w->catalog)), 1, 1);
  LDForest f;
  f.root = {0, 0};
  KhintchineOptions o;
  o.B = 64;
  o.walks = 50;
  const KhintchineReport r = khintchine_experiment(w->catalog, w->sub, f, c, HarmonicDomain{w->grid.scene, {}}, o);
  EXPECT_EQ(r.family, 0u);
  EXPECT_EQ(r.pairs, 64L * 32);
  EXPECT_TRUE(r.all_pass());
  EXPECT_EQ(r.witnesses, 0);
  o.B = 32;
  EXPECT_THROW(khintchine_experiment(w->catalog, w->sub, f, c, HarmonicDomain{w->grid.scene, {}}, o), Error);
}

TEST(Khintchine, SingleCubeFamily) {
  const auto w = make_world(make_hyperplane(2), 0, 5, small_params());
  const DyadicGrid& g = w->grid;
  const CalibrationParams c = with_depth_override(calibrate(region_constant(w->catalog)), 1, 1);
  const CubeRef q{1, 0};
  LDForest f;
  f.root = {0, 0};
  f.F2 = {q};
  f.poles.emplace(q, place_poles(w->catalog, w->sub, q, c));
  for (int n = g.cube(q).node_begin; n < g.cube(q).node_end; ++n) f.E[q].push_back(n);
  KhintchineOptions o;
  o.B = 64;
  o.walks = 400;
  const KhintchineReport r = khintchine_experiment(w->catalog, w->sub, f, c, HarmonicDomain{g.scene, {}}, o);
  ASSERT_EQ(r.family, 1u);
  EXPECT_TRUE(r.all_pass());
  // u_b = ±u_Q, so membership in F(Q, b) does not depend on b.
  const bool member = r.separation[0] > r.threshold;
  EXPECT_DOUBLE_EQ(r.frequency[0], member ? 1.0 : 0.0);
  const CubeRef little = f.poles.at(q).little;
  const long leaves_in_little = 1L << (g.k_max - little.k);
  EXPECT_EQ(r.witnesses, member ? o.B * leaves_in_little : 0);
  EXPECT_LE(r.max_abs_ub, 1.0);
}

TEST(Khintchine, CantorPipelinePasses) {
  const auto w = make_world(make_cantor(4), 0, 7, cantor_params());
  const CalibrationParams c = with_depth_override(calibrate(region_constant(w->catalog)), 1, 1);
  const HarmonicDomain d{w->grid.scene, {}};
  const LDForest f = iterate_LD(w->catalog, w->sub, {w->grid.k_min, 0}, c, 0.1, 3, d, {});
  KhintchineOptions o;
  o.B = 64;
  o.walks = 200;
  const KhintchineReport r = khintchine_experiment(w->catalog, w->sub, f, c, d, o);
  EXPECT_EQ(r.passes, r.pairs);
  EXPECT_TRUE(r.bounded);
  EXPECT_EQ(r.witnesses_valid, r.witnesses);
  EXPECT_EQ(r.pass_rate_per_b.size(), 64u);
}

// ---- Bilateral corona ----

TEST(BilateralCorona, HyperplaneIsOneFlatRegime) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 8);
  const CoronaDecomposition cd = bilateral_corona(g);
  EXPECT_TRUE(cd.bad.empty());
  ASSERT_EQ(cd.regimes.size(), 1u);
  EXPECT_EQ(cd.regimes[0].cubes.size(), g.cube_count());
  EXPECT_TRUE(check_coherency(g, cd.regimes[0].cubes).coherent());
  EXPECT_DOUBLE_EQ(cd.packing.max, 1.0);
  for (const auto& gen : cd.fits)
    for (const CubeFit& f : gen) EXPECT_LT(f.error, 1e-12);
}

TEST(BilateralCorona, CantorIsAllBadAndPackingGrowsWithDepth) {
  const ScenePtr s = make_cantor(6);
  std::vector<double> packing;
  for (int k_max : {5, 10}) {
    const DyadicGrid g = build_grid(s, 0, k_max);
    const CoronaDecomposition cd = bilateral_corona(g);
    EXPECT_TRUE(cd.regimes.empty());
    EXPECT_EQ(cd.bad.size(), g.cube_count());
    double min_ratio = kInf;
    for (const auto& gen : cd.fits)
      for (std::size_t id = 0; id < gen.size(); ++id) min_ratio = std::min(min_ratio, gen[id].error);
    for (int k = g.k_min; k <= g.k_max; ++k)
      for (const DyadicCube& q : g.generation(k)) EXPECT_GE(cd.fits[k - g.k_min][q.id].error, q.ell);
    // Every generation is bad, so each root packs one unit per generation.
    EXPECT_NEAR(cd.packing.max, g.k_max - g.k_min + 1, 1e-9);
    packing.push_back(cd.packing.max);
  }
  EXPECT_GE(packing[1] / packing[0], 2.0 - 1e-9);
}

TEST(BilateralCorona, ShallowGraphFitsMatchLeastSquares) {
  const ScenePtr s = make_lipschitz_graph(0.05);
  std::vector<double> packing;
  for (int k_max : {6, 8}) {
    const DyadicGrid g = build_grid(s, 0, k_max);
    const CoronaDecomposition cd = bilateral_corona(g);
    EXPECT_TRUE(cd.bad.empty());
    packing.push_back(cd.packing.max);
    for (const Regime& r : cd.regimes) {
      EXPECT_TRUE(check_coherency(g, r.cubes).coherent());
      // Ordinary least squares over the same ball as an independent slope.
      const DyadicCube& top = g.cube(r.top);
      double sx = 0, sy = 0, sxx = 0, sxy = 0, sw = 0;
      for (const SampleNode& n : g.nodes) {
        if (dist(n.p, top.center) > 2.0 * top.ell) continue;
        sw += n.weight;
        sx += n.weight * n.p.x;
        sy += n.weight * n.p.y;
        sxx += n.weight * n.p.x * n.p.x;
        sxy += n.weight * n.p.x * n.p.y;
      }
      const double ols = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
      EXPECT_NEAR(r.dir.y / r.dir.x, ols, 2e-3);
      EXPECT_LE(std::abs(r.dir.y / r.dir.x), 0.05 + 2e-3);
    }
  }
  EXPECT_LE(packing[1], 1.5);
  EXPECT_NEAR(packing[1] / packing[0], 1.0, 0.25);
}

TEST(BilateralCorona, PartitionCoversEveryCubeOnce) {
  const DyadicGrid g = build_grid(make_lipschitz_graph(0.5), 0, 7);
  const CoronaDecomposition cd = bilateral_corona(g);
  std::set<CubeRef> seen;
  for (const Regime& r : cd.regimes) {
    EXPECT_TRUE(check_coherency(g, r.cubes).coherent());
    for (const CubeRef& q : r.cubes) EXPECT_TRUE(seen.insert(q).second);
  }
  for (const CubeRef& q : cd.bad) EXPECT_TRUE(seen.insert(q).second);
  EXPECT_EQ(seen.size(), g.cube_count());
  for (std::size_t s = 0; s < cd.regimes.size(); ++s)
    for (const CubeRef& q : cd.regimes[s].cubes) EXPECT_EQ(cd.partition.regime_of(g, q), static_cast<int>(s));
}

TEST(Coherency, DetectsEachViolation) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 4);
  EXPECT_TRUE(check_coherency(g, {{0, 0}, {1, 0}, {1, 1}}).coherent());
  EXPECT_FALSE(check_coherency(g, {{1, 0}, {1, 1}}).unique_top);
  EXPECT_FALSE(check_coherency(g, {{0, 0}, {2, 0}, {2, 1}, {2, 2}, {2, 3}}).interval_closed);
  const CoherencyReport partial = check_coherency(g, {{0, 0}, {1, 0}});
  EXPECT_TRUE(partial.unique_top && partial.interval_closed);
  EXPECT_FALSE(partial.all_or_no_children);
}

TEST(Packing, PartitionsAndAllGenerations) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 6);
  for (int k = 0; k <= 6; ++k) {
    std::vector<CubeRef> gen;
    for (int id = 0; id < static_cast<int>(g.generation(k).size()); ++id) gen.push_back({k, id});
    EXPECT_DOUBLE_EQ(verify_packing(g, gen, {{0, 0}}).max, 1.0);
  }
  for (int d = 1; d <= 7; ++d) {
    std::vector<CubeRef> fam;
    for (int k = 0; k < d; ++k)
      for (int id = 0; id < static_cast<int>(g.generation(k).size()); ++id) fam.push_back({k, id});
    EXPECT_NEAR(verify_packing(g, fam, {{0, 0}}).max, d, 1e-12);
  }
}

// ---- Augmented regions and sawtooths ----

TEST(Augmentation, HyperplaneRegionsStackAbove) {
  const auto w = make_world(make_hyperplane(2), 0, 6, small_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  for (const CubeRef& q : all_cubes(w->grid)) {
    const AugmentedRegion a = augment_and_split(w->catalog, cd, q);
    EXPECT_TRUE(a.split);
    EXPECT_TRUE(a.ok) << a.diagnostic;
    EXPECT_TRUE(a.minus.empty());
    EXPECT_TRUE(a.connectors.empty());
    EXPECT_EQ(a.plus, w->catalog.region(q).cells);
  }
}

TEST(Augmentation, BadCubeKeepsItsRegion) {
  const auto w = make_world(make_cantor(3), 0, 5, cantor_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  const CubeRef q{w->grid.k_min, 0};
  ASSERT_FALSE(cd.good(q));
  const AugmentedRegion a = augment_and_split(w->catalog, cd, q);
  EXPECT_FALSE(a.split);
  EXPECT_EQ(a.cells, w->catalog.region(q).cells);
  EXPECT_TRUE(a.plus.empty() && a.minus.empty());
}

TEST(Augmentation, GraphConnectorsAreShort) {
  const auto w = make_world(make_lipschitz_graph(0.05), 0, 6, small_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  std::size_t longest = 0;
  for (const CubeRef& q : all_cubes(w->grid)) {
    const AugmentedRegion a = augment_and_split(w->catalog, cd, q);
    EXPECT_TRUE(a.ok) << a.diagnostic;
    EXPECT_FALSE(a.plus.empty());
    longest = std::max(longest, a.connectors.size());
  }
  EXPECT_LE(longest, 8u);
}

TEST(Sawtooth, SingleCubeIsItsRegion) {
  const auto w = make_world(make_hyperplane(2), 0, 5, small_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  const SawtoothDomain sd = build_sawtooth(w->catalog, cd, {{2, 1}}, 1, 100);
  EXPECT_EQ(sd.cells, augment_and_split(w->catalog, cd, {2, 1}).plus);
  EXPECT_TRUE(sd.harnack.empty());
  EXPECT_TRUE(sd.diagnostics.empty());
  EXPECT_GT(sd.min_clearance, 0.0);
}

TEST(Sawtooth, HyperplaneHarnackChainsAreShort) {
  const auto w = make_world(make_hyperplane(2), 0, 6, small_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  const SawtoothDomain sd = build_sawtooth(w->catalog, cd, cd.regimes[0].cubes, 1, 1000);
  EXPECT_TRUE(sd.diagnostics.empty());
  // One chain per parent/child pair.
  EXPECT_EQ(sd.harnack.size(), w->grid.cube_count() - w->grid.generation(0).size());
  EXPECT_LE(sd.max_harnack, 3);
  EXPECT_GE(sd.dist_ratio_min, 1.0 - 1e-12);
}

TEST(Sawtooth, GraphDistanceComparability) {
  const auto w = make_world(make_lipschitz_graph(0.05), 0, 6, small_params());
  const CoronaDecomposition cd = bilateral_corona(w->grid);
  for (const Regime& r : cd.regimes) {
    const SawtoothDomain sd = build_sawtooth(w->catalog, cd, r.cubes, 1, 1000, 9);
    EXPECT_EQ(sd.samples, 1000u);
    // The boundary of the sawtooth separates its points from E.
    EXPECT_GE(sd.dist_ratio_min, 1.0 - 1e-12);
    EXPECT_LT(sd.dist_ratio_max, kInf);
    EXPECT_GT(sd.min_clearance, 0.0);
    EXPECT_LE(sd.max_harnack, 3);
  }
}

// ---- Harmonic-measure corona ----

TEST(CoronaHM, HalfPlaneRatiosAreUniform) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 6);
  const CoronaDecomposition cd = bilateral_corona(g);
  const Point pole{0.5, 0.5, 0.0};
  const CoronaHMReport r = verify_corona_hm(g, cd.regimes, {pole}, HarmonicDomain{g.scene, {}}, 100000, 4);
  ASSERT_EQ(r.entries.size(), 1u);
  const CoronaHMEntry& e = r.entries[0];
  EXPECT_TRUE(e.pole_ok);
  EXPECT_DOUBLE_EQ(r.packing.max, 1.0);
  // Closed-form extremes of ω(3R ∩ [0,1]) / σ(R), with 3R reaching 2ℓ past R.
  double lo = kInf, hi = 0.0;
  for (const CubeRef& q : cd.regimes[0].cubes) {
    const Box2& b = g.cube(q).bounds;
    const double ell = g.cube(q).ell;
    const double v = clipped_measure(pole, b.x0 - 2.0 * ell, b.x1 + 2.0 * ell) / ell;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_NEAR(e.min_ratio, lo, 4.0 * e.max_std_error);
  EXPECT_NEAR(e.max_ratio, hi, 4.0 * e.max_std_error);
  EXPECT_LE(e.max_ratio / e.min_ratio, 1.1 * hi / lo);
}

TEST(CoronaHM, OneCubeRegimeAndBrokenPole) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 4);
  const Regime one{{2, 1}, {{2, 1}}, {0, 0, 0}, {1, 0, 0}};
  const HarmonicDomain d{g.scene, {}};
  const Point centre = g.cube(2, 1).center;
  CoronaHMReport r = verify_corona_hm(g, {one}, {centre + Point{0.0, 0.25, 0.0}}, d, 2000, 1);
  EXPECT_EQ(r.entries[0].members, 1u);
  EXPECT_DOUBLE_EQ(r.entries[0].min_ratio, r.entries[0].max_ratio);
  EXPECT_TRUE(r.entries[0].pole_ok);
  r = verify_corona_hm(g, {one}, {centre + Point{0.0, 1000.0 * 0.25, 0.0}}, d, 200, 1);
  EXPECT_FALSE(r.entries[0].pole_ok);
  EXPECT_NEAR(r.entries[0].pole_distance, 1000.0, 1e-9);
}
