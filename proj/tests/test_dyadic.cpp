#include <gtest/gtest.h>

#include <cstdio>

#include "fatou/dyadic.hpp"

using namespace fatou;

TEST(Dyadic, HyperplaneGridIsStandardIntervals) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 6);
  EXPECT_EQ(g.k_min, 0);
  for (int k = 0; k <= 6; ++k) {
    const auto& gen = g.generation(k);
    ASSERT_EQ(gen.size(), std::size_t{1} << k);
    for (const DyadicCube& q : gen) {
      EXPECT_DOUBLE_EQ(q.s0, q.id * std::ldexp(1.0, -k));
      EXPECT_DOUBLE_EQ(q.s1, (q.id + 1) * std::ldexp(1.0, -k));
      EXPECT_DOUBLE_EQ(q.sigma, q.ell);
    }
  }
  const AxiomReport rep = verify_grid_axioms(g);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_DOUBLE_EQ(rep.a0, 0.5);
}

TEST(Dyadic, CorruptedParentIsWitnessed) {
  DyadicGrid g = build_grid(make_hyperplane(2), 0, 4);
  g.generations[3][5].parent = 0;
  const AxiomReport rep = verify_grid_axioms(g);
  EXPECT_FALSE(rep.nesting);
  ASSERT_FALSE(rep.witnesses.empty());
  EXPECT_NE(rep.witnesses.front().find("(3,5)"), std::string::npos);
  EXPECT_NE(rep.witnesses.front().find("(2,0)"), std::string::npos);
}

TEST(Dyadic, CantorGridAxioms) {
  const DyadicGrid g = build_grid(make_cantor(4), 0, 7);
  EXPECT_EQ(g.k_min, 1);
  const AxiomReport rep = verify_grid_axioms(g);
  EXPECT_TRUE(rep.all_pass());
  EXPECT_GE(rep.a0, 1.0 / 8.0);
  // Even generations are the self-similar pieces themselves.
  for (int k = 2; k <= 6; k += 2) {
    const auto pieces = make_cantor(4)->cantor()->pieces(k / 2 + 1);
    ASSERT_EQ(g.generation(k).size(), pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      EXPECT_EQ(g.generation(k)[i].bounds.x0, pieces[i].x0);
      EXPECT_DOUBLE_EQ(g.generation(k)[i].sigma, std::ldexp(1.0, -2 * (k / 2 + 1)));
    }
  }
}

TEST(Dyadic, CurveGridsPassAxioms) {
  for (const auto& e : {make_lipschitz_graph(0.5), make_koch_curve(30.0, 4), make_segment({0, 0, 0}, {1, 0.5, 0})}) {
    const DyadicGrid g = build_grid(e, 0, 7);
    const AxiomReport rep = verify_grid_axioms(g);
    EXPECT_TRUE(rep.all_pass()) << to_string(e->kind()) << " " << (rep.witnesses.empty() ? "" : rep.witnesses[0]);
    EXPECT_GT(rep.a0, 0.1);
    EXPECT_LE(rep.max_diam_ratio, 1.0);
  }
}

TEST(Dyadic, PartitionMassEveryGeneration) {
  const DyadicGrid g = build_grid(make_koch_curve(30.0, 4), 2, 9);
  for (const auto& gen : g.generations) {
    double s = 0.0;
    for (const DyadicCube& q : gen) s += q.sigma;
    EXPECT_NEAR(s, g.scene->curve()->length(), 1e-6 * s);
  }
}

TEST(Dyadic, ChildCenterInsideParentAndHalvedLength) {
  const DyadicGrid g = build_grid(make_lipschitz_graph(0.5), 0, 6);
  for (int k = 1; k <= 6; ++k) {
    for (const DyadicCube& q : g.generation(k)) {
      const DyadicCube& p = g.cube(k - 1, q.parent);
      EXPECT_EQ(q.ell, p.ell / 2);
      EXPECT_LE(g.distance_to(p, q.center), 1e-12);
    }
  }
}

TEST(Dyadic, Deterministic) {
  const DyadicGrid a = build_grid(make_koch_curve(), 1, 6, 7);
  const DyadicGrid b = build_grid(make_koch_curve(), 1, 6, 7);
  EXPECT_EQ(grid_records(a), grid_records(b));
}

TEST(Dyadic, DepthCap) {
  try {
    build_grid(make_hyperplane(2), 0, 13);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDepthCap);
  }
}

TEST(Dyadic, NodeLookupRoundTrip) {
  for (const auto& e : {make_koch_curve(30.0, 3), make_cantor(3)}) {
    const DyadicGrid g = build_grid(e, 0, 5);
    for (int n = 0; n < static_cast<int>(g.nodes.size()); ++n) ASSERT_EQ(g.node_of(g.nodes[n].p), n);
    EXPECT_EQ(g.node_of({0.5, 5.0, 0.0}), -1);
  }
  const DyadicGrid h = build_grid(make_hyperplane(2), 0, 4);
  EXPECT_EQ(h.node_of({1.5, 0.0, 0.0}), -1);
  EXPECT_EQ(h.node_of({0.0, 0.0, 0.0}), 0);
}

TEST(Dyadic, DilateHyperplaneInterval) {
  const DyadicGrid g = build_grid(make_hyperplane(2), 0, 4);
  const Dilate d = dilate(g, {0, 0}, 2.0);
  EXPECT_TRUE(d.contains({-0.99, 0, 0}));
  EXPECT_TRUE(d.contains({1.99, 0, 0}));
  EXPECT_FALSE(d.contains({-1.01, 0, 0}));
  EXPECT_FALSE(d.contains({2.01, 0, 0}));
  EXPECT_THROW(dilate(g, {0, 0}, 1.0), Error);
}

TEST(Dyadic, DilateNearOneIsClosure) {
  const DyadicGrid g = build_grid(make_koch_curve(30.0, 3), 2, 6);
  const DyadicCube& q = g.cube(4, 3);
  const Dilate d = dilate(g, {4, 3}, 1.0 + 1e-12);
  EXPECT_EQ(d.nodes().front(), q.node_begin);
  EXPECT_NEAR(d.sigma(), q.sigma, 1e-12);
}

TEST(Dyadic, DilateCantorAgainstBruteForce) {
  const DyadicGrid g = build_grid(make_cantor(4), 0, 7);
  for (int id : {0, 5, 9}) {
    const DyadicCube& q = g.cube(4, id);
    const Dilate d = dilate(g, {4, id}, 3.0);
    double brute = 0.0;
    for (const SampleNode& n : g.nodes) {
      double best = kInf;
      for (int m = q.node_begin; m < q.node_end; ++m) best = std::min(best, point_box_distance(n.p, g.nodes[m].box));
      if (best <= 2.0 * q.ell) brute += n.weight;
    }
    EXPECT_NEAR(d.sigma(), brute, 1e-12);
    EXPECT_GE(d.sigma() / q.sigma, 1.0);
  }
}

TEST(Dyadic, CsvRoundTrip) {
  const DyadicGrid g = build_grid(make_cantor(3), 0, 5);
  const std::string path = ::testing::TempDir() + "grid.csv";
  write_grid_csv(g, path);
  EXPECT_EQ(read_grid_csv(path), grid_records(g));
  std::remove(path.c_str());
}
