#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <string>

#include "fatou/corona.hpp"
#include "fatou/parallel.hpp"
#include "fatou/rng.hpp"

namespace fatou {

namespace {

bool contains_cube(const DyadicGrid& g, CubeRef outer, CubeRef inner) {
  return inner.k >= outer.k && g.ancestor(inner.k, inner.id, outer.k) == outer.id;
}

std::string cube_name(CubeRef q) { return "(" + std::to_string(q.k) + "," + std::to_string(q.id) + ")"; }

/// Exit counts per node with prefix sums, so any node range is O(1).
struct NodeHistogram {
  std::vector<long> prefix;  // prefix[i] = hits on nodes < i
  long n = 0;

  NodeHistogram(const NodeBatch& b, std::size_t n_nodes) : prefix(n_nodes + 1, 0) {
    n = static_cast<long>(b.node.size());
    for (int v : b.node)
      if (v >= 0) ++prefix[v + 1];
    for (std::size_t i = 1; i < prefix.size(); ++i) prefix[i] += prefix[i - 1];
  }
  long range(int begin, int end) const { return prefix[end] - prefix[begin]; }
  long set(const std::vector<int>& nodes) const {
    long h = 0;
    for (int v : nodes) h += prefix[v + 1] - prefix[v];
    return h;
  }
};

/// Mean and standard error of a per-walk value taking `vals[i]` on `hits[i]`
/// walks and 0 elsewhere.
std::pair<double, double> two_level_mean(long n, std::initializer_list<std::pair<double, double>> parts) {
  if (n <= 1) return {0.0, 0.0};
  double s = 0.0, s2 = 0.0;
  for (const auto& [h, v] : parts) {
    s += h * v;
    s2 += h * v * v;
  }
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1));
  return {mean, std::sqrt(var / n)};
}

}  // namespace

double region_constant(const Catalog& catalog) {
  const DyadicGrid& g = *catalog.grid;
  double C = 1.0;
  for (int k = g.k_min; k <= g.k_max; ++k) {
    for (const DyadicCube& q : g.generation(k)) {
      const WhitneyRegion& r = catalog.region({k, q.id});
      require(r.cells.size() == r.n_cells, ErrorCode::kPrecondition, "catalog was built without member cells");
      for (int c : r.cells) {
        const Box2 b = catalog.whitney->cell(c).dilated(r.tau);
        const double lo = g.distance_to(q, b);
        double hi = 0.0;
        for (Point corner : {Point{b.x0, b.y0}, Point{b.x1, b.y0}, Point{b.x0, b.y1}, Point{b.x1, b.y1}})
          hi = std::max(hi, point_box_max_distance(corner, q.bounds));
        C = std::max(C, hi / q.ell);
        if (lo > 0.0) C = std::max(C, q.ell / lo);
      }
    }
  }
  return C;
}

CalibrationParams calibrate(double C_eta_K, double eps, double alpha) {
  require(C_eta_K >= 1.0, ErrorCode::kInvalidArgument, "C_{eta,K} must be at least 1");
  require(eps > 0.0 && eps < 0.5, ErrorCode::kInvalidArgument, "eps must lie in (0, 1/2)");
  require(alpha > 0.0 && alpha <= 1.0, ErrorCode::kInvalidArgument, "alpha must lie in (0, 1]");
  CalibrationParams c;
  c.C_eta_K = C_eta_K;
  c.a = 0.25 / (C_eta_K * C_eta_K);
  c.gamma = c.a / 4.0;
  c.eps = eps;
  c.alpha = alpha;
  c.M1 = static_cast<int>(std::floor(std::log2(C_eta_K / eps))) + 1;
  c.M2 = static_cast<int>(std::floor(std::log2(C_eta_K / c.gamma))) + 1;
  c.c2 = 0.5 * std::pow(eps, alpha);
  c.c3 = 1.0 / std::sqrt(2.0);
  c.c4 = c.c2 * c.c3;
  c.eps0 = c.c4 / 16.0;
  return c;
}

CalibrationParams with_depth_override(CalibrationParams c, int M1, int M2) {
  require(M1 >= 1 && M2 >= 1, ErrorCode::kInvalidArgument, "M1 and M2 must be positive");
  c.M1 = M1;
  c.M2 = M2;
  c.brackets_hold = false;
  return c;
}

PolePlacement place_poles(const Catalog& catalog, const Subcatalog& sub, CubeRef q, const CalibrationParams& calib) {
  const DyadicGrid& g = *catalog.grid;
  require(q.k >= g.k_min && q.k <= g.k_max && q.id >= 0 && q.id < static_cast<int>(g.generation(q.k).size()),
          ErrorCode::kOutOfRange, "cube outside the grid");
  PolePlacement pp;
  pp.q = q;
  const DyadicCube& cq = g.cube(q);
  pp.x_Q = cq.center;
  const int kb = q.k + calib.M1, kl = kb + calib.M2;
  if (kl > g.k_max) {
    throw Error(ErrorCode::kInsufficientDepth, "cube " + cube_name(q) + " needs generation " + std::to_string(kl) +
                                                   " but the grid stops at " + std::to_string(g.k_max));
  }
  int node = g.node_of(pp.x_Q);
  if (!cq.owns(node)) node = cq.node_begin;
  pp.big = {kb, g.cube_of(kb, node)};
  pp.little = {kl, g.cube_of(kl, node)};
  const auto pb = sample_points(catalog, sub, pp.big);
  const auto pl = sample_points(catalog, sub, pp.little);
  require(!pb.empty() && !pl.empty(), ErrorCode::kEmptyRegion, "pole cube " + cube_name(q) + " has an empty region");
  pp.p = pb[0];
  pp.s = pl[0];
  pp.p_dist = dist(pp.p, pp.x_Q);
  pp.s_dist = dist(pp.s, pp.x_Q);
  const double el = calib.eps * cq.ell;
  pp.p_bracket = calib.a * el <= pp.p_dist && pp.p_dist <= el;
  pp.s_bracket = pp.s_dist <= calib.gamma * el;
  if (calib.brackets_hold && !(pp.p_bracket && pp.s_bracket)) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "pole brackets fail at %s: |p - x_Q| = %.6g not in [%.6g, %.6g] or |s - x_Q| = %.6g > %.6g",
                  cube_name(q).c_str(), pp.p_dist, calib.a * el, el, pp.s_dist, calib.gamma * el);
    throw Error(ErrorCode::kBracketViolation, buf);
  }
  return pp;
}

DensityStoppingState density_stopping(const DyadicGrid& grid, CubeRef R, const Point& pole, double A, double delta,
                                      const HarmonicDomain& domain, const DensityOptions& opts) {
  require(A > 1.0, ErrorCode::kInvalidArgument, "high-density threshold must exceed 1");
  require(delta > 0.0 && delta < 1.0, ErrorCode::kInvalidArgument, "low-density threshold must lie in (0, 1)");
  require(opts.walks >= 2, ErrorCode::kInvalidArgument, "density stopping needs at least two walks");
  DensityStoppingState st;
  st.root = R;
  st.pole = pole;
  st.A = A;
  st.delta = delta;

  const HarmonicDomain d = domain.with_shell(opts.shell_factor * std::ldexp(1.0, -grid.k_max));
  std::vector<NodeHistogram> hist;
  auto level = [&](int j) -> const NodeHistogram& {
    while (static_cast<int>(hist.size()) <= j) {
      const int jj = static_cast<int>(hist.size());
      const long n = opts.walks << jj;
      const NodeBatch b = sample_exit_nodes(d, grid, pole, n, opts.seed,
                                            hash_key(static_cast<std::uint64_t>(R.k), static_cast<std::uint64_t>(R.id),
                                                     static_cast<std::uint64_t>(jj)));
      hist.emplace_back(b, grid.nodes.size());
      st.budget_history.push_back(n);
    }
    return hist[j];
  };

  const DyadicCube& cr = grid.cube(R);
  const bool with_hd = std::isfinite(A);
  std::vector<int> twoR;
  double sigma2R = 0.0;
  if (with_hd) {
    const Dilate dr = dilate(grid, R, 2.0);
    twoR = dr.nodes();
    sigma2R = dr.sigma();
  }

  enum class Verdict { kNo, kYes, kUnsure };
  // Decides one comparison, escalating the walk budget while undecided.
  auto decide = [&](auto&& stats, DensityCube& out) {
    for (int j = 0; j <= opts.max_doublings; ++j) {
      const NodeHistogram& h = level(j);
      const auto [mean, se, ratio, ratio_se] = stats(h);
      out.ratio = ratio;
      out.std_error = ratio_se;
      out.walks = h.n;
      if (mean - opts.z * se > 0.0) return Verdict::kYes;
      if (mean + opts.z * se < 0.0) return Verdict::kNo;
    }
    return Verdict::kUnsure;
  };

  struct Stats {
    double mean, se, ratio, ratio_se;
  };
  std::vector<CubeRef> stack;
  for (int c = cr.child_end - 1; c >= cr.child_begin; --c) stack.push_back({R.k + 1, c});
  while (!stack.empty()) {
    const CubeRef q = stack.back();
    stack.pop_back();
    const DyadicCube& cq = grid.cube(q);
    bool unsure = false;
    if (with_hd) {
      const Dilate dq = dilate(grid, q, 2.0);
      std::vector<int> inter;
      std::set_intersection(dq.nodes().begin(), dq.nodes().end(), twoR.begin(), twoR.end(), std::back_inserter(inter));
      DensityCube dc{q};
      // HD: ω(2Q)/σ(2Q) - A ω(2R)/σ(2R) >= 0.
      const Verdict v = decide(
          [&](const NodeHistogram& h) {
            const long in_q = h.set(dq.nodes()), in_r = h.set(twoR);
            // 2Q need not lie inside 2R: walks in both, in 2Q only, in 2R only.
            const long both = h.set(inter);
            const double wq = 1.0 / dq.sigma(), wr = A / sigma2R;
            const auto [m, se] =
                two_level_mean(h.n, {{double(both), wq - wr}, {double(in_q - both), wq}, {double(in_r - both), -wr}});
            const double dr = static_cast<double>(in_r) / h.n / sigma2R;
            const double dens_q = static_cast<double>(in_q) / h.n / dq.sigma();
            return Stats{m, se, dr > 0.0 ? dens_q / dr : kInf, dr > 0.0 ? se / dr : kInf};
          },
          dc);
      if (v == Verdict::kYes) {
        st.hd.push_back(dc);
        continue;
      }
      unsure = unsure || v == Verdict::kUnsure;
    }
    DensityCube dc{q};
    // LD: δ ω(R)/σ(R) - ω(Q)/σ(Q) >= 0.
    const Verdict v = decide(
        [&](const NodeHistogram& h) {
          const long in_q = h.range(cq.node_begin, cq.node_end), in_r = h.range(cr.node_begin, cr.node_end);
          const double wq = 1.0 / cq.sigma, wr = delta / cr.sigma;
          const auto [m, raw_se] = two_level_mean(h.n, {{double(in_q), wr - wq}, {double(in_r - in_q), wr}});
          // Floor the Q count at its expectation under ratio delta, so that an
          // empty cube is only significant once enough hits were expected.
          const double floor_q = std::max<double>(in_q, delta * in_r * cq.sigma / cr.sigma);
          const double se = std::max(
              raw_se, two_level_mean(h.n, {{floor_q, wr - wq}, {std::max(0.0, in_r - floor_q), wr}}).second);
          const double dr = static_cast<double>(in_r) / h.n / cr.sigma;
          const double dens_q = static_cast<double>(in_q) / h.n / cq.sigma;
          return Stats{m, se, dr > 0.0 ? dens_q / dr : kInf, dr > 0.0 ? se / dr : kInf};
        },
        dc);
    if (v == Verdict::kYes) {
      st.ld.push_back(dc);
      continue;
    }
    unsure = unsure || v == Verdict::kUnsure;
    if (unsure) st.indeterminate.push_back(dc);
    if (q.k < grid.k_max)
      for (int c = cq.child_end - 1; c >= cq.child_begin; --c) stack.push_back({q.k + 1, c});
  }
  auto order = [](const DensityCube& a, const DensityCube& b) { return a.q < b.q; };
  std::sort(st.hd.begin(), st.hd.end(), order);
  std::sort(st.ld.begin(), st.ld.end(), order);
  std::sort(st.indeterminate.begin(), st.indeterminate.end(), order);
  return st;
}

std::vector<CubeRef> separate_family(const DyadicGrid& grid, std::vector<CubeRef> F1, int M2) {
  std::sort(F1.begin(), F1.end());
  F1.erase(std::unique(F1.begin(), F1.end()), F1.end());
  std::vector<CubeRef> kept;
  for (const CubeRef& q : F1) {
    const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](const CubeRef& s) {
      return q.k - s.k <= M2 && contains_cube(grid, s, q);
    });
    if (!shadowed) kept.push_back(q);
  }
  return kept;
}

LDForest iterate_LD(const Catalog& catalog, const Subcatalog& sub, CubeRef R, const CalibrationParams& calib,
                    double delta, int m, const HarmonicDomain& domain, const DensityOptions& opts) {
  require(m >= 1, ErrorCode::kInvalidArgument, "LD iteration needs m >= 1");
  require(delta > 0.0 && delta <= calib.eps, ErrorCode::kInvalidArgument, "low-density threshold must lie in (0, eps]");
  const DyadicGrid& g = *catalog.grid;
  LDForest f;
  f.root = R;
  f.m = m;
  f.delta = delta;
  f.poles.emplace(R, place_poles(catalog, sub, R, calib));
  f.levels.push_back({R});

  auto stop_below = [&](CubeRef q) {
    auto it = f.poles.find(q);
    if (it == f.poles.end()) {
      try {
        it = f.poles.emplace(q, place_poles(catalog, sub, q, calib)).first;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientDepth) throw;
        f.no_pole.push_back(q);
        f.ld_of[q] = {};
        return;
      }
    }
    DensityOptions o = opts;
    o.seed = hash_key(opts.seed, static_cast<std::uint64_t>(q.k), static_cast<std::uint64_t>(q.id));
    const DensityStoppingState st = density_stopping(g, q, it->second.p, kInf, delta, domain, o);
    f.indeterminate += static_cast<long>(st.indeterminate.size());
    for (const DensityCube& c : st.indeterminate) f.undecided.push_back({q, c});
    auto& out = f.ld_of[q];
    for (const DensityCube& c : st.ld) out.push_back(c.q);
  };

  for (int j = 1; j <= m + 1; ++j) {
    std::vector<CubeRef> next;
    for (const CubeRef& q : f.levels.back()) {
      stop_below(q);
      const auto& ld = f.ld_of[q];
      next.insert(next.end(), ld.begin(), ld.end());
    }
    if (j > m) break;
    std::sort(next.begin(), next.end());
    f.levels.push_back(std::move(next));
  }

  for (int j = 1; j <= m; ++j) f.F1.insert(f.F1.end(), f.levels[j].begin(), f.levels[j].end());
  std::sort(f.F1.begin(), f.F1.end());
  f.F2 = separate_family(g, f.F1, calib.M2);

  for (const CubeRef& q : f.F1) {
    const DyadicCube& cq = g.cube(q);
    std::vector<char> removed(cq.node_count(), 0);
    for (const CubeRef& c : f.ld_of[q]) {
      const DyadicCube& cc = g.cube(c);
      for (int n = cc.node_begin; n < cc.node_end; ++n) removed[n - cq.node_begin] = 1;
    }
    auto& e = f.E[q];
    for (int n = cq.node_begin; n < cq.node_end; ++n)
      if (!removed[n - cq.node_begin]) e.push_back(n);
    f.mass_F1 += cq.sigma;
  }

  std::vector<char> owner(g.nodes.size(), 0);
  for (std::size_t i = 0; i < f.F2.size(); ++i) {
    const CubeRef q = f.F2[i];
    f.mass_F2 += g.cube(q).sigma;
    for (int n : f.E[q]) {
      if (owner[n]) f.e_disjoint = false;
      owner[n] = 1;
    }
    for (std::size_t j = 0; j < i; ++j) {
      const CubeRef s = f.F2[j];
      if (s.k < q.k && contains_cube(g, s, q) && q.k - s.k < calib.M2 + 1) f.separated = false;
    }
  }

  const HarmonicDomain d = domain.with_shell(opts.shell_factor * std::ldexp(1.0, -g.k_max));
  for (const CubeRef& q : f.F2) {
    const auto pit = f.poles.find(q);
    if (pit == f.poles.end()) continue;
    const DyadicCube& cq = g.cube(q);
    const NodeBatch b = sample_exit_nodes(d, g, pit->second.p, opts.walks, opts.seed,
                                          hash_key(static_cast<std::uint64_t>(q.k), static_cast<std::uint64_t>(q.id), 0xE5));
    const NodeHistogram h(b, g.nodes.size());
    EQCheck c;
    c.q = q;
    c.omega_E = b.set(f.E[q]);
    c.omega_Q = b.range(cq.node_begin, cq.node_end);
    const long in_e = h.set(f.E[q]), in_q = h.range(cq.node_begin, cq.node_end);
    const auto [mean, se] = two_level_mean(h.n, {{double(in_e), delta}, {double(in_q - in_e), -(1.0 - delta)}});
    c.margin = mean;
    c.margin_se = se;
    c.ok = mean >= -3.0 * se;
    f.e_checks.push_back(c);
  }
  return f;
}

OscillatingSolution construct_uQ(const HarmonicDomain& domain, const UQSetup& setup, const CalibrationParams& calib,
                                 long walks, std::uint64_t seed) {
  require(static_cast<bool>(setup.in_E) && static_cast<bool>(setup.in_Q), ErrorCode::kInvalidArgument,
          "E_Q and Q predicates are required");
  OscillatingSolution sol;
  sol.target = calib.c2;
  const ExitBatch bp = sample_exits(domain, setup.p, walks, seed, 1);
  const ExitBatch bs = sample_exits(domain, setup.s, walks, seed, 2);
  sol.omega_p_Q = bp.measure(setup.in_Q);
  sol.omega_p_E = bp.measure(setup.in_E);
  sol.omega_s_E = bs.measure(setup.in_E);
  const double e = calib.eps;
  const MeasureEstimate margin = bp.mean([&](const Point& y) {
    return (setup.in_E(y) ? 1.0 : 0.0) - (1.0 - e) * (setup.in_Q(y) ? 1.0 : 0.0);
  });
  if (margin.value < -3.0 * margin.std_error) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "omega(E_Q) = %.6g falls short of (1 - eps) omega(Q) = %.6g", sol.omega_p_E.value,
                  (1.0 - e) * sol.omega_p_Q.value);
    throw Error(ErrorCode::kPrecondition, buf);
  }

  const Scene& sc = *domain.scene;
  const bool potential_wanted =
      setup.force_case2 || sol.omega_s_E.value > (1.0 - std::pow(e, calib.alpha)) * sol.omega_p_E.value;
  const bool potential_ok = sc.ambient_dim() >= 3 && sc.kind() == SceneKind::kHyperplane;
  if (potential_wanted && potential_ok) {
    sol.case_tag = 2;
    const double rho = calib.gamma * e * setup.ell;
    const double sup = single_layer_potential(sc, setup.x_Q, setup.x_Q, rho);
    auto g = [&](const Point& y) { return single_layer_potential(sc, y, setup.x_Q, rho) / sup; };
    sol.g_p = g(setup.p);
    sol.g_s = g(setup.s);
    auto f = [&](const Point& y) { return setup.in_E(y) ? g(y) : 0.0; };
    sol.u_p = bp.mean(f);
    sol.u_s = bs.mean(f);
  } else {
    sol.case_tag = 1;
    sol.dichotomy_unverified = potential_wanted;
    sol.u_p = sol.omega_p_E;
    sol.u_s = sol.omega_s_E;
  }
  sol.separation = std::abs(sol.u_p.value - sol.u_s.value);
  sol.separation_se = std::hypot(sol.u_p.std_error, sol.u_s.std_error);
  sol.meets_target = sol.separation >= sol.target;
  return sol;
}

KhintchineReport khintchine_experiment(const Catalog& catalog, const Subcatalog& sub, const LDForest& forest,
                                       const CalibrationParams& calib, const HarmonicDomain& domain,
                                       const KhintchineOptions& opts) {
  require(opts.B >= 64, ErrorCode::kInvalidArgument, "the experiment needs at least 64 sign vectors");
  const DyadicGrid& g = *catalog.grid;
  KhintchineReport rep;
  rep.B = opts.B;
  rep.c4 = calib.c4;
  rep.threshold = calib.c4 / 4.0;
  rep.eps0 = calib.eps0;
  rep.predicted_frequency = calib.c4 / 8.0;

  // Family members with poles; E_Q are disjoint so each node has at most one owner.
  std::vector<CubeRef> fam;
  for (const CubeRef& q : forest.F2)
    if (forest.poles.count(q)) fam.push_back(q);
  rep.family = fam.size();
  std::vector<int> owner(g.nodes.size(), -1);
  for (std::size_t i = 0; i < fam.size(); ++i)
    for (int n : forest.E.at(fam[i])) owner[n] = static_cast<int>(i);

  const CubeRef R = forest.root;
  const int kr = R.k;
  std::vector<std::pair<int, int>> span(g.k_max - kr + 1);  // id range per generation below R
  span[0] = {R.id, R.id + 1};
  for (int k = kr + 1; k <= g.k_max; ++k) {
    const auto [lo, hi] = span[k - 1 - kr];
    span[k - kr] = {g.cube(k - 1, lo).child_begin, g.cube(k - 1, hi - 1).child_end};
  }

  // Sparse hit counts per family member at every sample point of R's subtree.
  struct Site {
    CubeRef q;
    int slot;
    Point x;
    std::vector<std::pair<int, long>> hits;
    long n = 0;
  };
  std::vector<Site> sites;
  for (int k = kr; k <= g.k_max; ++k) {
    for (int id = span[k - kr].first; id < span[k - kr].second; ++id) {
      const auto pts = sample_points(catalog, sub, {k, id});
      for (std::size_t s = 0; s < pts.size(); ++s) sites.push_back({{k, id}, static_cast<int>(s), pts[s], {}, 0});
    }
  }
  std::map<std::pair<CubeRef, int>, std::size_t> site_of;
  for (std::size_t i = 0; i < sites.size(); ++i) site_of[{sites[i].q, sites[i].slot}] = i;
  parallel_for(sites.size(), [&](std::size_t i) {
    Site& s = sites[i];
    const HarmonicDomain d = domain.with_shell(1e-3 * g.cube(s.q).ell);
    const NodeBatch b = sample_exit_nodes(d, g, s.x, opts.walks, opts.seed,
                                          hash_key(static_cast<std::uint64_t>(s.q.k), static_cast<std::uint64_t>(s.q.id),
                                                   static_cast<std::uint64_t>(s.slot)));
    s.n = static_cast<long>(b.node.size());
    std::map<int, long> h;
    for (int v : b.node)
      if (v >= 0 && owner[v] >= 0) ++h[owner[v]];
    s.hits.assign(h.begin(), h.end());
  });
  // p_Q and s_Q are slot 0 of Q(big) and Q(little), so the witness chain reads
  // the same values as the counting function.
  std::vector<std::size_t> p_site(fam.size()), s_site(fam.size());
  for (std::size_t i = 0; i < fam.size(); ++i) {
    const PolePlacement& pp = forest.poles.at(fam[i]);
    p_site[i] = site_of.at({pp.big, pp.p_slot});
    s_site[i] = site_of.at({pp.little, pp.s_slot});
  }

  auto eval = [&](const Site& s, const std::vector<int>& b, double& se) {
    if (s.n <= 1) {
      se = 0.0;
      return 0.0;
    }
    long sum = 0, hits = 0;
    for (const auto& [i, c] : s.hits) {
      sum += b[i] * c;
      hits += c;
    }
    const double mean = static_cast<double>(sum) / s.n;
    const double var = std::max(0.0, (hits - s.n * mean * mean) / (s.n - 1));
    se = std::sqrt(var / s.n);
    return mean;
  };

  // Separations |u_Q(p_Q) - u_Q(s_Q)| with u_Q = ω(E_Q).
  for (std::size_t i = 0; i < fam.size(); ++i) {
    auto count = [&](const Site& s) {
      for (const auto& [j, c] : s.hits)
        if (j == static_cast<int>(i)) return static_cast<double>(c) / std::max<long>(s.n, 1);
      return 0.0;
    };
    rep.separation.push_back(std::abs(count(sites[p_site[i]]) - count(sites[s_site[i]])));
  }

  const int leaf_k = g.k_max;
  const auto [leaf_lo, leaf_hi] = span[leaf_k - kr];
  std::vector<long> freq(fam.size(), 0);
  for (int bi = 0; bi < opts.B; ++bi) {
    std::vector<int> b(fam.size());
    CounterRng rng(hash_key(opts.seed, 0xB, static_cast<std::uint64_t>(bi)));
    for (int& v : b) v = (rng.next_u64() >> 63) ? 1 : -1;

    SampledSolution u;
    u.k_min = g.k_min;
    u.k_max = g.k_max;
    u.provenance = "khintchine b=" + std::to_string(bi);
    for (const auto& gen : g.generations) {
      u.values.emplace_back(gen.size());
      u.std_error.emplace_back(gen.size(), 0.0);
    }
    for (std::size_t i = 0; i < sites.size(); ++i) {
      double se = 0.0;
      const double v = eval(sites[i], b, se);
      u.values[sites[i].q.k - g.k_min][sites[i].q.id].push_back(v);
      double& s = u.std_error[sites[i].q.k - g.k_min][sites[i].q.id];
      s = std::max(s, se);
      rep.max_abs_ub = std::max(rep.max_abs_ub, std::abs(v));
      const double excess = std::abs(v) - 1.0 - 3.0 * se;
      rep.max_ub_excess = std::max(rep.max_ub_excess, excess);
      if (excess > 0.0) rep.bounded = false;
    }

    // F(Q, b): |u_b(p_Q) - u_b(s_Q)| > c4/4.
    std::vector<char> in_F(fam.size(), 0);
    std::vector<double> up(fam.size()), us(fam.size());
    for (std::size_t i = 0; i < fam.size(); ++i) {
      up[i] = u.at(sites[p_site[i]].q)[0];
      us[i] = u.at(sites[s_site[i]].q)[0];
      if (std::abs(up[i] - us[i]) > rep.threshold) {
        in_F[i] = 1;
        ++freq[i];
      }
    }

    const std::vector<int> N = leaf_counts(u, g, rep.eps0, R, leaf_k);
    long pass_b = 0;
    for (int leaf = leaf_lo; leaf < leaf_hi; ++leaf) {
      const int node = g.cube(leaf_k, leaf).node_begin;
      // Members whose Q(little) holds the leaf, in F(Q, b), coarsest first.
      std::vector<std::size_t> hit;
      for (std::size_t i = 0; i < fam.size(); ++i) {
        if (!in_F[i]) continue;
        const CubeRef lit = forest.poles.at(fam[i]).little;
        if (g.cube(lit).owns(node)) hit.push_back(i);
      }
      const int lhs = static_cast<int>(hit.size());
      const int n_count = N[leaf - leaf_lo];
      ++rep.pairs;
      if (lhs <= n_count) {
        ++rep.passes;
        ++pass_b;
      }
      if (lhs == 0) continue;
      std::sort(hit.begin(), hit.end(), [&](std::size_t a, std::size_t c) { return fam[a] < fam[c]; });
      // X_0 = p, X_1 = s of the coarsest member; then whichever pole of the next
      // member jumps by more than ε0 from the previous point.
      ++rep.witnesses;
      std::vector<std::pair<int, double>> chain;  // (generation of the pole cube, value)
      const PolePlacement& p0 = forest.poles.at(fam[hit[0]]);
      chain.push_back({p0.big.k, up[hit[0]]});
      chain.push_back({p0.little.k, us[hit[0]]});
      bool valid = true;
      for (std::size_t t = 1; t < hit.size() && valid; ++t) {
        const PolePlacement& pt = forest.poles.at(fam[hit[t]]);
        const double prev = chain.back().second;
        if (std::abs(up[hit[t]] - prev) > rep.eps0) {
          chain.push_back({pt.big.k, up[hit[t]]});
        } else if (std::abs(us[hit[t]] - prev) > rep.eps0) {
          chain.push_back({pt.little.k, us[hit[t]]});
        } else {
          valid = false;
        }
      }
      for (std::size_t t = 1; t < chain.size() && valid; ++t)
        valid = chain[t].first > chain[t - 1].first && std::abs(chain[t].second - chain[t - 1].second) > rep.eps0;
      valid = valid && static_cast<int>(chain.size()) - 1 >= lhs;
      if (valid) ++rep.witnesses_valid;
    }
    rep.pass_rate_per_b.push_back(leaf_hi > leaf_lo ? static_cast<double>(pass_b) / (leaf_hi - leaf_lo) : 1.0);
  }
  rep.min_frequency = 1.0;
  for (std::size_t i = 0; i < fam.size(); ++i) {
    rep.frequency.push_back(static_cast<double>(freq[i]) / opts.B);
    rep.min_frequency = std::min(rep.min_frequency, rep.frequency.back());
  }
  return rep;
}

}  // namespace fatou
