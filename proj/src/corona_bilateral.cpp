#include <algorithm>
#include <climits>
#include <cmath>
#include <deque>
#include <set>
#include <string>

#include "fatou/corona.hpp"
#include "fatou/parallel.hpp"
#include "fatou/rng.hpp"

namespace fatou {

namespace {

std::string cube_name(CubeRef q) { return "(" + std::to_string(q.k) + "," + std::to_string(q.id) + ")"; }

bool contains_cube(const DyadicGrid& g, CubeRef outer, CubeRef inner) {
  return inner.k >= outer.k && g.ancestor(inner.k, inner.id, outer.k) == outer.id;
}

/// Lines are undirected: fold the direction into the right half-plane.
Point canonical(Point d) {
  if (d.x < 0.0 || (d.x == 0.0 && d.y < 0.0)) d = -1.0 * d;
  return d;
}

double line_distance(const Point& x, const Point& origin, const Point& dir) { return std::abs(cross2(dir, x - origin)); }

int side_of(const Point& x, const Point& origin, const Point& dir) { return cross2(dir, x - origin) >= 0.0 ? 1 : -1; }

/// Cells of `from` reach `to` through adjacency inside `allowed`; returns the
/// number of steps, 0 when the sets share a cell, or -1.
int bfs_steps(const WhitneyDecomposition& w, const std::vector<int>& from, const std::vector<int>& to,
              const std::function<bool(int)>& allowed, std::vector<int>* path = nullptr) {
  std::vector<char> target(w.size(), 0);
  for (int c : to) target[c] = 1;
  std::vector<int> prev(w.size(), -2);
  std::deque<std::pair<int, int>> queue;
  for (int c : from) {
    if (target[c]) return 0;
    prev[c] = -1;
    queue.push_back({c, 0});
  }
  while (!queue.empty()) {
    const auto [c, d] = queue.front();
    queue.pop_front();
    for (int n : w.cell(c).neighbors) {
      if (prev[n] != -2) continue;
      if (target[n]) {
        if (path) {
          for (int t = c; t >= 0 && prev[t] != -1; t = prev[t]) path->push_back(t);
        }
        return d + 1;
      }
      if (!allowed(n)) continue;
      prev[n] = c;
      queue.push_back({n, d + 1});
    }
  }
  return -1;
}

/// Node ids sorted by abscissa, for ball queries.
struct NodeIndex {
  std::vector<int> order;
  std::vector<double> xs;

  explicit NodeIndex(const DyadicGrid& g) : order(g.nodes.size()) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return g.nodes[a].p.x < g.nodes[b].p.x; });
    for (int i : order) xs.push_back(g.nodes[i].p.x);
  }
  template <typename F>
  void ball(const DyadicGrid& g, const Point& x, double r, F&& f) const {
    auto it = std::lower_bound(xs.begin(), xs.end(), x.x - r);
    for (std::size_t i = it - xs.begin(); i < xs.size() && xs[i] <= x.x + r; ++i) {
      const SampleNode& n = g.nodes[order[i]];
      if (dist(n.p, x) <= r) f(n);
    }
  }
};

CubeFit fit_indexed(const DyadicGrid& grid, const NodeIndex& index, CubeRef q, const CoronaParams& p,
                    const Point* within);

}  // namespace

std::vector<CubeRef> all_cubes(const DyadicGrid& grid) {
  std::vector<CubeRef> out;
  for (int k = grid.k_min; k <= grid.k_max; ++k)
    for (int id = 0; id < static_cast<int>(grid.generation(k).size()); ++id) out.push_back({k, id});
  return out;
}

CubeFit fit_cube(const DyadicGrid& grid, CubeRef q, const CoronaParams& p, const Point* within) {
  return fit_indexed(grid, NodeIndex(grid), q, p, within);
}

namespace {

CubeFit fit_indexed(const DyadicGrid& grid, const NodeIndex& index, CubeRef q, const CoronaParams& p,
                    const Point* within) {
  const DyadicCube& cq = grid.cube(q);
  const Point x = cq.center;
  const double r = p.K * cq.ell;
  CubeFit fit;
  double w = 0.0;
  Point mean;
  std::vector<std::pair<Point, double>> pts;
  index.ball(grid, x, r, [&](const SampleNode& n) {
    pts.push_back({n.p, n.weight});
    w += n.weight;
    mean = mean + n.weight * n.p;
  });
  fit.nodes = pts.size();
  fit.origin = w > 0.0 ? (1.0 / w) * mean : x;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [pt, wt] : pts) {
    const Point d = pt - fit.origin;
    sxx += wt * d.x * d.x;
    sxy += wt * d.x * d.y;
    syy += wt * d.y * d.y;
  }
  // Principal axis of the weighted scatter.
  double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  if (within) {
    const double ref = std::atan2(within->y, within->x);
    double diff = std::remainder(theta - ref, kPi);
    const double lim = std::atan(p.eta);
    diff = std::clamp(diff, -lim, lim);
    theta = ref + diff;
  }
  fit.dir = canonical({std::cos(theta), std::sin(theta), 0.0});

  for (const auto& [pt, wt] : pts) fit.set_to_graph = std::max(fit.set_to_graph, line_distance(pt, fit.origin, fit.dir));
  // Chord of the line inside B(x, Kℓ).
  const double t0 = dot(x - fit.origin, fit.dir);
  const double h = line_distance(x, fit.origin, fit.dir);
  if (h < r) {
    const double half = std::sqrt(r * r - h * h);
    const Scene& sc = *grid.scene;
    const int m = std::max(2, p.line_samples);
    for (int i = 0; i < m; ++i) {
      const double t = t0 - half + 2.0 * half * i / (m - 1);
      fit.graph_to_set = std::max(fit.graph_to_set, sc.distance(fit.origin + t * fit.dir));
    }
  }
  fit.error = fit.set_to_graph + fit.graph_to_set;
  fit.good = fit.nodes >= 2 && fit.error < p.eta * cq.ell;
  return fit;
}

}  // namespace

PackingReport verify_packing(const DyadicGrid& grid, const std::vector<CubeRef>& family,
                             const std::vector<CubeRef>& roots) {
  std::vector<std::vector<double>> acc;
  for (const auto& gen : grid.generations) acc.emplace_back(gen.size(), 0.0);
  for (const CubeRef& q : family) {
    const double s = grid.cube(q).sigma;
    int id = q.id;
    for (int k = q.k; k >= grid.k_min; --k) {
      acc[k - grid.k_min][id] += s;
      if (k > grid.k_min) id = grid.cube(k, id).parent;
    }
  }
  PackingReport rep;
  rep.roots = roots;
  for (const CubeRef& r : roots) {
    const double c = acc[r.k - grid.k_min][r.id] / grid.cube(r).sigma;
    rep.constant.push_back(c);
    rep.max = std::max(rep.max, c);
  }
  return rep;
}

CoherencyReport check_coherency(const DyadicGrid& grid, const std::vector<CubeRef>& cubes) {
  CoherencyReport rep;
  if (cubes.empty()) return rep;
  const std::set<CubeRef> S(cubes.begin(), cubes.end());
  const CubeRef top = *std::min_element(cubes.begin(), cubes.end());
  for (const CubeRef& q : S) {
    if (q != top && (q.k == top.k || !contains_cube(grid, top, q))) rep.unique_top = false;
  }
  for (const CubeRef& q : S) {
    if (q.k <= top.k || !contains_cube(grid, top, q)) continue;
    int id = q.id;
    for (int k = q.k - 1; k > top.k; --k) {
      id = grid.cube(k + 1, id).parent;
      if (!S.count({k, id})) rep.interval_closed = false;
    }
  }
  for (const CubeRef& q : S) {
    if (q.k == grid.k_max) continue;
    const DyadicCube& c = grid.cube(q);
    int in = 0;
    for (int ch = c.child_begin; ch < c.child_end; ++ch) in += S.count({q.k + 1, ch}) ? 1 : 0;
    if (in != 0 && in != c.child_end - c.child_begin) rep.all_or_no_children = false;
  }
  return rep;
}

CoronaDecomposition bilateral_corona(const DyadicGrid& grid, const CoronaParams& p) {
  require(p.eta > 0.0 && p.K >= 1.0, ErrorCode::kInvalidArgument, "corona parameters need eta > 0 and K >= 1");
  CoronaDecomposition cd;
  cd.grid = &grid;
  cd.params = p;
  for (const auto& gen : grid.generations) {
    cd.fits.emplace_back(gen.size());
    cd.partition.regime.emplace_back(gen.size(), -1);
  }
  // Free fits for every cube, computed once.
  std::vector<CubeRef> cubes = all_cubes(grid);
  std::vector<CubeFit> free_fit(cubes.size());
  const NodeIndex index(grid);
  parallel_for(cubes.size(), [&](std::size_t i) { free_fit[i] = fit_indexed(grid, index, cubes[i], p, nullptr); });
  std::vector<std::size_t> offset;
  std::size_t off = 0;
  for (const auto& gen : grid.generations) {
    offset.push_back(off);
    off += gen.size();
  }
  auto free_of = [&](CubeRef q) -> const CubeFit& { return free_fit[offset[q.k - grid.k_min] + q.id]; };

  auto open_regime = [&](CubeRef q) {
    const CubeFit& f = free_of(q);
    cd.fits[q.k - grid.k_min][q.id] = f;
    if (!f.good) {
      cd.bad.push_back(q);
      return;
    }
    const int s = static_cast<int>(cd.regimes.size());
    cd.regimes.push_back({q, {q}, f.origin, f.dir});
    cd.partition.top.push_back(q);
    cd.partition.regime[q.k - grid.k_min][q.id] = s;
  };

  for (int id = 0; id < static_cast<int>(grid.generation(grid.k_min).size()); ++id) open_regime({grid.k_min, id});
  for (int k = grid.k_min; k < grid.k_max; ++k) {
    for (int id = 0; id < static_cast<int>(grid.generation(k).size()); ++id) {
      const DyadicCube& c = grid.cube(k, id);
      const int s = cd.partition.regime[k - grid.k_min][id];
      bool joined = false;
      if (s >= 0) {
        // All children must fit within the regime's direction, or none join.
        const Point dir = cd.regimes[s].dir;
        std::vector<CubeFit> kids;
        for (int ch = c.child_begin; ch < c.child_end; ++ch) kids.push_back(fit_indexed(grid, index, {k + 1, ch}, p, &dir));
        joined = std::all_of(kids.begin(), kids.end(), [](const CubeFit& f) { return f.good; });
        if (joined) {
          for (int ch = c.child_begin; ch < c.child_end; ++ch) {
            cd.fits[k + 1 - grid.k_min][ch] = kids[ch - c.child_begin];
            cd.partition.regime[k + 1 - grid.k_min][ch] = s;
            cd.regimes[s].cubes.push_back({k + 1, ch});
          }
        }
      }
      if (!joined)
        for (int ch = c.child_begin; ch < c.child_end; ++ch) open_regime({k + 1, ch});
    }
  }
  for (Regime& r : cd.regimes) std::sort(r.cubes.begin(), r.cubes.end());
  std::sort(cd.bad.begin(), cd.bad.end());
  std::vector<CubeRef> family = cd.bad;
  family.insert(family.end(), cd.partition.top.begin(), cd.partition.top.end());
  cd.packing = verify_packing(grid, family, cubes);
  return cd;
}

AugmentedRegion augment_and_split(const Catalog& catalog, const CoronaDecomposition& corona, CubeRef q) {
  const DyadicGrid& g = *catalog.grid;
  const WhitneyDecomposition& w = *catalog.whitney;
  const WhitneyRegion& reg = catalog.region(q);
  require(reg.cells.size() == reg.n_cells, ErrorCode::kPrecondition, "catalog was built without member cells");
  AugmentedRegion out;
  out.q = q;
  out.cells = reg.cells;
  const int s = corona.partition.regime_of(g, q);
  if (s < 0) return out;

  out.split = true;
  const Regime& S = corona.regimes[s];
  const DyadicCube& cq = g.cube(q);
  for (int c : reg.cells) (side_of(w.cell(c).box.center(), S.origin, S.dir) > 0 ? out.plus : out.minus).push_back(c);

  const double eta = catalog.params.eta, K = catalog.params.K;
  const double hi = std::sqrt(K) * cq.ell;
  if (q.k < g.k_max) {
    for (int ch = cq.child_begin; ch < cq.child_end; ++ch) {
      const CubeRef child{q.k + 1, ch};
      if (corona.partition.regime_of(g, child) != s) continue;
      const WhitneyRegion& creg = catalog.region(child);
      const double lo = 0.25 * std::sqrt(eta) * g.cube(child).ell;
      for (int sign : {1, -1}) {
        std::vector<int>& mine = sign > 0 ? out.plus : out.minus;
        std::vector<int> theirs;
        for (int c : creg.cells)
          if (side_of(w.cell(c).box.center(), S.origin, S.dir) == sign) theirs.push_back(c);
        if (mine.empty() || theirs.empty()) {
          if (mine.empty() != theirs.empty()) {
            out.diagnostic += "one-sided " + std::string(sign > 0 ? "+" : "-") + " overlap with child " +
                              cube_name(child) + "; ";
          }
          continue;
        }
        auto allowed = [&](int c) {
          const WhitneyCell& cell = w.cell(c);
          return cell.side >= lo && cell.side <= hi && side_of(cell.box.center(), S.origin, S.dir) == sign &&
                 g.distance_to(cq, cell.box) <= 2.0 * hi;
        };
        std::vector<int> path;
        const int steps = bfs_steps(w, mine, theirs, allowed, &path);
        if (steps < 0) {
          out.ok = false;
          out.diagnostic += "augmentation failed toward child " + cube_name(child) + " on the " +
                            (sign > 0 ? "+" : "-") + " side; ";
          continue;
        }
        // Touching cells already overlap once fattened; connectors only fill gaps.
        for (int c : path) {
          mine.push_back(c);
          out.connectors.push_back(c);
        }
      }
    }
  }
  auto tidy = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(out.plus);
  tidy(out.minus);
  tidy(out.connectors);
  out.cells = out.plus;
  out.cells.insert(out.cells.end(), out.minus.begin(), out.minus.end());
  tidy(out.cells);
  return out;
}

SawtoothDomain build_sawtooth(const Catalog& catalog, const CoronaDecomposition& corona,
                              const std::vector<CubeRef>& cubes, int sign, std::size_t n_samples, std::uint64_t seed) {
  require(sign == 1 || sign == -1, ErrorCode::kInvalidArgument, "sawtooth sign must be +1 or -1");
  require(!cubes.empty(), ErrorCode::kInvalidArgument, "sawtooth needs at least one cube");
  const DyadicGrid& g = *catalog.grid;
  const WhitneyDecomposition& w = *catalog.whitney;
  SawtoothDomain sd;
  sd.cubes = cubes;
  std::sort(sd.cubes.begin(), sd.cubes.end());
  sd.sign = sign;
  const CoherencyReport coh = check_coherency(g, sd.cubes);
  if (!coh.unique_top || !coh.interval_closed) sd.diagnostics.push_back("cube family is not semi-coherent");

  std::map<CubeRef, std::vector<int>> part;
  for (const CubeRef& q : sd.cubes) {
    const AugmentedRegion a = augment_and_split(catalog, corona, q);
    if (!a.ok) sd.diagnostics.push_back(cube_name(q) + ": " + a.diagnostic);
    part[q] = a.split ? (sign > 0 ? a.plus : a.minus) : a.cells;
    sd.cells.insert(sd.cells.end(), part[q].begin(), part[q].end());
  }
  std::sort(sd.cells.begin(), sd.cells.end());
  sd.cells.erase(std::unique(sd.cells.begin(), sd.cells.end()), sd.cells.end());
  std::vector<char> in_union(w.size(), 0);
  for (int c : sd.cells) in_union[c] = 1;
  auto inside = [&](int c) { return in_union[c] != 0; };

  const std::set<CubeRef> members(sd.cubes.begin(), sd.cubes.end());
  for (const CubeRef& q : sd.cubes) {
    if (q.k == g.k_max) continue;
    const DyadicCube& c = g.cube(q);
    for (int ch = c.child_begin; ch < c.child_end; ++ch) {
      const CubeRef child{q.k + 1, ch};
      if (!members.count(child)) continue;
      const auto& a = part[q];
      const auto& b = part[child];
      if (a.empty() || b.empty()) continue;
      const int steps = bfs_steps(w, a, b, inside);
      if (steps < 0) {
        sd.diagnostics.push_back("no Harnack path from " + cube_name(q) + " to " + cube_name(child));
        sd.max_harnack = INT_MAX;
      } else if (sd.max_harnack != INT_MAX) {
        sd.max_harnack = std::max(sd.max_harnack, steps);
      }
      sd.harnack.push_back(steps);
    }
  }

  // Exposed faces of the (unfattened) cell union: each face minus the parts
  // shared with union neighbors across it.
  std::vector<std::pair<Point, Point>> faces;
  for (int c : sd.cells) {
    const Box2& b = w.cell(c).box;
    struct Face {
      bool vertical;
      double at, lo, hi;
      bool outer_high;  // neighbor lies on the high side of the face
    };
    const Face fs[4] = {{true, b.x0, b.y0, b.y1, false},
                        {true, b.x1, b.y0, b.y1, true},
                        {false, b.y0, b.x0, b.x1, false},
                        {false, b.y1, b.x0, b.x1, true}};
    for (const Face& f : fs) {
      std::vector<std::pair<double, double>> cover;
      for (int n : w.cell(c).neighbors) {
        if (!in_union[n]) continue;
        const Box2& nb = w.cell(n).box;
        const double touch = f.vertical ? (f.outer_high ? nb.x0 : nb.x1) : (f.outer_high ? nb.y0 : nb.y1);
        if (touch != f.at) continue;
        const double lo = std::max(f.lo, f.vertical ? nb.y0 : nb.x0);
        const double hi = std::min(f.hi, f.vertical ? nb.y1 : nb.x1);
        if (hi > lo) cover.push_back({lo, hi});
      }
      std::sort(cover.begin(), cover.end());
      double cur = f.lo;
      auto emit = [&](double a, double z) {
        if (z <= a) return;
        faces.push_back(f.vertical ? std::pair{Point{f.at, a}, Point{f.at, z}} : std::pair{Point{a, f.at}, Point{z, f.at}});
      };
      for (const auto& [lo, hi] : cover) {
        emit(cur, lo);
        cur = std::max(cur, hi);
      }
      emit(cur, f.hi);
    }
  }
  auto boundary_distance = [&](const Point& x) {
    double d = kInf;
    for (const auto& [a, b] : faces) d = std::min(d, point_segment_distance(x, a, b));
    return d;
  };

  sd.min_clearance = kInf;
  for (const CubeRef& q : sd.cubes) {
    double best = 0.0;
    for (int c : part[q]) best = std::max(best, boundary_distance(w.cell(c).box.center()));
    if (!part[q].empty()) sd.min_clearance = std::min(sd.min_clearance, best / g.cube(q).ell);
  }

  if (!sd.cells.empty() && n_samples > 0) {
    std::vector<double> ratio(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
      CounterRng rng(hash_key(seed, 0x5A, i));
      const int c = sd.cells[static_cast<std::size_t>(rng.uniform() * sd.cells.size()) % sd.cells.size()];
      const Point x = w.cell(c).box.center();
      ratio[i] = g.scene->distance(x) / boundary_distance(x);
    });
    sd.samples = n_samples;
    sd.dist_ratio_min = *std::min_element(ratio.begin(), ratio.end());
    sd.dist_ratio_max = *std::max_element(ratio.begin(), ratio.end());
  }
  return sd;
}

CoronaHMReport verify_corona_hm(const DyadicGrid& grid, const std::vector<Regime>& regimes,
                                const std::vector<Point>& poles, const HarmonicDomain& domain, long walks,
                                std::uint64_t seed, double c_pole) {
  require(poles.size() == regimes.size(), ErrorCode::kInvalidArgument, "one pole per regime is required");
  require(c_pole >= 1.0, ErrorCode::kInvalidArgument, "pole constant must be at least 1");
  CoronaHMReport rep;
  const HarmonicDomain d = domain.with_shell(1e-3 * std::ldexp(1.0, -grid.k_max));
  std::vector<CubeRef> tops;
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    const Regime& S = regimes[i];
    const DyadicCube& top = grid.cube(S.top);
    tops.push_back(S.top);
    CoronaHMEntry e;
    e.regime = static_cast<int>(i);
    e.top = S.top;
    e.pole = poles[i];
    e.pole_distance = grid.distance_to(top, poles[i]) / top.ell;
    e.pole_ok = e.pole_distance >= 1.0 / c_pole && e.pole_distance <= c_pole;
    e.members = S.cubes.size();
    const NodeBatch b = sample_exit_nodes(d, grid, poles[i], walks, seed, hash_key(static_cast<std::uint64_t>(i), 0x3C));
    e.min_ratio = kInf;
    for (const CubeRef& r : S.cubes) {
      const MeasureEstimate m = b.set(dilate(grid, r, 3.0).nodes());
      const double scale = top.sigma / grid.cube(r).sigma;
      e.min_ratio = std::min(e.min_ratio, m.value * scale);
      e.max_ratio = std::max(e.max_ratio, m.value * scale);
      e.max_std_error = std::max(e.max_std_error, m.std_error * scale);
    }
    rep.entries.push_back(e);
  }
  rep.packing = verify_packing(grid, tops, all_cubes(grid));
  return rep;
}

}  // namespace fatou
