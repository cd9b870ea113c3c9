#include "fatou/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fatou/error.hpp"
#include "fatou/parallel.hpp"
#include "fatou/rng.hpp"

namespace fatou {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int boundary_dim(const Scene& s) { return s.ambient_dim() - 1; }

Point central_gradient(const SolutionFn& u, const Point& y, double h) {
  const double gx = (u({y.x + h, y.y, y.z}) - u({y.x - h, y.y, y.z})) / (2.0 * h);
  const double gy = (u({y.x, y.y + h, y.z}) - u({y.x, y.y - h, y.z})) / (2.0 * h);
  return {gx, gy, 0.0};
}

/// Shared edge of two closed squares, or length 0 when they meet at a corner or not at all.
bool shared_face(const Box2& a, const Box2& b, double& length, Point& mid) {
  const double tol = 1e-12 * std::max(a.width(), b.width());
  const double ox0 = std::max(a.x0, b.x0), ox1 = std::min(a.x1, b.x1);
  const double oy0 = std::max(a.y0, b.y0), oy1 = std::min(a.y1, b.y1);
  const double ox = ox1 - ox0, oy = oy1 - oy0;
  if (ox < -tol || oy < -tol) return false;
  if (ox > tol && std::abs(oy) <= tol) {
    length = ox;
  } else if (oy > tol && std::abs(ox) <= tol) {
    length = oy;
  } else {
    return false;
  }
  mid = {0.5 * (ox0 + ox1), 0.5 * (oy0 + oy1), 0.0};
  return true;
}

bool has(const std::vector<int>& sorted, int x) { return std::binary_search(sorted.begin(), sorted.end(), x); }

double face_weight(const Approximant& phi, const CellFace& f) {
  const double jump = std::abs(phi.value[f.a] - phi.value[f.b]);
  if (jump == 0.0) return 0.0;
  const Scene& s = phi.whitney->scene();
  return jump * f.length * std::pow(s.distance(f.mid), -boundary_dim(s));
}

/// Face-jump TV within B(x_Q, reach·ℓ(Q)) for every cube, normalized by r^n.
void measure_carleson(Approximant& a, const DyadicGrid& grid, double reach) {
  std::vector<int> cells;
  for (int c = 0; c < static_cast<int>(a.group_of.size()); ++c)
    if (a.defined(c)) cells.push_back(c);
  std::vector<CellFace> faces = cell_faces(*a.whitney, cells);
  std::vector<std::pair<double, double>> tv;  // (mid.x, jump * length), sorted by x
  std::vector<Point> mids;
  std::sort(faces.begin(), faces.end(), [](const CellFace& f, const CellFace& g) { return f.mid.x < g.mid.x; });
  for (const CellFace& f : faces) {
    const double j = std::abs(a.value[f.a] - a.value[f.b]);
    if (j > 0.0) {
      tv.emplace_back(f.mid.x, j * f.length);
      mids.push_back(f.mid);
    }
  }
  const int n = boundary_dim(a.whitney->scene());
  a.carleson.clear();
  a.carleson_candidate = 0.0;
  for (int k = grid.k_min; k <= grid.k_max; ++k) {
    for (const DyadicCube& q : grid.generation(k)) {
      const double r = reach * q.ell;
      CarlesonBallSum b{{q.center, r}};
      auto lo = std::lower_bound(tv.begin(), tv.end(), q.center.x - r,
                                 [](const auto& e, double x) { return e.first < x; });
      for (auto it = lo; it != tv.end() && it->first <= q.center.x + r; ++it) {
        if (dist(mids[it - tv.begin()], q.center) > r) continue;
        b.sum += it->second;
        ++b.points;
      }
      b.normalized = b.sum / std::pow(r, n);
      a.carleson_candidate = std::max(a.carleson_candidate, b.normalized);
      a.carleson.push_back(b);
    }
  }
}

}  // namespace

CarlesonGradientReport carleson_gradient_norm(const SolutionFn& u, const WhitneyDecomposition& w,
                                              const std::vector<Ball>& balls, const CarlesonGradientOptions& opts) {
  require(opts.step_factor > 0.0 && opts.step_factor <= 1e-2, ErrorCode::kInvalidArgument,
          "FD step factor must lie in (0, 1e-2]");
  require(opts.subdivisions >= 1, ErrorCode::kInvalidArgument, "subdivisions must be positive");
  const Scene& scene = w.scene();
  const int n = boundary_dim(scene);
  const int s = opts.subdivisions;
  CarlesonGradientReport rep;
  bool richardson_done = false;
  for (const Ball& ball : balls) {
    require(ball.r > 0.0, ErrorCode::kNonPositiveRadius, "ball radius must be positive");
    std::vector<double> part(w.size(), 0.0);
    std::vector<long> count(w.size(), 0);
    parallel_for(w.size(), [&](std::size_t i) {
      const WhitneyCell& c = w.cell(static_cast<int>(i));
      if (point_box_distance(ball.x, c.box) > ball.r) return;
      const double h = c.side / s;
      for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) {
          const Point y{c.box.x0 + (a + 0.5) * h, c.box.y0 + (b + 0.5) * h, 0.0};
          if (dist(y, ball.x) >= ball.r || !scene.in_domain(y)) continue;
          const double d = scene.distance(y);
          const Point g = central_gradient(u, y, opts.step_factor * d);
          part[i] += (g.x * g.x + g.y * g.y) * d * h * h;
          ++count[i];
        }
      }
    });
    CarlesonBallSum out{ball};
    for (std::size_t i = 0; i < w.size(); ++i) {
      out.sum += part[i];
      out.points += count[i];
      if (!richardson_done && count[i] > 0) {
        const Point y = w.cell(static_cast<int>(i)).box.center();
        const double d = scene.distance(y);
        const Point g1 = central_gradient(u, y, opts.step_factor * d);
        const Point g2 = central_gradient(u, y, 0.5 * opts.step_factor * d);
        const double m = std::hypot(g2.x, g2.y);
        rep.richardson = m > 0.0 ? std::hypot(g1.x - g2.x, g1.y - g2.y) / m : 0.0;
        richardson_done = true;
      }
    }
    out.normalized = out.sum / std::pow(ball.r, n);
    rep.sup = std::max(rep.sup, out.normalized);
    rep.balls.push_back(out);
  }
  return rep;
}

std::vector<CellFace> cell_faces(const WhitneyDecomposition& w, const std::vector<int>& cells) {
  std::vector<CellFace> out;
  for (int a : cells) {
    for (int b : w.cell(a).neighbors) {
      if (b <= a || !has(cells, b)) continue;
      CellFace f;
      f.a = a;
      f.b = b;
      if (shared_face(w.cell(a).box, w.cell(b).box, f.length, f.mid)) out.push_back(f);
    }
  }
  std::sort(out.begin(), out.end(), [](const CellFace& f, const CellFace& g) {
    return f.a != g.a ? f.a < g.a : f.b < g.b;
  });
  return out;
}

CubePartition Approximant::partition(const DyadicGrid& grid) const {
  CubePartition p;
  p.regime.resize(grid.generations.size());
  for (int k = grid.k_min; k <= grid.k_max; ++k) p.regime[k - grid.k_min].assign(grid.generation(k).size(), -1);
  for (const ApproxGroup& g : groups) {
    if (g.regime < 0) continue;
    const int idx = static_cast<int>(p.top.size());
    p.top.push_back(g.top);
    for (const CubeRef& q : g.cubes) p.regime[q.k - grid.k_min][q.id] = idx;
  }
  return p;
}

Approximant approximant_from_values(const WhitneyDecomposition& w, std::vector<double> value) {
  require(value.size() == w.size(), ErrorCode::kInvalidArgument, "one value per Whitney cell is required");
  Approximant a;
  a.whitney = &w;
  a.group_of.assign(w.size(), -1);
  for (std::size_t c = 0; c < w.size(); ++c)
    if (!std::isnan(value[c])) a.group_of[c] = 0;
  a.value = std::move(value);
  return a;
}

Approximant build_approximant(const SolutionFn& u, const Catalog& catalog,
                              const CoronaDecomposition& corona, double eps, int max_rounds) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  require(max_rounds >= 0, ErrorCode::kInvalidArgument, "refinement rounds must be nonnegative");
  const DyadicGrid& grid = *catalog.grid;
  const WhitneyDecomposition& w = *catalog.whitney;
  Approximant a;
  a.whitney = &w;
  a.eps = eps;

  // Each cell belongs to its finest cube.
  std::vector<CubeRef> owner(w.size(), CubeRef{-1, -1});
  std::vector<std::vector<std::vector<int>>> owned(grid.generations.size());
  for (int k = grid.k_min; k <= grid.k_max; ++k) {
    owned[k - grid.k_min].resize(grid.generation(k).size());
    for (const DyadicCube& q : grid.generation(k)) {
      const WhitneyRegion& reg = catalog.region({k, q.id});
      require(reg.cells.size() == reg.n_cells, ErrorCode::kPrecondition, "catalog was built without member cells");
      for (int c : reg.cells) {
        CubeRef& o = owner[c];
        if (o.k < k || (o.k == k && q.id < o.id)) o = {k, q.id};
      }
    }
  }
  std::vector<double> u_cell(w.size(), kNaN);
  std::vector<int> cells;
  for (int c = 0; c < static_cast<int>(w.size()); ++c) {
    if (owner[c].k < 0) continue;
    cells.push_back(c);
    owned[owner[c].k - grid.k_min][owner[c].id].push_back(c);
  }
  parallel_for(cells.size(), [&](std::size_t i) { u_cell[cells[i]] = u(w.cell(cells[i]).box.center()); });

  // u at the first cell the group owns in sample order (largest, then
  // nearest x_top, then lowest id), preferring cells of the top itself.
  auto group_value = [&](const std::vector<CubeRef>& cubes) {
    const Point x = grid.cube(cubes.front()).center;
    auto before = [&](int c, int d) {
      const WhitneyCell &wc = w.cell(c), &wd = w.cell(d);
      if (wc.side != wd.side) return wc.side > wd.side;
      const double dc = dist(wc.box.center(), x), dd = dist(wd.box.center(), x);
      return dc != dd ? dc < dd : c < d;
    };
    auto best_of = [&](const std::vector<CubeRef>& qs) {
      int best = -1;
      for (const CubeRef& q : qs)
        for (int c : owned[q.k - grid.k_min][q.id])
          if (best < 0 || before(c, best)) best = c;
      return best;
    };
    int best = best_of({cubes.front()});
    if (best < 0) best = best_of(cubes);
    return best < 0 ? kNaN : u_cell[best];
  };

  // Groups: one per regime, one per bad cube.
  std::vector<std::vector<int>> cube_group(grid.generations.size());
  for (int k = grid.k_min; k <= grid.k_max; ++k) cube_group[k - grid.k_min].assign(grid.generation(k).size(), -1);
  auto group_at = [&](CubeRef q) -> int& { return cube_group[q.k - grid.k_min][q.id]; };
  for (std::size_t s = 0; s < corona.regimes.size(); ++s) {
    const Regime& r = corona.regimes[s];
    for (const CubeRef& q : r.cubes) group_at(q) = static_cast<int>(a.groups.size());
    a.groups.push_back({r.top, static_cast<int>(s), r.cubes, group_value(r.cubes)});
  }
  for (const CubeRef& q : corona.bad) {
    group_at(q) = static_cast<int>(a.groups.size());
    a.groups.push_back({q, -1, {q}, group_value({q})});
  }

  a.value.assign(w.size(), kNaN);
  a.group_of.assign(w.size(), -1);
  auto assign = [&] {
    for (int c : cells) {
      a.group_of[c] = group_at(owner[c]);
      a.value[c] = a.groups[a.group_of[c]].value;
    }
  };
  auto deviation_of = [&](const std::vector<int>& group_cells) {
    double d = 0.0;
    for (int c : group_cells) d = std::max(d, std::abs(u_cell[c] - a.value[c]));
    return d;
  };
  auto cells_by_group = [&] {
    std::vector<std::vector<int>> out(a.groups.size());
    for (int c : cells) out[a.group_of[c]].push_back(c);
    return out;
  };
  assign();
  a.deviation = deviation_of(cells);
  a.deviation_history.push_back(a.deviation);

  for (int round = 0; round < max_rounds; ++round) {
    const std::vector<std::vector<int>> members = cells_by_group();
    bool split_any = false;
    const std::size_t n_groups = a.groups.size();
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      const ApproxGroup g = a.groups[gi];
      if (g.cubes.size() < 2) continue;
      const double before = deviation_of(members[gi]);
      if (before <= eps) continue;
      // The top keeps the group alone; each child of the top opens a subgroup.
      std::vector<ApproxGroup> parts;
      const DyadicCube& top = grid.cube(g.top);
      for (int id = top.child_begin; id < top.child_end; ++id) {
        const CubeRef child{g.top.k + 1, id};
        ApproxGroup part{child, g.regime, {}, 0.0};
        for (const CubeRef& q : g.cubes)
          if (q.k > g.top.k && grid.ancestor(q.k, q.id, child.k) == id) part.cubes.push_back(q);
        if (part.cubes.empty()) continue;
        part.value = group_value(part.cubes);
        parts.push_back(std::move(part));
      }
      const std::size_t first_new = a.groups.size();
      for (std::size_t j = 0; j < parts.size(); ++j)
        for (const CubeRef& q : parts[j].cubes) group_at(q) = static_cast<int>(first_new + j);
      for (ApproxGroup& p : parts) a.groups.push_back(std::move(p));
      a.groups[gi].cubes = {g.top};
      a.groups[gi].value = group_value({g.top});
      for (int c : members[gi]) a.value[c] = a.groups[group_at(owner[c])].value;
      const double after = deviation_of(members[gi]);
      if (after <= before) {
        for (int c : members[gi]) a.group_of[c] = group_at(owner[c]);
        split_any = true;
        continue;
      }
      // Undo a split that makes this group worse.
      for (const CubeRef& q : g.cubes) group_at(q) = static_cast<int>(gi);
      a.groups.resize(first_new);
      a.groups[gi] = g;
      for (int c : members[gi]) a.value[c] = g.value;
    }
    if (!split_any) break;
    ++a.rounds;
    a.deviation = deviation_of(cells);
    a.deviation_history.push_back(a.deviation);
  }
  measure_carleson(a, grid, std::sqrt(catalog.params.K));
  return a;
}

std::vector<double> cone_gradient_contributions(const Approximant& phi, const DyadicCone& cone) {
  std::vector<int> cells;
  cells.reserve(cone.cells.size());
  for (const ConeCell& c : cone.cells) {
    require(c.cell >= 0 && c.cell < static_cast<int>(phi.group_of.size()) && phi.defined(c.cell),
            ErrorCode::kInvalidArgument, "cone cell " + std::to_string(c.cell) + " has no approximant value");
    cells.push_back(c.cell);
  }
  std::vector<double> out(cells.size(), 0.0);
  std::size_t i = 0;
  for (const CellFace& f : cell_faces(*phi.whitney, cells)) {
    while (cells[i] != f.a) ++i;
    out[i] += face_weight(phi, f);
  }
  return out;
}

double cone_gradient_functional(const Approximant& phi, const DyadicCone& cone) {
  const std::vector<double> parts = cone_gradient_contributions(phi, cone);
  return std::accumulate(parts.begin(), parts.end(), 0.0);
}

ConeBoundReport cone_bound_check(const SampledSolution& u, const Catalog& catalog, const Approximant& phi, double eps,
                               int n_pairs, std::uint64_t seed) {
  const DyadicGrid& grid = *catalog.grid;
  const CubePartition part = phi.partition(grid);
  ConeBoundReport rep;
  const int n_groups = static_cast<int>(part.top.size());
  if (n_groups == 0) return rep;
  CounterRng rng(hash_key(seed, 0xC0B));
  for (int i = 0; i < n_pairs; ++i) {
    const int gi = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_groups));
    const CubeRef top = part.top[gi];
    const DyadicCube& t = grid.cube(top);
    const int node = t.node_begin + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(t.node_end - t.node_begin));
    CubeRef bottom = top;
    for (const CubeRef& q : cube_chain(grid, node, top)) {
      if (part.regime_of(grid, q) != gi) break;
      bottom = q;
    }
    ConeBoundSample s{node, gi};
    s.count = doubly_truncated_counting(u, grid, node, eps, bottom, top);
    s.functional = cone_gradient_functional(phi, cone_between(catalog, bottom, top, catalog.params.tau));
    if (s.functional > 0.0) {
      rep.constant = std::max(rep.constant, s.count / s.functional);
    } else if (s.count > 0) {
      ++rep.unbounded;
    }
    rep.samples.push_back(s);
  }
  return rep;
}

FubiniReport fubini_collapse_check(const Approximant& phi, const Catalog& catalog, CubeRef q0, double tau) {
  const DyadicGrid& grid = *catalog.grid;
  const DyadicCube& top = grid.cube(q0);
  FubiniReport rep;

  std::vector<std::vector<int>> cone_cells;
  for (int x = top.node_begin; x < top.node_end; ++x) {
    const DyadicCone cone = cone_at(catalog, x, q0, tau);
    rep.lhs += grid.nodes[x].weight * cone_gradient_functional(phi, cone);
    std::vector<int> cells;
    for (const ConeCell& c : cone.cells) cells.push_back(c.cell);
    cone_cells.push_back(std::move(cells));
  }

  const DyadicCone region = carleson_region(catalog, q0, tau);
  std::vector<int> cells;
  for (const ConeCell& c : region.cells) cells.push_back(c.cell);
  auto contributor = [&](int cell) {
    const auto it = std::lower_bound(region.cells.begin(), region.cells.end(), cell,
                                     [](const ConeCell& c, int id) { return c.cell < id; });
    return it->q;
  };
  for (const CellFace& f : cell_faces(*phi.whitney, cells)) {
    require(phi.defined(f.a) && phi.defined(f.b), ErrorCode::kInvalidArgument,
            "Carleson region cell has no approximant value");
    const double tv = face_weight(phi, f);
    ++rep.faces;
    if (tv == 0.0) continue;
    const CubeRef qa = contributor(f.a), qb = contributor(f.b);
    const CubeRef qf = qa.k >= qb.k ? qa : qb;
    rep.rhs += tv * grid.cube(qf).sigma;
    long hits = 0;
    for (const auto& cc : cone_cells) hits += (has(cc, f.a) && has(cc, f.b)) ? 1 : 0;
    rep.face_nodes.push_back(hits);
    rep.face_predicted.push_back(grid.cube(qf).node_end - grid.cube(qf).node_begin);
  }
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs == 0.0 ? 1.0 : kInf);
  return rep;
}

}  // namespace fatou
