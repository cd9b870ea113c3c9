#include "fatou/counting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fatou {

double SampledSolution::max_abs() const {
  double m = 0.0;
  for (const auto& gen : values)
    for (const auto& v : gen)
      for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double SampledSolution::max_std_error() const {
  double m = 0.0;
  for (const auto& gen : std_error)
    for (double x : gen) m = std::max(m, x);
  return m;
}

std::vector<Point> sample_points(const Catalog& catalog, const Subcatalog& sub, CubeRef q) {
  const WhitneyRegion& r = catalog.region(q);
  const int i = sub.at(*catalog.grid, q);
  std::vector<Point> pts;
  if (i < 0 || i >= static_cast<int>(r.components.size())) return pts;
  for (int c : r.components[i].samples) pts.push_back(catalog.whitney->cell(c).box.center());
  return pts;
}

namespace {

SampledSolution empty_like(const DyadicGrid& g, const std::string& provenance) {
  SampledSolution s;
  s.k_min = g.k_min;
  s.k_max = g.k_max;
  s.provenance = provenance;
  for (const auto& gen : g.generations) {
    s.values.emplace_back(gen.size());
    s.std_error.emplace_back(gen.size(), 0.0);
  }
  return s;
}

}  // namespace

SampledSolution sample_solution(const Catalog& catalog, const Subcatalog& sub,
                                const std::function<double(const Point&)>& u, const std::string& provenance) {
  const DyadicGrid& g = *catalog.grid;
  SampledSolution s = empty_like(g, provenance);
  for (int k = g.k_min; k <= g.k_max; ++k) {
    for (int id = 0; id < static_cast<int>(g.generation(k).size()); ++id) {
      auto& v = s.values[k - g.k_min][id];
      for (const Point& p : sample_points(catalog, sub, {k, id})) v.push_back(u(p));
    }
  }
  return s;
}

std::vector<SampledSolution> sample_solutions_wos(const Catalog& catalog, const Subcatalog& sub,
                                                  const HarmonicDomain& domain,
                                                  const std::vector<std::vector<double>>& node_data, long n_walks,
                                                  std::uint64_t seed, double shell_factor) {
  const DyadicGrid& g = *catalog.grid;
  for (const auto& d : node_data) {
    require(d.size() == g.nodes.size(), ErrorCode::kInvalidArgument, "boundary data must give one value per node");
    for (double v : d) require(std::abs(v) <= 1.0, ErrorCode::kOutOfRange, "boundary data must satisfy |f| <= 1");
  }
  std::vector<SampledSolution> out;
  for (std::size_t j = 0; j < node_data.size(); ++j) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "wos data=%zu walks=%ld seed=%llu", j, n_walks, static_cast<unsigned long long>(seed));
    out.push_back(empty_like(g, buf));
  }
  for (int k = g.k_min; k <= g.k_max; ++k) {
    for (int id = 0; id < static_cast<int>(g.generation(k).size()); ++id) {
      const HarmonicDomain d = domain.with_shell(shell_factor * g.cube(k, id).ell);
      const std::vector<Point> pts = sample_points(catalog, sub, {k, id});
      for (std::size_t slot = 0; slot < pts.size(); ++slot) {
        const NodeBatch nb = sample_exit_nodes(d, g, pts[slot], n_walks, seed,
                                               hash_key(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(id), slot));
        for (std::size_t j = 0; j < node_data.size(); ++j) {
          const MeasureEstimate m = nb.mean(node_data[j]);
          out[j].values[k - g.k_min][id].push_back(m.value);
          double& se = out[j].std_error[k - g.k_min][id];
          se = std::max(se, m.std_error);
        }
      }
    }
  }
  return out;
}

DyadicIndicator random_dyadic_indicator(const DyadicGrid& grid, int k, std::uint64_t seed, double p) {
  require(k >= grid.k_min && k <= grid.k_max, ErrorCode::kOutOfRange, "indicator generation outside the grid");
  DyadicIndicator d;
  d.k = k;
  d.node_values.assign(grid.nodes.size(), 0.0);
  for (const DyadicCube& q : grid.generation(k)) {
    CounterRng rng(hash_key(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(q.id)));
    if (rng.uniform() >= p) continue;
    d.cubes.push_back(q.id);
    for (int n = q.node_begin; n < q.node_end; ++n) d.node_values[n] = 1.0;
  }
  return d;
}

double halfplane_extension(const DyadicGrid& grid, const DyadicIndicator& data, const Point& x) {
  require(grid.scene->kind() == SceneKind::kHyperplane && grid.scene->ambient_dim() == 2, ErrorCode::kUnsupported,
          "closed-form extension needs the planar hyperplane scene");
  double u = 0.0;
  for (int id : data.cubes) {
    const Box2& b = grid.cube(data.k, id).bounds;
    u += halfplane_interval_measure(x, b.x0, b.x1);
  }
  return std::min(1.0, u);
}

OscillationPath longest_oscillation(const std::vector<ChainLevel>& chain, double eps) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  const int m = static_cast<int>(chain.size());
  std::vector<int> offset(m + 1, 0);
  for (int j = 0; j < m; ++j) offset[j + 1] = offset[j] + static_cast<int>(chain[j].values->size());
  std::vector<int> best(offset[m], 0), prev(offset[m], -1);
  for (int j = 1; j < m; ++j) {
    const auto& vj = *chain[j].values;
    for (int i = 0; i < j; ++i) {
      if (chain[j].q.k <= chain[i].q.k) continue;
      const auto& vi = *chain[i].values;
      for (std::size_t s = 0; s < vj.size(); ++s) {
        for (std::size_t t = 0; t < vi.size(); ++t) {
          if (!(std::abs(vj[s] - vi[t]) > eps)) continue;
          const int cand = best[offset[i] + t] + 1;
          if (cand > best[offset[j] + s]) {
            best[offset[j] + s] = cand;
            prev[offset[j] + s] = offset[i] + static_cast<int>(t);
          }
        }
      }
    }
  }
  OscillationPath path;
  int end = -1;
  for (int n = 0; n < offset[m]; ++n) {
    if (best[n] > path.count) {
      path.count = best[n];
      end = n;
    }
  }
  for (int n = end; n >= 0; n = prev[n]) {
    const int level = static_cast<int>(std::upper_bound(offset.begin(), offset.end(), n) - offset.begin()) - 1;
    path.steps.emplace_back(level, n - offset[level]);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

std::vector<CubeRef> cube_chain(const DyadicGrid& grid, int node, CubeRef top, std::optional<CubeRef> bottom,
                                int k_last) {
  if (k_last < 0) k_last = grid.k_max;
  require(top.k >= grid.k_min && top.k <= k_last && k_last <= grid.k_max, ErrorCode::kOutOfRange,
          "chain generations outside the grid");
  require(grid.cube_of(top.k, node) == top.id, ErrorCode::kInvalidArgument, "x is not in the top cube");
  int k_end = k_last;
  if (bottom) {
    require(bottom->k >= top.k && bottom->k <= grid.k_max &&
                grid.ancestor(bottom->k, bottom->id, top.k) == top.id,
            ErrorCode::kInvalidArgument, "bottom cube is not inside the top cube");
    require(grid.cube_of(bottom->k, node) == bottom->id, ErrorCode::kInvalidArgument, "x is not in the bottom cube");
    k_end = bottom->k;
  }
  std::vector<CubeRef> chain;
  for (int k = top.k; k <= k_end; ++k) chain.push_back({k, grid.cube_of(k, node)});
  return chain;
}

namespace {

std::vector<ChainLevel> levels_of(const SampledSolution& u, const std::vector<CubeRef>& chain) {
  std::vector<ChainLevel> levels;
  levels.reserve(chain.size());
  for (const CubeRef& q : chain) levels.push_back({q, &u.at(q)});
  return levels;
}

}  // namespace

int counting_function(const SampledSolution& u, const DyadicGrid& grid, int node, double eps, CubeRef q0, int k_last) {
  return longest_oscillation(levels_of(u, cube_chain(grid, node, q0, {}, k_last)), eps).count;
}

int doubly_truncated_counting(const SampledSolution& u, const DyadicGrid& grid, int node, double eps,
                              std::optional<CubeRef> bottom, CubeRef top) {
  return longest_oscillation(levels_of(u, cube_chain(grid, node, top, bottom)), eps).count;
}

double carleson_average(const std::vector<int>& N, const std::vector<double>& weights, double sigma) {
  require(!N.empty(), ErrorCode::kEmptySample, "no quadrature nodes");
  require(N.size() == weights.size(), ErrorCode::kInvalidArgument, "one weight per node");
  require(sigma > 0.0, ErrorCode::kInvalidArgument, "sigma(Q0) must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < N.size(); ++i) s += N[i] * weights[i];
  return s / sigma;
}

std::vector<int> leaf_counts(const SampledSolution& u, const DyadicGrid& grid, double eps, CubeRef q0, int k_last) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
  if (k_last < 0) k_last = grid.k_max;
  require(q0.k >= grid.k_min && q0.k <= k_last && k_last <= grid.k_max, ErrorCode::kOutOfRange,
          "chain generations outside the grid");
  struct Frame {
    const std::vector<double>* values;
    std::vector<int> best;
    int running = 0;  // max of best over this frame and its ancestors
  };
  std::vector<Frame> stack;
  std::vector<int> out;
  // Iterative depth-first walk in id order; frames[j] holds generation q0.k + j.
  std::vector<std::pair<int, int>> todo{{q0.k, q0.id}};
  while (!todo.empty()) {
    const auto [k, id] = todo.back();
    todo.pop_back();
    stack.resize(k - q0.k);
    Frame f;
    f.values = &u.at({k, id});
    f.best.assign(f.values->size(), 0);
    for (const Frame& a : stack) {
      for (std::size_t s = 0; s < f.values->size(); ++s) {
        for (std::size_t t = 0; t < a.values->size(); ++t) {
          if (std::abs((*f.values)[s] - (*a.values)[t]) > eps) f.best[s] = std::max(f.best[s], a.best[t] + 1);
        }
      }
    }
    f.running = stack.empty() ? 0 : stack.back().running;
    for (int b : f.best) f.running = std::max(f.running, b);
    if (k == k_last) {
      out.push_back(f.running);
      continue;
    }
    stack.push_back(std::move(f));
    const DyadicCube& q = grid.cube(k, id);
    for (int c = q.child_end - 1; c >= q.child_begin; --c) todo.emplace_back(k + 1, c);
  }
  return out;
}

CountingResult count_over_cube(const SampledSolution& u, const DyadicGrid& grid, double eps, CubeRef q0, int k_last,
                               const std::string& subcatalog) {
  if (k_last < 0) k_last = grid.k_max;
  const DyadicCube& root = grid.cube(q0);
  const std::vector<int> per_leaf = leaf_counts(u, grid, eps, q0, k_last);
  CountingResult r;
  r.root = q0;
  r.eps = eps;
  r.k_last = k_last;
  r.subcatalog = subcatalog;
  std::vector<double> w;
  const int first_leaf = grid.cube_of(k_last, root.node_begin);
  for (int n = root.node_begin; n < root.node_end; ++n) {
    r.nodes.push_back(n);
    r.N.push_back(per_leaf[grid.cube_of(k_last, n) - first_leaf]);
    w.push_back(grid.nodes[n].weight);
  }
  r.carleson_average = carleson_average(r.N, w, root.sigma);
  return r;
}

void write_counting_csv(const std::vector<CountingResult>& results, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path);
  out << "x_id,eps,depth,N\n";
  char buf[64];
  for (const CountingResult& r : results) {
    std::snprintf(buf, sizeof buf, "%.17g", r.eps);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) out << r.nodes[i] << ',' << buf << ',' << r.k_last << ',' << r.N[i] << '\n';
  }
}

DyadicCone build_cone(const Catalog& catalog, const std::vector<CubeRef>& cubes, double tau) {
  require(tau > 0.0 && 2.0 * tau <= kTau0, ErrorCode::kInvalidArgument, "cone fattening needs 0 < 2 tau <= tau0");
  std::vector<std::pair<int, CubeRef>> tagged;
  for (const CubeRef& q : cubes) {
    const WhitneyRegion& r = catalog.region(q);
    require(r.cells.size() == r.n_cells, ErrorCode::kPrecondition, "catalog was built without member cells");
    for (int c : r.cells) tagged.emplace_back(c, q);
  }
  // Finest contributing cube first within each cell.
  std::sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.second.k != b.second.k) return a.second.k > b.second.k;
    return a.second.id < b.second.id;
  });
  DyadicCone cone;
  cone.tau = tau;
  cone.cubes = cubes;
  for (std::size_t i = 0; i < tagged.size(); ++i) {
    if (i > 0 && tagged[i].first == tagged[i - 1].first) continue;
    cone.cells.push_back({tagged[i].first, tagged[i].second});
  }
  return cone;
}

DyadicCone cone_at(const Catalog& catalog, int node, CubeRef q0, double tau) {
  return build_cone(catalog, cube_chain(*catalog.grid, node, q0), tau);
}

DyadicCone cone_between(const Catalog& catalog, CubeRef bottom, CubeRef top, double tau) {
  const DyadicGrid& g = *catalog.grid;
  return build_cone(catalog, cube_chain(g, g.cube(bottom).node_begin, top, bottom), tau);
}

DyadicCone carleson_region(const Catalog& catalog, CubeRef q0, double tau) {
  const DyadicGrid& g = *catalog.grid;
  std::vector<CubeRef> cubes{q0};
  int lo = q0.id, hi = q0.id + 1;
  for (int k = q0.k; k < g.k_max; ++k) {
    const int nlo = g.cube(k, lo).child_begin, nhi = g.cube(k, hi - 1).child_end;
    for (int id = nlo; id < nhi; ++id) cubes.push_back({k + 1, id});
    lo = nlo;
    hi = nhi;
  }
  return build_cone(catalog, cubes, tau);
}

OverlapStats region_overlap(const Catalog& catalog) {
  std::vector<int> count(catalog.whitney->size(), 0);
  for (const auto& gen : catalog.regions) {
    for (const WhitneyRegion& r : gen) {
      require(r.cells.size() == r.n_cells, ErrorCode::kPrecondition, "catalog was built without member cells");
      for (int c : r.cells) ++count[c];
    }
  }
  OverlapStats s;
  for (int c : count) {
    if (c == 0) continue;
    ++s.histogram[c];
    s.max_multiplicity = std::max(s.max_multiplicity, c);
  }
  return s;
}

RegimeSplitReport regime_split_check(const SampledSolution& u, const DyadicGrid& grid, const CubePartition& partition,
                               int node, double eps, CubeRef q0) {
  RegimeSplitReport rep;
  rep.node = node;
  rep.eps = eps;
  const std::vector<CubeRef> chain = cube_chain(grid, node, q0);
  const OscillationPath path = longest_oscillation(levels_of(u, chain), eps);
  rep.lhs = path.count;
  for (const auto& [level, slot] : path.steps) rep.witness.push_back(chain[level]);

  std::vector<int> seen;
  for (std::size_t j = 0; j < chain.size(); ++j) {
    const int s = partition.regime_of(grid, chain[j]);
    if (s < 0) {
      ++rep.sigma2;
      continue;
    }
    if (std::find(seen.begin(), seen.end(), s) != seen.end()) continue;
    seen.push_back(s);
    // Regimes are intervals along the chain: j is Q_max, the last member is Q_min.
    std::size_t last = j;
    while (last + 1 < chain.size() && partition.regime_of(grid, chain[last + 1]) == s) ++last;
    rep.sigma1 += doubly_truncated_counting(u, grid, node, eps, chain[last], chain[j]);
    const CubeRef top = partition.top[s];
    if (top.k >= q0.k && grid.cube_of(top.k, node) == top.id) ++rep.sigma3;
  }
  rep.holds = rep.lhs <= rep.sigma1 + rep.sigma2 + rep.sigma3;
  return rep;
}

}  // namespace fatou
