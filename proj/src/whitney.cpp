#include "fatou/whitney.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <numeric>

#include "fatou/parallel.hpp"
#include "fatou/rng.hpp"

namespace fatou {

namespace {

Box2 square(int level, std::int64_t ix, std::int64_t iy) {
  const double s = std::ldexp(1.0, -level);
  return {static_cast<double>(ix) * s, static_cast<double>(iy) * s, static_cast<double>(ix + 1) * s,
          static_cast<double>(iy + 1) * s};
}

double overlap_area(const Box2& a, const Box2& b) {
  const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return w > 0.0 && h > 0.0 ? w * h : 0.0;
}

std::int64_t floor_index(double x, double s) { return static_cast<std::int64_t>(std::floor(x / s)); }

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::size_t WhitneyDecomposition::KeyHash::operator()(const Key& k) const {
  return static_cast<std::size_t>(hash_key(static_cast<std::uint64_t>(k.level), static_cast<std::uint64_t>(k.ix),
                                           static_cast<std::uint64_t>(k.iy)));
}

WhitneyDecomposition::WhitneyDecomposition(ScenePtr scene, Box2 box, WhitneyOptions opts)
    : scene_(std::move(scene)), box_(box), opts_(opts) {
  require(scene_ != nullptr && scene_->ambient_dim() == 2, ErrorCode::kUnsupported, "Whitney decompositions are planar");
  require(opts_.min_cell > 0.0, ErrorCode::kInvalidArgument, "min_cell must be positive");
  require(!box.is_empty() && box.width() > 0.0 && box.height() > 0.0, ErrorCode::kInvalidArgument, "empty box");

  const int top = -static_cast<int>(std::ceil(std::log2(std::max(box.width(), box.height()))));
  const double s0 = std::ldexp(1.0, -top);
  struct Item {
    int level;
    std::int64_t ix, iy;
  };
  std::vector<Item> stack;
  for (std::int64_t ix = floor_index(box.x0, s0); ix <= floor_index(box.x1, s0); ++ix)
    for (std::int64_t iy = floor_index(box.y0, s0); iy <= floor_index(box.y1, s0); ++iy) stack.push_back({top, ix, iy});

  const bool focused = !opts_.focus.is_empty() && std::isfinite(opts_.relevance_ratio);
  bool meets_omega = false;
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Box2 sq = square(it.level, it.ix, it.iy);
    const double area = overlap_area(sq, box_);
    if (area <= 0.0) continue;
    const double d = scene_->box_distance(sq);
    if (d > 0.0 && !scene_->in_domain(sq.center())) continue;
    meets_omega = true;
    const double s = sq.width();
    const double diam = s * std::sqrt(2.0);
    if (d > 0.0 && 4.0 * diam <= scene_->box_distance(sq.scaled(4.0))) {
      require(d <= 40.0 * diam, ErrorCode::kInvalidArgument, "box is too far from E for a Whitney tiling at its top scale");
      WhitneyCell c;
      c.box = sq;
      c.level = it.level;
      c.ix = it.ix;
      c.iy = it.iy;
      c.side = s;
      c.dist = d;
      c.in_domain = true;  // d > 0 and the center passed the side test above
      cells_.push_back(std::move(c));
      continue;
    }
    if (s / 2.0 < opts_.min_cell) {
      collar_area_ += area;
      continue;
    }
    if (focused && box_box_distance(sq, opts_.focus) > opts_.relevance_ratio * (s / 2.0)) {
      pruned_area_ += area;
      continue;
    }
    for (int c = 3; c >= 0; --c) stack.push_back({it.level + 1, 2 * it.ix + (c & 1), 2 * it.iy + (c >> 1)});
  }
  require(meets_omega, ErrorCode::kInvalidArgument, "box does not meet the domain");

  std::sort(cells_.begin(), cells_.end(), [](const WhitneyCell& a, const WhitneyCell& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.ix != b.ix) return a.ix < b.ix;
    return a.iy < b.iy;
  });
  if (!cells_.empty()) {
    min_level_ = cells_.front().level;
    max_level_ = cells_.back().level;
  }
  by_level_.assign(max_level_ - min_level_ + 1, {});
  index_.reserve(cells_.size());
  for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
    const WhitneyCell& c = cells_[i];
    index_.emplace(Key{c.level, c.ix, c.iy}, i);
    by_level_[c.level - min_level_].push_back(i);
  }
  link_neighbors();
}

int WhitneyDecomposition::find(int level, std::int64_t ix, std::int64_t iy) const {
  const auto it = index_.find(Key{level, ix, iy});
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> WhitneyDecomposition::cells_meeting(int level, const Box2& region) const {
  std::vector<int> out;
  if (level < min_level_ || level > max_level_) return out;
  const auto& ids = by_level_[level - min_level_];
  const double s = std::ldexp(1.0, -level);
  const std::int64_t x0 = floor_index(region.x0, s) - 1, x1 = floor_index(region.x1, s);
  const std::int64_t y0 = floor_index(region.y0, s) - 1, y1 = floor_index(region.y1, s);
  auto lo = std::lower_bound(ids.begin(), ids.end(), x0, [&](int id, std::int64_t x) { return cells_[id].ix < x; });
  for (auto it = lo; it != ids.end() && cells_[*it].ix <= x1; ++it) {
    const WhitneyCell& c = cells_[*it];
    if (c.iy >= y0 && c.iy <= y1 && boxes_touch(c.box, region)) out.push_back(*it);
  }
  return out;
}

int WhitneyDecomposition::locate(const Point& p) const {
  int best = -1;
  for (int level = min_level_; level <= max_level_; ++level) {
    const double s = std::ldexp(1.0, -level);
    const std::int64_t ix = floor_index(p.x, s), iy = floor_index(p.y, s);
    for (std::int64_t dx = -1; dx <= 0; ++dx) {
      for (std::int64_t dy = -1; dy <= 0; ++dy) {
        const int id = find(level, ix + dx, iy + dy);
        if (id >= 0 && cells_[id].box.contains(p) && (best < 0 || id < best)) best = id;
      }
    }
  }
  return best;
}

void WhitneyDecomposition::link_neighbors() {
  for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
    WhitneyCell& c = cells_[i];
    for (int level = c.level - 3; level <= c.level + 3; ++level) {
      for (int j : cells_meeting(level, c.box)) {
        if (j != i) c.neighbors.push_back(j);
      }
    }
    std::sort(c.neighbors.begin(), c.neighbors.end());
  }
}

WhitneyDecomposition whitney_decompose(const ScenePtr& scene, const Box2& box, WhitneyOptions opts) {
  return WhitneyDecomposition(scene, box, opts);
}

std::vector<WhitneyViolation> check_whitney_property(const WhitneyDecomposition& w) {
  std::vector<WhitneyViolation> out;
  for (int i = 0; i < static_cast<int>(w.size()); ++i) {
    const WhitneyCell& c = w.cell(i);
    const double diam = c.diam();
    const double d = w.scene().box_distance(c.box);
    const double d4 = w.scene().box_distance(c.box.scaled(4.0));
    if (!(4.0 * diam <= d4 && d4 <= d && d <= 40.0 * diam)) out.push_back({i, 4.0 * diam, d4, d, 40.0 * diam});
  }
  return out;
}

WhitneyDecomposition whitney_for_grid(const DyadicGrid& grid, const RegionParams& p) {
  require(p.eta > 0.0 && p.eta < 1.0 && p.K > 1.0, ErrorCode::kInvalidArgument, "need 0 < eta < 1 < K");
  Box2 focus = Box2::empty();
  for (const DyadicCube& q : grid.generation(grid.k_min)) {
    focus.expand({q.bounds.x0, q.bounds.y0, 0.0});
    focus.expand({q.bounds.x1, q.bounds.y1, 0.0});
  }
  const double ell_max = std::ldexp(1.0, -grid.k_min);
  const double reach = std::sqrt(p.K) * ell_max;
  WhitneyOptions opts;
  opts.min_cell = std::pow(p.eta, 0.25) * std::ldexp(1.0, -grid.k_max);
  opts.focus = focus;
  opts.relevance_ratio = std::sqrt(p.K) * std::pow(p.eta, -0.25);
  return WhitneyDecomposition(grid.scene, focus.inflated(reach), opts);
}

std::vector<int> collect_WQ0(const DyadicGrid& grid, const WhitneyDecomposition& w, CubeRef ref, double eta, double K) {
  require(eta > 0.0 && eta < 1.0 && K > 1.0, ErrorCode::kInvalidArgument, "need 0 < eta < 1 < K");
  const DyadicCube& q = grid.cube(ref);
  const double hi = std::sqrt(K) * q.ell;
  const Box2 reach = q.bounds.inflated(hi);
  std::vector<Point> chain;
  if (const Polyline* c = grid.scene->curve()) chain = c->sub_chain(q.s0, q.s1);
  auto dist_jq = [&](const Box2& b) {
    if (chain.empty()) return grid.distance_to(q, b);
    double best = kInf;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) best = std::min(best, segment_box_distance(chain[i], chain[i + 1], b));
    return best;
  };
  std::vector<int> out;
  for (int level = w.min_level(); level <= w.max_level(); ++level) {
    const double side = std::ldexp(1.0, -level);
    if (side > hi) continue;
    if (side < std::pow(eta, 0.25) * q.ell) break;
    for (int id : w.cells_meeting(level, reach)) {
      const WhitneyCell& c = w.cell(id);
      if (box_box_distance(c.box, q.bounds) > hi) continue;
      // x_Q lies in Q, so a cell within K^{1/2}ℓ of x_Q needs no exact distance.
      const double d = point_box_distance(q.center, c.box) <= hi ? point_box_distance(q.center, c.box) : dist_jq(c.box);
      if (wq0_admits(c.side, d, q.ell, eta, K)) out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty())
    throw Error(ErrorCode::kEmptyRegion, "W_Q^0 is empty for cube (" + std::to_string(ref.k) + "," + std::to_string(ref.id) +
                                             "); eta too large or K too small for this scene");
  return out;
}

bool WhitneyRegion::contains(const WhitneyDecomposition& w, const Point& y) const {
  require(!cells.empty(), ErrorCode::kPrecondition, "region cell list was dropped");
  for (int id : cells) {
    const Box2 b = w.cell(id).dilated(tau);
    if (y.x > b.x0 && y.x < b.x1 && y.y > b.y0 && y.y < b.y1) return true;
  }
  return false;
}

WhitneyRegion build_UQ(const DyadicGrid& grid, const WhitneyDecomposition& w, CubeRef ref, std::vector<int> wq0, double tau,
                       int s_max) {
  require(tau > 0.0 && tau <= kTau0 / 2.0, ErrorCode::kOutOfRange, "tau must lie in (0, tau0/2]");
  require(s_max >= 1, ErrorCode::kInvalidArgument, "need at least one sample per component");
  require(!wq0.empty(), ErrorCode::kEmptyRegion, "empty W_Q^0");
  std::sort(wq0.begin(), wq0.end());
  WhitneyRegion r;
  r.q = ref;
  r.tau = tau;
  r.n_cells = wq0.size();

  thread_local std::vector<int> local_of;
  if (local_of.size() < w.size()) local_of.assign(w.size(), -1);
  for (int i = 0; i < static_cast<int>(wq0.size()); ++i) local_of[wq0[i]] = i;
  UnionFind uf(wq0.size());
  for (int i = 0; i < static_cast<int>(wq0.size()); ++i)
    for (int nb : w.cell(wq0[i]).neighbors)
      if (local_of[nb] >= 0) uf.unite(i, local_of[nb]);
  for (int id : wq0) local_of[id] = -1;

  std::vector<int> root_slot(wq0.size(), -1);
  std::vector<Component> comps;
  for (int i = 0; i < static_cast<int>(wq0.size()); ++i) {
    const int root = uf.find(i);
    if (root_slot[root] < 0) {
      root_slot[root] = static_cast<int>(comps.size());
      comps.emplace_back();
      comps.back().bounds = Box2::empty();
    }
    comps[root_slot[root]].cells.push_back(wq0[i]);
  }
  const Point xq = grid.cube(ref).center;
  for (Component& c : comps) {
    Point m{};
    for (int id : c.cells) {
      const WhitneyCell& cell = w.cell(id);
      const double a = cell.side * cell.side;
      c.area += a;
      m = m + a * cell.box.center();
      c.bounds.expand({cell.box.x0, cell.box.y0, 0.0});
      c.bounds.expand({cell.box.x1, cell.box.y1, 0.0});
    }
    c.centroid = (1.0 / c.area) * m;
    c.interior = std::all_of(c.cells.begin(), c.cells.end(), [&](int id) { return w.cell(id).in_domain; });
    c.n_cells = c.cells.size();
    struct Rank {
      double side, dist;
      int id;
      bool operator<(const Rank& o) const {
        if (side != o.side) return side > o.side;
        if (dist != o.dist) return dist < o.dist;
        return id < o.id;
      }
    };
    std::vector<Rank> ranks;
    ranks.reserve(c.cells.size());
    for (int id : c.cells) ranks.push_back({w.cell(id).side, dist(w.cell(id).box.center(), xq), id});
    const std::size_t keep = std::min<std::size_t>(ranks.size(), static_cast<std::size_t>(s_max));
    std::partial_sort(ranks.begin(), ranks.begin() + keep, ranks.end());
    std::vector<int> order;
    for (std::size_t i = 0; i < keep; ++i) order.push_back(ranks[i].id);
    c.samples = std::move(order);
  }
  std::sort(comps.begin(), comps.end(), [&](const Component& a, const Component& b) {
    const Box2 &ba = w.cell(a.cells.front()).box, &bb = w.cell(b.cells.front()).box;
    if (ba.x0 != bb.x0) return ba.x0 < bb.x0;
    return ba.y0 < bb.y0;
  });
  r.components = std::move(comps);
  r.cells = std::move(wq0);
  return r;
}

double packing_bound(double eta, double K) {
  const double rad = 1.0 + (1.0 + std::sqrt(2.0)) * std::sqrt(K);
  return kPi * rad * rad / std::sqrt(eta);
}

std::size_t Catalog::max_components() const {
  std::size_t m = 0;
  for (const auto& gen : regions)
    for (const WhitneyRegion& r : gen) m = std::max(m, r.components.size());
  return m;
}

std::size_t Catalog::max_cells() const {
  std::size_t m = 0;
  for (const auto& gen : regions)
    for (const WhitneyRegion& r : gen) m = std::max(m, r.n_cells);
  return m;
}

Catalog build_catalog(const DyadicGrid& grid, const WhitneyDecomposition& w, const RegionParams& p, bool keep_cells) {
  Catalog cat;
  cat.grid = &grid;
  cat.whitney = &w;
  cat.params = p;
  cat.regions.resize(grid.generations.size());
  std::vector<CubeRef> refs;
  for (int k = grid.k_min; k <= grid.k_max; ++k) {
    cat.regions[k - grid.k_min].resize(grid.generation(k).size());
    for (int id = 0; id < static_cast<int>(grid.generation(k).size()); ++id) refs.push_back({k, id});
  }
  std::vector<std::exception_ptr> errors(refs.size());
  parallel_for(refs.size(), [&](std::size_t i) {
    try {
      const CubeRef q = refs[i];
      WhitneyRegion r = build_UQ(grid, w, q, collect_WQ0(grid, w, q, p.eta, p.K), p.tau, p.s_max);
      r.eta = p.eta;
      r.K = p.K;
      if (!keep_cells) {
        r.cells = {};
        for (Component& c : r.components) c.cells = {};
      }
      cat.regions[q.k - grid.k_min][q.id] = std::move(r);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return cat;
}

std::string to_string(SubcatalogStrategy s) {
  switch (s) {
    case SubcatalogStrategy::kInteriorFirst: return "interior-first";
    case SubcatalogStrategy::kLowestIndex: return "lowest-index";
    case SubcatalogStrategy::kAdversarialRandom: return "adversarial-random";
  }
  return "unknown";
}

SubcatalogStrategy subcatalog_strategy_from_string(const std::string& name) {
  for (auto s : {SubcatalogStrategy::kInteriorFirst, SubcatalogStrategy::kLowestIndex, SubcatalogStrategy::kAdversarialRandom})
    if (to_string(s) == name) return s;
  throw Error(ErrorCode::kInvalidArgument, "unknown subcatalog strategy '" + name + "'");
}

Subcatalog select_subcatalog(const Catalog& cat, SubcatalogStrategy strategy, std::uint64_t seed) {
  Subcatalog sub;
  sub.strategy = strategy;
  sub.seed = seed;
  sub.choice.resize(cat.regions.size());
  for (std::size_t g = 0; g < cat.regions.size(); ++g) {
    for (const WhitneyRegion& r : cat.regions[g]) {
      const int n = static_cast<int>(r.components.size());
      require(n > 0, ErrorCode::kEmptyRegion, "region without components");
      int pick = 0;
      switch (strategy) {
        case SubcatalogStrategy::kInteriorFirst: {
          pick = -1;
          for (int i = 0; i < n && pick < 0; ++i)
            if (r.components[i].interior) pick = i;
          if (pick < 0)
            throw Error(ErrorCode::kEmptyRegion, "no component of U_Q lies in the domain for cube (" + std::to_string(r.q.k) +
                                                     "," + std::to_string(r.q.id) + ")");
          break;
        }
        case SubcatalogStrategy::kLowestIndex: pick = 0; break;
        case SubcatalogStrategy::kAdversarialRandom: {
          CounterRng rng(hash_key(seed, static_cast<std::uint64_t>(r.q.k), static_cast<std::uint64_t>(r.q.id)));
          pick = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n));
          break;
        }
      }
      sub.choice[g].push_back(pick);
    }
  }
  return sub;
}

void write_regions_csv(const Catalog& cat, const Subcatalog& sub, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  require(f != nullptr, ErrorCode::kIo, "cannot write " + path);
  std::fprintf(f, "q_k,q_id,cell_id,component,chosen\n");
  for (std::size_t g = 0; g < cat.regions.size(); ++g) {
    for (const WhitneyRegion& r : cat.regions[g]) {
      const int chosen = sub.choice[g][r.q.id];
      for (std::size_t i = 0; i < r.components.size(); ++i) {
        const Component& c = r.components[i];
        const std::vector<int>& ids = c.cells.empty() ? c.samples : c.cells;
        for (int id : ids) std::fprintf(f, "%d,%d,%d,%zu,%d\n", r.q.k, r.q.id, id, i, chosen);
      }
    }
  }
  std::fclose(f);
}

}  // namespace fatou
