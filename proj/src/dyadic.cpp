#include "fatou/dyadic.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fatou {

namespace {

/// Distance to the level-L Cantor squares whose node ranges lie in
/// [keep_begin, keep_end) and outside [skip_begin, skip_end); `metric` is the
/// distance from the probed object to a square.
template <typename Metric>
struct CantorProbe {
  int level;
  Metric metric;
  int keep_begin, keep_end;
  int skip_begin = 0, skip_end = 0;
  double best = kInf;

  void run(const Box2& sq, int depth, int index) {
    const int span = 4 << (2 * (level - depth));
    const int b = index * span, e = b + span;
    if (e <= keep_begin || b >= keep_end) return;
    if (b >= skip_begin && e <= skip_end) return;
    const double d = metric(sq);
    if (d >= best) return;
    if (depth == level) {
      best = d;
      return;
    }
    const double s = sq.width() / 4.0;
    const Box2 kids[4] = {{sq.x0, sq.y0, sq.x0 + s, sq.y0 + s},
                          {sq.x1 - s, sq.y0, sq.x1, sq.y0 + s},
                          {sq.x0, sq.y1 - s, sq.x0 + s, sq.y1},
                          {sq.x1 - s, sq.y1 - s, sq.x1, sq.y1}};
    for (int c = 0; c < 4; ++c) run(kids[c], depth + 1, index * 4 + c);
  }
};

template <typename Metric>
double cantor_probe(int level, Metric metric, int keep_begin, int keep_end, int skip_begin = 0, int skip_end = 0) {
  CantorProbe<Metric> probe{level, metric, keep_begin, keep_end, skip_begin, skip_end};
  probe.run({0.0, 0.0, 1.0, 1.0}, 0, 0);
  return probe.best;
}

double chain_distance(const std::vector<Point>& pts, const Point& x) {
  double best = kInf;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) best = std::min(best, point_segment_distance(x, pts[i], pts[i + 1]));
  if (pts.size() == 1) best = dist(x, pts[0]);
  return best;
}

Box2 bbox(const std::vector<Point>& pts) {
  Box2 b = Box2::empty();
  for (const Point& p : pts) b.expand(p);
  return b;
}

int first_generation(const Scene& scene, int k_min) {
  const double d = scene.diameter();
  if (!std::isfinite(d)) return k_min;
  int k = k_min;
  while (std::ldexp(1.0, -k) >= d / 2.0) ++k;
  return k;
}

void build_curve(DyadicGrid& g, const Polyline& chain) {
  const double len = chain.length();
  const int m = static_cast<int>(std::ceil(len * std::ldexp(1.0, g.k_min) - 1e-9));
  const long leaves = static_cast<long>(m) << g.depth();
  const long count = 4 * leaves;
  const double unit = len / static_cast<double>(count);
  g.nodes.resize(count);
  for (long i = 0; i < count; ++i) {
    SampleNode& n = g.nodes[i];
    n.s0 = unit * static_cast<double>(i);
    n.s1 = i + 1 == count ? len : unit * static_cast<double>(i + 1);
    n.weight = n.s1 - n.s0;
    n.p = chain.at(0.5 * (n.s0 + n.s1));
    n.box = bbox(chain.sub_chain(n.s0, n.s1));
  }
  for (int k = g.k_min; k <= g.k_max; ++k) {
    const long n_cubes = static_cast<long>(m) << (k - g.k_min);
    const long per = count / n_cubes;
    auto& gen = g.generations[k - g.k_min];
    gen.resize(n_cubes);
    for (long i = 0; i < n_cubes; ++i) {
      DyadicCube& q = gen[i];
      q.k = k;
      q.id = static_cast<int>(i);
      q.ell = std::ldexp(1.0, -k);
      q.node_begin = static_cast<int>(i * per);
      q.node_end = static_cast<int>((i + 1) * per);
      q.s0 = g.nodes[q.node_begin].s0;
      q.s1 = g.nodes[q.node_end - 1].s1;
      q.sigma = q.s1 - q.s0;
      q.center = chain.at(0.5 * (q.s0 + q.s1));
      q.bounds = bbox(chain.sub_chain(q.s0, q.s1));
      q.parent = k == g.k_min ? -1 : static_cast<int>(i / 2);
      q.child_begin = static_cast<int>(2 * i);
      q.child_end = k == g.k_max ? q.child_begin : q.child_begin + 2;
    }
  }
}

int cantor_level_of(int k) { return k / 2 + 1; }

void build_cantor(DyadicGrid& g, const CantorSet& cantor) {
  const int L = cantor.level();
  require(g.k_max <= 2 * L - 1, ErrorCode::kDepthCap,
          "Cantor grids reach at most generation " + std::to_string(2 * L - 1) + " at level " + std::to_string(L));
  const std::vector<Box2> squares = cantor.pieces(L);
  const double mass = std::ldexp(1.0, -2 * L) / 4.0;
  g.nodes.reserve(4 * squares.size());
  for (const Box2& sq : squares) {
    const Point c = sq.center();
    const Box2 quads[4] = {{sq.x0, sq.y0, c.x, c.y}, {c.x, sq.y0, sq.x1, c.y}, {sq.x0, c.y, c.x, sq.y1}, {c.x, c.y, sq.x1, sq.y1}};
    for (const Box2& b : quads) g.nodes.push_back({b.center(), mass, 0.0, 0.0, b});
  }
  for (int k = g.k_min; k <= g.k_max; ++k) {
    const int j = cantor_level_of(k);
    const std::vector<Box2> pieces = cantor.pieces(j);
    const int per = static_cast<int>(g.nodes.size() / pieces.size());
    auto& gen = g.generations[k - g.k_min];
    gen.resize(pieces.size());
    for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
      DyadicCube& q = gen[i];
      q.k = k;
      q.id = i;
      q.ell = std::ldexp(1.0, -k);
      q.node_begin = i * per;
      q.node_end = (i + 1) * per;
      q.sigma = std::ldexp(1.0, -2 * j);
      q.bounds = pieces[i];
      const Point mid = pieces[i].center();
      int best = q.node_begin;
      for (int n = q.node_begin; n < q.node_end; ++n) {
        if (dist(g.nodes[n].p, mid) < dist(g.nodes[best].p, mid)) best = n;
      }
      q.center = g.nodes[best].p;
      if (k == g.k_min) {
        q.parent = -1;
      } else {
        q.parent = cantor_level_of(k - 1) == j ? i : i / 4;
      }
      if (k == g.k_max) {
        q.child_begin = q.child_end = i;
      } else if (cantor_level_of(k + 1) == j) {
        q.child_begin = i;
        q.child_end = i + 1;
      } else {
        q.child_begin = 4 * i;
        q.child_end = 4 * i + 4;
      }
    }
  }
}

double outer_radius(const DyadicGrid& g, const DyadicCube& q) {
  if (const Polyline* c = g.scene->curve()) {
    double r = 0.0;
    for (const Point& v : c->sub_chain(q.s0, q.s1)) r = std::max(r, dist(v, q.center));
    return r;
  }
  return point_box_max_distance(q.center, q.bounds);
}

double cube_diameter(const DyadicGrid& g, const DyadicCube& q) {
  if (const Polyline* c = g.scene->curve()) return point_set_diameter(c->sub_chain(q.s0, q.s1));
  return q.bounds.diameter();
}

std::string tag(int k, int id) { return "(" + std::to_string(k) + "," + std::to_string(id) + ")"; }

}  // namespace

const std::vector<DyadicCube>& DyadicGrid::generation(int k) const {
  require(k >= k_min && k <= k_max, ErrorCode::kOutOfRange, "generation " + std::to_string(k) + " is not in the grid");
  return generations[k - k_min];
}

std::size_t DyadicGrid::cube_count() const {
  std::size_t n = 0;
  for (const auto& g : generations) n += g.size();
  return n;
}

double DyadicGrid::total_sigma() const {
  double s = 0.0;
  for (const SampleNode& n : nodes) s += n.weight;
  return s;
}

int DyadicGrid::node_of(const Point& p) const {
  const double tol = 1e-9 * std::max(1.0, norm(p));
  if (const Polyline* c = scene->curve()) {
    const double s = c->parameter_of(p);
    if (dist(c->at(s), p) > tol) return -1;
    const double unit = c->length() / static_cast<double>(nodes.size());
    const long i = static_cast<long>(s / unit);
    return static_cast<int>(std::clamp<long>(i, 0, static_cast<long>(nodes.size()) - 1));
  }
  const CantorSet* cantor = scene->cantor();
  require(cantor != nullptr, ErrorCode::kUnsupported, "grid scene has no node lookup");
  if (cantor->distance(p) > tol) return -1;
  Box2 sq{0.0, 0.0, 1.0, 1.0};
  int index = 0;
  for (int d = 0; d < cantor->level(); ++d) {
    const double s = sq.width() / 4.0;
    const Box2 kids[4] = {{sq.x0, sq.y0, sq.x0 + s, sq.y0 + s},
                          {sq.x1 - s, sq.y0, sq.x1, sq.y0 + s},
                          {sq.x0, sq.y1 - s, sq.x0 + s, sq.y1},
                          {sq.x1 - s, sq.y1 - s, sq.x1, sq.y1}};
    int best = 0;
    for (int c = 1; c < 4; ++c) {
      if (point_box_distance(p, kids[c]) < point_box_distance(p, kids[best])) best = c;
    }
    sq = kids[best];
    index = index * 4 + best;
  }
  const Point c = sq.center();
  return index * 4 + (p.y >= c.y ? 2 : 0) + (p.x >= c.x ? 1 : 0);
}

int DyadicGrid::cube_of(int k, int node) const {
  const auto& gen = generation(k);
  require(node >= 0 && node < static_cast<int>(nodes.size()), ErrorCode::kOutOfRange, "node index out of range");
  const int per = static_cast<int>(nodes.size() / gen.size());
  return node / per;
}

int DyadicGrid::ancestor(int k, int id, int k_anc) const {
  require(k_anc <= k && k_anc >= k_min, ErrorCode::kOutOfRange, "ancestor generation out of range");
  while (k > k_anc) {
    id = cube(k, id).parent;
    --k;
  }
  return id;
}

double DyadicGrid::distance_to(const DyadicCube& q, const Point& x) const {
  if (const Polyline* c = scene->curve()) return chain_distance(c->sub_chain(q.s0, q.s1), x);
  const CantorSet* cantor = scene->cantor();
  require(cantor != nullptr, ErrorCode::kUnsupported, "unsupported grid scene");
  return cantor_probe(cantor->level(), [&](const Box2& sq) { return point_box_distance(x, sq); }, q.node_begin, q.node_end);
}

double DyadicGrid::distance_to(const DyadicCube& q, const Box2& box) const {
  if (const Polyline* c = scene->curve()) {
    const std::vector<Point> pts = c->sub_chain(q.s0, q.s1);
    double best = kInf;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) best = std::min(best, segment_box_distance(pts[i], pts[i + 1], box));
    return best;
  }
  const CantorSet* cantor = scene->cantor();
  require(cantor != nullptr, ErrorCode::kUnsupported, "unsupported grid scene");
  return cantor_probe(cantor->level(), [&](const Box2& sq) { return box_box_distance(box, sq); }, q.node_begin, q.node_end);
}

DyadicGrid build_grid(const ScenePtr& scene, int k_min, int k_max, std::uint64_t seed, GridOptions opts) {
  require(scene != nullptr, ErrorCode::kInvalidArgument, "grid needs a scene");
  require(scene->ambient_dim() == 2, ErrorCode::kUnsupported, "dyadic grids are built on planar scenes");
  require(k_min >= 0 && k_max >= k_min, ErrorCode::kInvalidArgument, "need 0 <= k_min <= k_max");
  DyadicGrid g;
  g.scene = scene;
  g.seed = seed;
  g.k_min = first_generation(*scene, k_min);
  g.k_max = k_max;
  require(g.k_max >= g.k_min, ErrorCode::kInsufficientDepth, "no generation finer than diam(E)/2 was requested");
  require(g.depth() <= opts.depth_cap, ErrorCode::kDepthCap,
          "grid depth " + std::to_string(g.depth()) + " exceeds the cap " + std::to_string(opts.depth_cap));
  g.generations.resize(g.depth() + 1);
  if (const Polyline* c = scene->curve()) {
    build_curve(g, *c);
  } else if (const CantorSet* cs = scene->cantor()) {
    build_cantor(g, *cs);
  } else {
    throw Error(ErrorCode::kDegenerateScene, "scene " + to_string(scene->kind()) + " has no boundary sample generator");
  }
  return g;
}

double inner_radius(const DyadicGrid& g, const DyadicCube& q) {
  double rest = kInf;
  if (const Polyline* c = g.scene->curve()) {
    if (q.s0 > 0.0) rest = std::min(rest, chain_distance(c->sub_chain(0.0, q.s0), q.center));
    if (q.s1 < c->length()) rest = std::min(rest, chain_distance(c->sub_chain(q.s1, c->length()), q.center));
  } else {
    rest = cantor_probe(g.scene->cantor()->level(), [&](const Box2& sq) { return point_box_distance(q.center, sq); }, 0,
                        static_cast<int>(g.nodes.size()), q.node_begin, q.node_end);
  }
  return std::min(rest, outer_radius(g, q));
}

AxiomReport verify_grid_axioms(const DyadicGrid& g) {
  AxiomReport rep;
  const int n_nodes = static_cast<int>(g.nodes.size());
  double exact_total = g.total_sigma();
  if (const Polyline* c = g.scene->curve()) exact_total = c->length();
  if (g.scene->cantor() != nullptr) exact_total = 1.0;
  if (std::abs(g.total_sigma() - exact_total) > 1e-9 * exact_total) {
    rep.covering = false;
    rep.witnesses.push_back("node weights do not add up to sigma(E ∩ extent)");
  }
  for (int k = g.k_min; k <= g.k_max; ++k) {
    const auto& gen = g.generation(k);
    int cursor = 0;
    double mass = 0.0;
    for (const DyadicCube& q : gen) {
      if (q.node_begin < cursor) {
        rep.disjoint = false;
        rep.witnesses.push_back("cube " + tag(k, q.id) + " overlaps its predecessor");
      } else if (q.node_begin > cursor) {
        rep.covering = false;
        rep.witnesses.push_back("gap before cube " + tag(k, q.id));
      }
      cursor = std::max(cursor, q.node_end);
      mass += q.sigma;
    }
    if (cursor != n_nodes) {
      rep.covering = false;
      rep.witnesses.push_back("generation " + std::to_string(k) + " does not reach the last node");
    }
    if (std::abs(mass - exact_total) > 1e-6 * exact_total) {
      rep.covering = false;
      rep.witnesses.push_back("generation " + std::to_string(k) + " mass mismatch");
    }
    for (const DyadicCube& q : gen) {
      if (k > g.k_min) {
        const auto& up = g.generation(k - 1);
        const bool ok = q.parent >= 0 && q.parent < static_cast<int>(up.size()) && up[q.parent].node_begin <= q.node_begin &&
                        up[q.parent].node_end >= q.node_end && up[q.parent].child_begin <= q.id && q.id < up[q.parent].child_end;
        if (!ok) {
          rep.nesting = false;
          rep.witnesses.push_back("child " + tag(k, q.id) + " not inside parent " + tag(k - 1, q.parent));
        }
      }
      const double ratio = cube_diameter(g, q) / q.ell;
      rep.max_diam_ratio = std::max(rep.max_diam_ratio, ratio);
      if (ratio > 1.0 + 1e-12) {
        rep.diameter = false;
        rep.witnesses.push_back("cube " + tag(k, q.id) + " has diameter ratio " + std::to_string(ratio));
      }
      const double r = inner_radius(g, q);
      rep.a0 = std::min(rep.a0, r / q.ell);
      rep.c1 = std::max(rep.c1, outer_radius(g, q) / q.ell);
      if (!(r > 0.0)) {
        rep.inner_ball = false;
        rep.witnesses.push_back("cube " + tag(k, q.id) + " contains no surface ball around its center");
      }
    }
  }
  return rep;
}

Dilate::Dilate(const DyadicGrid& grid, CubeRef q, double lambda) : grid_(&grid), q_(q), lambda_(lambda) {
  require(lambda > 1.0, ErrorCode::kInvalidArgument, "dilation factor must exceed 1");
  const DyadicCube& cube = grid.cube(q);
  reach_ = (lambda - 1.0) * cube.ell;
  for (int n = 0; n < static_cast<int>(grid.nodes.size()); ++n) {
    if (cube.owns(n) || contains(grid.nodes[n].p)) {
      nodes_.push_back(n);
      sigma_ += grid.nodes[n].weight;
    }
  }
}

bool Dilate::contains(const Point& x) const {
  const DyadicCube& cube = grid_->cube(q_);
  if (point_box_distance(x, cube.bounds) > reach_) return false;
  return grid_->distance_to(cube, x) <= reach_;
}

Dilate dilate(const DyadicGrid& grid, CubeRef q, double lambda) { return Dilate(grid, q, lambda); }

std::vector<CubeRecord> grid_records(const DyadicGrid& grid) {
  std::vector<CubeRecord> out;
  for (const auto& gen : grid.generations)
    for (const DyadicCube& q : gen) out.push_back({q.k, q.id, q.parent, q.center.x, q.center.y, q.ell, q.sigma});
  return out;
}

void write_grid_csv(const DyadicGrid& grid, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  require(f != nullptr, ErrorCode::kIo, "cannot write " + path);
  std::fprintf(f, "k,id,parent_id,cx,cy,ell,sigma\n");
  for (const CubeRecord& r : grid_records(grid))
    std::fprintf(f, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g\n", r.k, r.id, r.parent_id, r.cx, r.cy, r.ell, r.sigma);
  std::fclose(f);
}

std::vector<CubeRecord> read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path);
  std::string line;
  std::getline(in, line);
  require(line == "k,id,parent_id,cx,cy,ell,sigma", ErrorCode::kIo, "unexpected grid CSV header");
  std::vector<CubeRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[7];
    for (auto& s : f) std::getline(ss, s, ',');
    try {
      out.push_back({std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                     std::stod(f[6])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kIo, "malformed grid CSV line: " + line);
    }
  }
  return out;
}

}  // namespace fatou
