#include "fatou/scene.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include "fatou/rng.hpp"

namespace fatou {

namespace {
constexpr double kRayLength = 1e6;
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kHyperplane: return "hyperplane";
    case SceneKind::kLipschitzGraph: return "lipschitz_graph";
    case SceneKind::kKochCurve: return "koch_curve";
    case SceneKind::kFourCornerCantor: return "four_corner_cantor";
    case SceneKind::kPolyline: return "polyline";
    case SceneKind::kSphere: return "sphere";
  }
  return "unknown";
}

SceneKind scene_kind_from_string(const std::string& name) {
  for (SceneKind k : {SceneKind::kHyperplane, SceneKind::kLipschitzGraph, SceneKind::kKochCurve,
                      SceneKind::kFourCornerCantor, SceneKind::kPolyline, SceneKind::kSphere}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown scene kind '" + name + "'");
}

double Scene::box_distance(const Box2&) const {
  throw Error(ErrorCode::kUnsupported, "box distance is only defined for planar scenes");
}

double Scene::surface_measure(const Point& x, double r) const {
  require(r > 0.0, ErrorCode::kNonPositiveRadius, "surface ball radius must be positive");
  const double tol = on_boundary_tolerance() * std::max(1.0, norm(x));
  require(distance(x) <= tol, ErrorCode::kPointOffBoundary, "surface ball center is not on the boundary");
  require(r < diameter(), ErrorCode::kInvalidArgument, "surface ball radius must be below diam(E)");
  return measure_raw(x, r);
}

nlohmann::json Scene::to_json() const {
  nlohmann::json j;
  j["schema"] = 1;
  j["kind"] = to_string(kind_);
  j["ambient_dim"] = ambient_dim_;
  j["params"] = params_;
  j["ur_label"] = ur_label_;
  j["extent"] = {extent_.x0, extent_.y0, extent_.x1, extent_.y1};
  return j;
}

// ---------------------------------------------------------------- Polyline

Polyline::Polyline(std::vector<Point> vertices, Options opts)
    : Scene(opts.kind, 2, Box2::empty(), opts.ur_label, 1e-6, opts.params), vertices_(std::move(vertices)), opts_(opts) {
  require(vertices_.size() >= 2, ErrorCode::kDegenerateScene, "polyline needs at least two vertices");
  std::vector<Seg> chain;
  for (std::size_t i = 0; i + 1 < vertices_.size(); ++i) chain.push_back({vertices_[i], vertices_[i + 1]});
  if (opts_.closed) chain.push_back({vertices_.back(), vertices_.front()});
  cumulative_.assign(1, 0.0);
  for (const Seg& s : chain) cumulative_.push_back(cumulative_.back() + dist(s.a, s.b));
  require(length() > 0.0, ErrorCode::kDegenerateScene, "polyline has zero length");

  Box2 ext = Box2::empty();
  for (const Point& v : vertices_) ext.expand(v);
  set_extent(ext);

  segs_ = chain;
  seg_index_.resize(chain.size());
  std::iota(seg_index_.begin(), seg_index_.end(), 0);
  build(0, static_cast<int>(segs_.size()));

  if (opts_.rays) {
    ray_lo_ = {vertices_.front(), vertices_.front() + Point{-kRayLength, 0.0, 0.0}};
    ray_hi_ = {vertices_.back(), vertices_.back() + Point{kRayLength, 0.0, 0.0}};
  }
}

int Polyline::build(int begin, int end) {
  Node node;
  node.box = Box2::empty();
  for (int i = begin; i < end; ++i) {
    node.box.expand(segs_[i].a);
    node.box.expand(segs_[i].b);
  }
  node.begin = begin;
  node.end = end;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin > 4) {
    const bool split_x = node.box.width() >= node.box.height();
    const int mid = (begin + end) / 2;
    std::vector<int> order(end - begin);
    std::iota(order.begin(), order.end(), begin);
    auto key = [&](int i) {
      const Point c = 0.5 * (segs_[i].a + segs_[i].b);
      return split_x ? c.x : c.y;
    };
    std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(),
                     [&](int a, int b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
    std::vector<Seg> segs(end - begin);
    std::vector<int> idx(end - begin);
    for (int i = 0; i < end - begin; ++i) {
      segs[i] = segs_[order[i]];
      idx[i] = seg_index_[order[i]];
    }
    std::copy(segs.begin(), segs.end(), segs_.begin() + begin);
    std::copy(idx.begin(), idx.end(), seg_index_.begin() + begin);
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
  }
  return id;
}

template <typename Visit, typename Bound>
void Polyline::traverse(Bound&& bound, double& best, Visit&& visit) const {
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (bound(n.box) >= best) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) visit(i);
    } else {
      const double bl = bound(nodes_[n.left].box), br = bound(nodes_[n.right].box);
      if (bl < br) {
        stack[top++] = n.right;
        stack[top++] = n.left;
      } else {
        stack[top++] = n.left;
        stack[top++] = n.right;
      }
    }
  }
}

double Polyline::distance(const Point& p) const {
  double best = kInf;
  traverse([&](const Box2& b) { return point_box_distance(p, b); }, best,
           [&](int i) { best = std::min(best, point_segment_distance(p, segs_[i].a, segs_[i].b)); });
  if (opts_.rays) {
    best = std::min(best, point_segment_distance(p, ray_lo_.a, ray_lo_.b));
    best = std::min(best, point_segment_distance(p, ray_hi_.a, ray_hi_.b));
  }
  return best;
}

Point Polyline::nearest(const Point& p) const {
  double best = kInf;
  Point q{};
  auto consider = [&](const Seg& s) {
    const Point c = segment_nearest(p, s.a, s.b);
    const double d = dist(p, c);
    if (d < best) {
      best = d;
      q = c;
    }
  };
  traverse([&](const Box2& b) { return point_box_distance(p, b); }, best, [&](int i) { consider(segs_[i]); });
  if (opts_.rays) {
    consider(ray_lo_);
    consider(ray_hi_);
  }
  return q;
}

double Polyline::box_distance(const Box2& box) const {
  double best = kInf;
  traverse([&](const Box2& b) { return box_box_distance(box, b); }, best,
           [&](int i) { best = std::min(best, segment_box_distance(segs_[i].a, segs_[i].b, box)); });
  if (opts_.rays) {
    best = std::min(best, segment_box_distance(ray_lo_.a, ray_lo_.b, box));
    best = std::min(best, segment_box_distance(ray_hi_.a, ray_hi_.b, box));
  }
  return best;
}

double Polyline::measure_raw(const Point& x, double r) const {
  double total = 0.0;
  double bound = r;
  traverse([&](const Box2& b) { return point_box_distance(x, b); }, bound,
           [&](int i) { total += segment_disk_length(segs_[i].a, segs_[i].b, x, r); });
  if (opts_.rays) {
    total += segment_disk_length(ray_lo_.a, ray_lo_.b, x, r);
    total += segment_disk_length(ray_hi_.a, ray_hi_.b, x, r);
  }
  return total;
}

double Polyline::diameter() const {
  if (opts_.rays) return kInf;
  return point_set_diameter(vertices_);
}

bool Polyline::in_domain(const Point& p) const {
  if (distance(p) == 0.0) return false;
  switch (opts_.side) {
    case Side::kAbove: return p.y > graph_height(p.x);
    case Side::kInside: {
      bool inside = false;
      const std::size_t n = vertices_.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = vertices_[i], b = vertices_[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
      }
      return inside;
    }
    case Side::kComplement: return true;
  }
  return false;
}

Point Polyline::at(double s) const {
  s = std::clamp(s, 0.0, length());
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0));
  const std::size_t nseg = cumulative_.size() - 1;
  if (i >= nseg) i = nseg - 1;
  const Point a = vertices_[i];
  const Point b = vertices_[(i + 1) % vertices_.size()];
  const double len = cumulative_[i + 1] - cumulative_[i];
  const double t = len > 0.0 ? (s - cumulative_[i]) / len : 0.0;
  return a + std::clamp(t, 0.0, 1.0) * (b - a);
}

double Polyline::parameter_of(const Point& p) const {
  double best = kInf;
  double param = 0.0;
  traverse([&](const Box2& b) { return point_box_distance(p, b); }, best, [&](int i) {
    const Seg& s = segs_[i];
    const Point c = segment_nearest(p, s.a, s.b);
    const double d = dist(p, c);
    if (d < best) {
      best = d;
      const int k = seg_index_[i];
      param = cumulative_[k] + dist(s.a, c);
    }
  });
  return param;
}

std::vector<Point> Polyline::sub_chain(double s0, double s1) const {
  std::vector<Point> out{at(s0)};
  for (std::size_t i = 1; i + 1 < cumulative_.size(); ++i) {
    if (cumulative_[i] > s0 && cumulative_[i] < s1) out.push_back(vertices_[i]);
  }
  out.push_back(at(s1));
  return out;
}

double Polyline::graph_height(double x) const {
  if (x <= vertices_.front().x) return vertices_.front().y;
  if (x >= vertices_.back().x) return vertices_.back().y;
  const auto it = std::upper_bound(vertices_.begin(), vertices_.end(), x, [](double v, const Point& p) { return v < p.x; });
  const Point b = *it, a = *(it - 1);
  return a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);
}

// ---------------------------------------------------------------- Cantor

CantorSet::CantorSet(int level, nlohmann::json params)
    : Scene(SceneKind::kFourCornerCantor, 2, Box2{0.0, 0.0, 1.0, 1.0}, false, 1e-6, std::move(params)), level_(level) {
  require(level >= 1 && level <= 10, ErrorCode::kInvalidArgument, "cantor level must be in [1, 10]");
}

template <typename F>
void CantorSet::descend(const Box2& sq, int depth, F&& f) const {
  // f(square, depth) returns true to continue into the children.
  if (!f(sq, depth) || depth == level_) return;
  const double s = sq.width() / 4.0;
  const Box2 kids[4] = {{sq.x0, sq.y0, sq.x0 + s, sq.y0 + s},
                        {sq.x1 - s, sq.y0, sq.x1, sq.y0 + s},
                        {sq.x0, sq.y1 - s, sq.x0 + s, sq.y1},
                        {sq.x1 - s, sq.y1 - s, sq.x1, sq.y1}};
  for (const Box2& k : kids) descend(k, depth + 1, f);
}

namespace {

/// Branch and bound over the Cantor tree, nearest child first.
void cantor_nearest(const Box2& sq, int depth, int level, const Point& p, double& best, Point& at) {
  if (depth == level) {
    const double d = point_box_distance(p, sq);
    if (d < best) {
      best = d;
      at = point_box_nearest(p, sq);
    }
    return;
  }
  const double s = sq.width() / 4.0;
  const Box2 kids[4] = {{sq.x0, sq.y0, sq.x0 + s, sq.y0 + s},
                        {sq.x1 - s, sq.y0, sq.x1, sq.y0 + s},
                        {sq.x0, sq.y1 - s, sq.x0 + s, sq.y1},
                        {sq.x1 - s, sq.y1 - s, sq.x1, sq.y1}};
  std::array<std::pair<double, int>, 4> order;
  for (int i = 0; i < 4; ++i) order[i] = {point_box_distance(p, kids[i]), i};
  std::sort(order.begin(), order.end());
  for (const auto& [d, i] : order) {
    if (d >= best) break;
    cantor_nearest(kids[i], depth + 1, level, p, best, at);
  }
}

}  // namespace

double CantorSet::distance(const Point& p) const {
  double best = kInf;
  Point at{};
  cantor_nearest(extent(), 0, level_, p, best, at);
  return best;
}

Point CantorSet::nearest(const Point& p) const {
  double best = kInf;
  Point at{};
  cantor_nearest(extent(), 0, level_, p, best, at);
  return at;
}

double CantorSet::box_distance(const Box2& box) const {
  double best = kInf;
  auto visit = [&](auto&& self, const Box2& sq, int depth) -> void {
    if (depth == level_) {
      best = std::min(best, box_box_distance(box, sq));
      return;
    }
    const double s = sq.width() / 4.0;
    const Box2 kids[4] = {{sq.x0, sq.y0, sq.x0 + s, sq.y0 + s},
                          {sq.x1 - s, sq.y0, sq.x1, sq.y0 + s},
                          {sq.x0, sq.y1 - s, sq.x0 + s, sq.y1},
                          {sq.x1 - s, sq.y1 - s, sq.x1, sq.y1}};
    std::array<std::pair<double, int>, 4> order;
    for (int i = 0; i < 4; ++i) order[i] = {box_box_distance(box, kids[i]), i};
    std::sort(order.begin(), order.end());
    for (const auto& [d, i] : order) {
      if (d >= best) break;
      self(self, kids[i], depth + 1);
    }
  };
  visit(visit, extent(), 0);
  return best;
}

double CantorSet::measure_raw(const Point& x, double r) const {
  double total = 0.0;
  descend(extent(), 0, [&](const Box2& sq, int depth) {
    if (point_box_distance(x, sq) >= r) return false;
    const double mass = std::ldexp(1.0, -2 * depth);
    if (point_box_max_distance(x, sq) < r) {
      total += mass;
      return false;
    }
    if (depth == level_) {
      total += mass * disk_box_area(x, r, sq) / (sq.width() * sq.height());
      return false;
    }
    return true;
  });
  return total;
}

bool CantorSet::in_domain(const Point& p) const { return distance(p) > 0.0; }

std::vector<Box2> CantorSet::pieces(int k) const {
  std::vector<Box2> out;
  descend(extent(), 0, [&](const Box2& sq, int depth) {
    if (depth == k) {
      out.push_back(sq);
      return false;
    }
    return true;
  });
  return out;
}

// ---------------------------------------------------------------- Hyperplane

namespace {
Polyline::Options extent_chain_options() {
  Polyline::Options o;
  o.kind = SceneKind::kHyperplane;
  o.side = Polyline::Side::kAbove;
  return o;
}
}  // namespace

Hyperplane::Hyperplane(int ambient_dim, nlohmann::json params)
    : Scene(SceneKind::kHyperplane, ambient_dim, Box2{0.0, 0.0, 1.0, 0.0}, true, 1e-6, std::move(params)),
      chain_({Point{0.0, 0.0, 0.0}, Point{1.0, 0.0, 0.0}}, extent_chain_options()) {
  require(ambient_dim == 2 || ambient_dim == 3, ErrorCode::kInvalidArgument, "ambient dimension must be 2 or 3");
}

double Hyperplane::distance(const Point& p) const { return std::abs(ambient_dim() == 2 ? p.y : p.z); }

Point Hyperplane::nearest(const Point& p) const {
  Point q = p;
  (ambient_dim() == 2 ? q.y : q.z) = 0.0;
  return q;
}

double Hyperplane::box_distance(const Box2& box) const {
  require(ambient_dim() == 2, ErrorCode::kUnsupported, "box distance needs a planar scene");
  if (box.y0 <= 0.0 && box.y1 >= 0.0) return 0.0;
  return std::min(std::abs(box.y0), std::abs(box.y1));
}

double Hyperplane::measure_raw(const Point& x, double r) const {
  const double h = distance(x);
  if (h >= r) return 0.0;
  const double rho2 = r * r - h * h;
  return ambient_dim() == 2 ? 2.0 * std::sqrt(rho2) : kPi * rho2;
}

bool Hyperplane::in_domain(const Point& p) const { return (ambient_dim() == 2 ? p.y : p.z) > 0.0; }

// ---------------------------------------------------------------- Sphere

Sphere::Sphere(int ambient_dim, nlohmann::json params)
    : Scene(SceneKind::kSphere, ambient_dim, Box2{-1.0, -1.0, 1.0, 1.0}, true, 1e-6, std::move(params)) {
  require(ambient_dim == 2 || ambient_dim == 3, ErrorCode::kInvalidArgument, "ambient dimension must be 2 or 3");
}

double Sphere::distance(const Point& p) const { return std::abs(norm(p) - 1.0); }

Point Sphere::nearest(const Point& p) const {
  const double n = norm(p);
  if (n == 0.0) return {1.0, 0.0, 0.0};
  return (1.0 / n) * p;
}

double Sphere::box_distance(const Box2& box) const {
  require(ambient_dim() == 2, ErrorCode::kUnsupported, "box distance needs a planar scene");
  const Point o{};
  const double near = point_box_distance(o, box);
  const double far = point_box_max_distance(o, box);
  if (near <= 1.0 && far >= 1.0) return 0.0;
  return far < 1.0 ? 1.0 - far : near - 1.0;
}

double Sphere::measure_raw(const Point& x, double r) const {
  // Surface-ball measure for centers on the sphere.
  (void)x;
  if (ambient_dim() == 2) return r >= 2.0 ? 2.0 * kPi : 4.0 * std::asin(r / 2.0);
  return r >= 2.0 ? 4.0 * kPi : kPi * r * r;
}

bool Sphere::in_domain(const Point& p) const { return norm(p) < 1.0; }

// ---------------------------------------------------------------- factories

ScenePtr make_hyperplane(int ambient_dim) {
  return std::make_shared<Hyperplane>(ambient_dim, nlohmann::json::object());
}

ScenePtr make_lipschitz_graph(double slope, int pieces, std::uint64_t seed) {
  require(slope >= 0.0 && slope <= 1.0, ErrorCode::kInvalidArgument, "graph slope must be in [0, 1]");
  require(pieces >= 1, ErrorCode::kInvalidArgument, "graph needs at least one piece");
  CounterRng rng(hash_key(seed, 0x6772617068ULL));
  std::vector<Point> v{{0.0, 0.0, 0.0}};
  for (int i = 0; i < pieces; ++i) {
    const double s = rng.uniform(-slope, slope);
    const double dx = 1.0 / pieces;
    v.push_back({v.back().x + dx, v.back().y + s * dx, 0.0});
  }
  v.back().x = 1.0;
  Polyline::Options o;
  o.kind = SceneKind::kLipschitzGraph;
  o.rays = true;
  o.side = Polyline::Side::kAbove;
  o.params = {{"slope", slope}, {"pieces", pieces}, {"seed", seed}};
  return std::make_shared<Polyline>(std::move(v), o);
}

ScenePtr make_koch_curve(double angle_deg, int level) {
  require(angle_deg > 0.0 && angle_deg < 90.0, ErrorCode::kInvalidArgument, "koch angle must be in (0, 90)");
  require(level >= 0 && level <= 8, ErrorCode::kInvalidArgument, "koch level must be in [0, 8]");
  const double th = angle_deg * kPi / 180.0;
  const double lam = 1.0 / (2.0 * (1.0 + std::cos(th)));
  std::vector<Point> v{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  for (int l = 0; l < level; ++l) {
    std::vector<Point> next{v.front()};
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const Point a = v[i], b = v[i + 1];
      const Point d = b - a;
      const Point n{-d.y, d.x, 0.0};
      next.push_back(a + lam * d);
      next.push_back(a + 0.5 * d + (lam * std::sin(th)) * n);
      next.push_back(b - lam * d);
      next.push_back(b);
    }
    v = std::move(next);
  }
  Polyline::Options o;
  o.kind = SceneKind::kKochCurve;
  o.params = {{"angle", angle_deg}, {"level", level}};
  return std::make_shared<Polyline>(std::move(v), o);
}

ScenePtr make_cantor(int level) { return std::make_shared<CantorSet>(level, nlohmann::json{{"level", level}}); }

ScenePtr make_segment(Point a, Point b) {
  Polyline::Options o;
  o.params = {{"vertices", {{a.x, a.y}, {b.x, b.y}}}, {"closed", false}};
  return std::make_shared<Polyline>(std::vector<Point>{a, b}, o);
}

ScenePtr make_polyline(std::vector<Point> vertices, bool closed) {
  Polyline::Options o;
  o.closed = closed;
  o.side = closed ? Polyline::Side::kInside : Polyline::Side::kComplement;
  nlohmann::json vs = nlohmann::json::array();
  for (const Point& p : vertices) vs.push_back({p.x, p.y});
  o.params = {{"vertices", vs}, {"closed", closed}};
  return std::make_shared<Polyline>(std::move(vertices), o);
}

ScenePtr make_sphere(int ambient_dim) { return std::make_shared<Sphere>(ambient_dim, nlohmann::json::object()); }

ScenePtr scene_from_json(const nlohmann::json& j) {
  try {
    const int schema = j.value("schema", 1);
    require(schema == 1, ErrorCode::kInvalidArgument, "unsupported scene schema version");
    const SceneKind kind = scene_kind_from_string(j.at("kind").get<std::string>());
    const int dim = j.value("ambient_dim", 2);
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    if (kind != SceneKind::kHyperplane && kind != SceneKind::kSphere)
      require(dim == 2, ErrorCode::kInvalidArgument, to_string(kind) + " scenes are planar");
    switch (kind) {
      case SceneKind::kHyperplane: return make_hyperplane(dim);
      case SceneKind::kSphere: return make_sphere(dim);
      case SceneKind::kLipschitzGraph:
        return make_lipschitz_graph(p.value("slope", 0.05), p.value("pieces", 16), p.value("seed", std::uint64_t{1}));
      case SceneKind::kKochCurve: return make_koch_curve(p.value("angle", 30.0), p.value("level", 4));
      case SceneKind::kFourCornerCantor: return make_cantor(p.value("level", 6));
      case SceneKind::kPolyline: {
        std::vector<Point> v;
        for (const auto& xy : p.at("vertices")) v.push_back({xy.at(0).get<double>(), xy.at(1).get<double>(), 0.0});
        return make_polyline(std::move(v), p.value("closed", false));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed scene description: ") + e.what());
  }
  throw Error(ErrorCode::kInvalidArgument, "unhandled scene kind");
}

ScenePtr load_scene(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open scene file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("scene file is not JSON: ") + e.what());
  }
  return scene_from_json(j);
}

// ---------------------------------------------------------------- ADR, corkscrew

AdrReport verify_adr(const Scene& scene, const std::vector<Point>& centers, const std::vector<double>& scales) {
  require(!centers.empty() && !scales.empty(), ErrorCode::kEmptySample, "ADR check needs centers and scales");
  AdrReport rep;
  rep.scales_tested = scales;
  const int n = scene.ambient_dim() - 1;
  for (const Point& x : centers) {
    for (double r : scales) {
      const double ratio = scene.surface_measure(x, r) / std::pow(r, n);
      rep.samples.push_back({x, r, ratio});
      rep.lower_constant = std::min(rep.lower_constant, ratio);
      rep.upper_constant = std::max(rep.upper_constant, ratio);
    }
  }
  return rep;
}

Corkscrew corkscrew_point(const Scene& scene, const Point& x, double r, double c_min) {
  require(r > 0.0, ErrorCode::kNonPositiveRadius, "corkscrew radius must be positive");
  const int dim = scene.ambient_dim();
  auto score = [&](const Point& X) {
    const double room = r - dist(X, x);
    if (room <= 0.0 || !scene.in_domain(X)) return -kInf;
    return std::min(scene.distance(X), room);
  };
  const int m = dim == 2 ? 32 : 12;
  Point best = x;
  double best_score = -kInf;
  const int kz = dim == 3 ? m : 0;
  for (int i = -m; i <= m; ++i) {
    for (int j = -m; j <= m; ++j) {
      for (int k = -kz; k <= kz; ++k) {
        const Point X = x + Point{r * i / m, r * j / m, dim == 3 ? r * k / m : 0.0};
        const double s = score(X);
        if (s > best_score) {
          best_score = s;
          best = X;
        }
      }
    }
  }
  if (best_score > 0.0) {
    double step = r / m;
    for (int iter = 0; iter < 40; ++iter) {
      bool moved = false;
      for (int axis = 0; axis < dim; ++axis) {
        for (double sgn : {-1.0, 1.0}) {
          Point X = best;
          X[axis] += sgn * step;
          const double s = score(X);
          if (s > best_score) {
            best_score = s;
            best = X;
            moved = true;
          }
        }
      }
      if (!moved) step *= 0.5;
    }
  }
  const double c = best_score / r;
  require(c >= c_min, ErrorCode::kNoCorkscrew, "no corkscrew point with the configured clearance");
  return {best, c};
}

}  // namespace fatou
