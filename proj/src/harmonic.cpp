#include "fatou/harmonic.hpp"

#include <algorithm>
#include <cmath>

#include "fatou/parallel.hpp"

namespace fatou {

namespace {

/// Exit point on the circle |y - c| = r of planar Brownian motion started at
/// x outside it. Kelvin inversion turns this into the interior harmonic
/// measure from x*, which is the Möbius image of the uniform law.
Point exterior_circle_exit(const Point& c, double r, const Point& x, CounterRng& rng) {
  const Point v = x - c;
  const double s = r / dot(v, v);
  const double ax = v.x * s, ay = v.y * s;  // x* relative to c, scaled by 1/r
  const double t = 2.0 * kPi * rng.uniform();
  const double zx = std::cos(t), zy = std::sin(t);
  // (z + a) / (1 + conj(a) z)
  const double nx = zx + ax, ny = zy + ay;
  const double dx = 1.0 + ax * zx + ay * zy, dy = ax * zy - ay * zx;
  const double den = dx * dx + dy * dy;
  return {c.x + r * (nx * dx + ny * dy) / den, c.y + r * (ny * dx - nx * dy) / den, 0.0};
}

}  // namespace

ExitSample wos_exit_sample(const HarmonicDomain& domain, const Point& x, CounterRng& rng) {
  const Scene& e = *domain.scene;
  const WosParams& p = domain.params;
  // Planar bounded scenes: walkers far outside return to a circle in one exact jump.
  const bool recall = e.ambient_dim() == 2 && e.bounded();
  const Point c = e.extent().center();
  const double r_out = e.extent().diameter();
  ExitSample s;
  Point y = x;
  for (;;) {
    if (recall && dist(y, c) > r_out) {
      y = exterior_circle_exit(c, r_out, y, rng);
      ++s.steps;
    }
    const double d = e.distance(y);
    if (d < p.shell) {
      s.exit = e.nearest(y);
      return s;
    }
    if (s.steps >= p.max_steps) {
      s.capped = true;
      s.exit = y;
      return s;
    }
    y = y + (d * (1.0 - p.safety)) * rng.direction(e.ambient_dim());
    ++s.steps;
  }
}

MeasureEstimate summarize(const std::vector<double>& values, long capped, std::uint64_t seed) {
  MeasureEstimate m;
  m.n_walks = static_cast<long>(values.size());
  m.capped = capped;
  m.seed = seed;
  require(m.n_walks > 0, ErrorCode::kEmptySample, "no completed walks");
  double sum = 0.0;
  for (double v : values) sum += v;
  m.value = sum / m.n_walks;
  if (m.n_walks > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.value) * (v - m.value);
    m.std_error = std::sqrt(ss / (m.n_walks - 1) / m.n_walks);
  }
  return m;
}

MeasureEstimate ExitBatch::mean(const std::function<double(const Point&)>& f) const {
  std::vector<double> v(exits.size());
  for (std::size_t i = 0; i < exits.size(); ++i) v[i] = f(exits[i]);
  return summarize(v, capped, seed);
}

MeasureEstimate ExitBatch::measure(const std::function<bool(const Point&)>& target) const {
  return mean([&](const Point& p) { return target(p) ? 1.0 : 0.0; });
}

ExitBatch sample_exits(const HarmonicDomain& domain, const Point& x, long n_walks, std::uint64_t seed,
                       std::uint64_t stream) {
  require(n_walks > 0, ErrorCode::kInvalidArgument, "need at least one walk");
  require(domain.params.shell > 0.0, ErrorCode::kInvalidArgument, "shell thickness must be positive");
  require(domain.scene->in_domain(x), ErrorCode::kInvalidArgument, "walk start is not in the domain");
  std::vector<ExitSample> out(n_walks);
  parallel_for(static_cast<std::size_t>(n_walks), [&](std::size_t i) {
    CounterRng rng(hash_key(seed, stream, i));
    out[i] = wos_exit_sample(domain, x, rng);
  });
  ExitBatch b;
  b.origin = x;
  b.seed = seed;
  b.exits.reserve(n_walks);
  for (const ExitSample& s : out) {
    b.total_steps += s.steps;
    if (s.capped) {
      ++b.capped;
    } else {
      b.exits.push_back(s.exit);
    }
  }
  return b;
}

MeasureEstimate NodeBatch::mean(const std::vector<double>& node_values) const {
  std::vector<double> v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) v[i] = node[i] >= 0 ? node_values[node[i]] : 0.0;
  return summarize(v, capped, seed);
}

MeasureEstimate NodeBatch::range(int begin, int end) const {
  std::vector<double> v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i) v[i] = node[i] >= begin && node[i] < end ? 1.0 : 0.0;
  return summarize(v, capped, seed);
}

MeasureEstimate NodeBatch::set(const std::vector<int>& sorted_nodes) const {
  std::vector<double> v(node.size());
  for (std::size_t i = 0; i < node.size(); ++i)
    v[i] = node[i] >= 0 && std::binary_search(sorted_nodes.begin(), sorted_nodes.end(), node[i]) ? 1.0 : 0.0;
  return summarize(v, capped, seed);
}

NodeBatch sample_exit_nodes(const HarmonicDomain& domain, const DyadicGrid& grid, const Point& x, long n_walks,
                            std::uint64_t seed, std::uint64_t stream) {
  const ExitBatch b = sample_exits(domain, x, n_walks, seed, stream);
  NodeBatch nb;
  nb.origin = x;
  nb.seed = seed;
  nb.capped = b.capped;
  nb.node.resize(b.exits.size());
  for (std::size_t i = 0; i < b.exits.size(); ++i) nb.node[i] = grid.node_of(b.exits[i]);
  return nb;
}

MeasureEstimate harmonic_measure(const HarmonicDomain& domain, const Point& x,
                                 const std::function<bool(const Point&)>& target, long n_walks, std::uint64_t seed) {
  return sample_exits(domain, x, n_walks, seed).measure(target);
}

MeasureEstimate evaluate_solution(const HarmonicDomain& domain, const Point& x,
                                  const std::function<double(const Point&)>& f, long n_walks, std::uint64_t seed) {
  return sample_exits(domain, x, n_walks, seed).mean([&](const Point& p) {
    const double v = f(p);
    require(std::abs(v) <= 1.0, ErrorCode::kOutOfRange, "boundary data must satisfy |f| <= 1");
    return v;
  });
}

double halfplane_interval_measure(const Point& x, double a, double b, int ambient_dim) {
  const double t = ambient_dim == 2 ? x.y : x.z;
  require(t > 0.0, ErrorCode::kInvalidArgument, "point must lie in the upper half-space");
  auto F = [&](double s) { return std::isinf(s) ? (s > 0 ? 0.5 : -0.5) : std::atan((s - x.x) / t) / kPi; };
  return std::max(0.0, F(b) - F(a));
}

double disk_arc_measure(const Point& x, double theta0, double theta1) {
  require(norm(x) < 1.0, ErrorCode::kInvalidArgument, "point must lie in the open unit disk");
  require(theta1 >= theta0 && theta1 - theta0 <= 2.0 * kPi, ErrorCode::kInvalidArgument, "invalid arc");
  if (theta1 - theta0 == 2.0 * kPi) return 1.0;
  // Angle subtended at x by the arc, minus half the arc length.
  const Point e0{std::cos(theta0) - x.x, std::sin(theta0) - x.y, 0.0};
  const Point e1{std::cos(theta1) - x.x, std::sin(theta1) - x.y, 0.0};
  double phi = std::atan2(cross2(e0, e1), dot(e0, e1));
  if (phi < 0.0) phi += 2.0 * kPi;
  return phi / kPi - (theta1 - theta0) / (2.0 * kPi);
}

namespace {

/// Composite Gauss-Legendre (5 points) on [a, b] with `panels` panels.
template <typename F>
double gauss_legendre(F&& f, double a, double b, int panels) {
  static constexpr double xs[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
  static constexpr double ws[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                                   0.2369268850561891};
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int i = 0; i < 5; ++i) sum += ws[i] * f(mid + 0.5 * h * xs[i]);
  }
  return 0.5 * h * sum;
}

}  // namespace

double single_layer_potential(const Scene& scene, const Point& x, const Point& center, double radius) {
  require(scene.ambient_dim() >= 3, ErrorCode::kUnsupported,
          "single-layer potentials need ambient dimension >= 3; use the Case 1 path in the plane");
  require(scene.kind() == SceneKind::kHyperplane, ErrorCode::kUnsupported, "single-layer potentials need a flat boundary");
  require(radius > 0.0, ErrorCode::kNonPositiveRadius, "surface ball radius must be positive");
  const double z = std::abs(x.z);
  const double dx = x.x - center.x, dy = x.y - center.y;
  const double a = std::hypot(dx, dy);
  const double rho = radius;
  // ∫_disk dA / sqrt(s^2 + z^2) in polar coordinates about the projection of x.
  double integral = 0.0;
  if (a < rho) {
    auto f = [&](double phi) {
      const double c = std::cos(phi), s = std::sin(phi);
      const double R = -a * c + std::sqrt(rho * rho - a * a * s * s);
      return std::sqrt(R * R + z * z) - z;
    };
    integral = gauss_legendre(f, 0.0, 2.0 * kPi, 256);
  } else {
    // Rays within angle asin(ρ/a) of the center direction cross the disk on [R1, R2].
    const double phimax = std::asin(std::min(1.0, rho / a));
    auto f = [&](double th) {
      const double phi = phimax * std::sin(th);
      const double jac = phimax * std::cos(th);
      const double c = std::cos(phi), s = std::sin(phi);
      const double root = std::sqrt(std::max(0.0, rho * rho - a * a * s * s));
      const double R1 = a * c - root, R2 = a * c + root;
      return jac * (std::sqrt(R2 * R2 + z * z) - std::sqrt(R1 * R1 + z * z));
    };
    integral = gauss_legendre(f, -0.5 * kPi, 0.5 * kPi, 256);
  }
  return integral / (4.0 * kPi * rho);
}

FdRectangle::FdRectangle(const Box2& rect, int n, const std::function<double(const Point&)>& f, double tol)
    : rect_(rect) {
  require(n >= 4, ErrorCode::kInvalidArgument, "need at least 4 intervals");
  nx_ = n;
  ny_ = std::max(4, static_cast<int>(std::lround(n * rect.height() / rect.width())));
  hx_ = rect.width() / nx_;
  hy_ = rect.height() / ny_;
  u_.assign((nx_ + 1) * (ny_ + 1), 0.0);
  auto id = [&](int i, int j) { return j * (nx_ + 1) + i; };
  for (int i = 0; i <= nx_; ++i) {
    u_[id(i, 0)] = f({rect.x0 + i * hx_, rect.y0, 0.0});
    u_[id(i, ny_)] = f({rect.x0 + i * hx_, rect.y1, 0.0});
  }
  for (int j = 0; j <= ny_; ++j) {
    u_[id(0, j)] = f({rect.x0, rect.y0 + j * hy_, 0.0});
    u_[id(nx_, j)] = f({rect.x1, rect.y0 + j * hy_, 0.0});
  }
  const double ax = 1.0 / (hx_ * hx_), ay = 1.0 / (hy_ * hy_);
  const double diag = 2.0 * (ax + ay);
  const double omega = 2.0 / (1.0 + std::sin(kPi / std::max(nx_, ny_)));
  for (iterations_ = 0; iterations_ < 200000; ++iterations_) {
    double change = 0.0;
    for (int j = 1; j < ny_; ++j) {
      for (int i = 1; i < nx_; ++i) {
        const double gs = (ax * (u_[id(i - 1, j)] + u_[id(i + 1, j)]) + ay * (u_[id(i, j - 1)] + u_[id(i, j + 1)])) / diag;
        const double delta = omega * (gs - u_[id(i, j)]);
        u_[id(i, j)] += delta;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < tol) break;
  }
}

double FdRectangle::at(const Point& p) const {
  const double fx = std::clamp((p.x - rect_.x0) / hx_, 0.0, static_cast<double>(nx_));
  const double fy = std::clamp((p.y - rect_.y0) / hy_, 0.0, static_cast<double>(ny_));
  const int i = std::min(static_cast<int>(fx), nx_ - 1), j = std::min(static_cast<int>(fy), ny_ - 1);
  const double tx = fx - i, ty = fy - j;
  auto v = [&](int a, int b) { return u_[b * (nx_ + 1) + a]; };
  return (1 - tx) * (1 - ty) * v(i, j) + tx * (1 - ty) * v(i + 1, j) + (1 - tx) * ty * v(i, j + 1) + tx * ty * v(i + 1, j + 1);
}

BatteryReport validation_battery(int n_cases, long n_walks, std::uint64_t seed, double shell) {
  require(n_cases > 0, ErrorCode::kInvalidArgument, "battery needs cases");
  HarmonicDomain half{make_hyperplane(2), {}};
  HarmonicDomain disk{make_sphere(2), {}};
  half.params.shell = disk.params.shell = shell;
  BatteryReport rep;
  for (int c = 0; c < n_cases; ++c) {
    CounterRng rng(hash_key(seed, 0xba77e7ULL, static_cast<std::uint64_t>(c)));
    BatteryCase bc;
    if (c % 2 == 0) {
      bc.domain = "half-plane";
      bc.x = {rng.uniform(-2.0, 2.0), rng.uniform(0.2, 2.0), 0.0};
      bc.a = rng.uniform(-3.0, 2.0);
      bc.b = bc.a + rng.uniform(0.2, 3.0);
      bc.exact = halfplane_interval_measure(bc.x, bc.a, bc.b);
      const double a = bc.a, b = bc.b;
      bc.estimate = harmonic_measure(half, bc.x, [=](const Point& p) { return p.x >= a && p.x <= b; }, n_walks,
                                     hash_key(seed, static_cast<std::uint64_t>(c)));
    } else {
      bc.domain = "disk";
      const double r = 0.8 * std::sqrt(rng.uniform());
      const double t = rng.uniform(0.0, 2.0 * kPi);
      bc.x = {r * std::cos(t), r * std::sin(t), 0.0};
      bc.a = rng.uniform(0.0, 2.0 * kPi);
      bc.b = bc.a + rng.uniform(0.3, 3.0);
      bc.exact = disk_arc_measure(bc.x, bc.a, bc.b);
      const double a = bc.a, b = bc.b;
      bc.estimate = harmonic_measure(disk, bc.x,
                                     [=](const Point& p) {
                                       double th = std::atan2(p.y, p.x);
                                       while (th < a) th += 2.0 * kPi;
                                       return th <= b;
                                     },
                                     n_walks, hash_key(seed, static_cast<std::uint64_t>(c)));
    }
    bc.within_3se = std::abs(bc.estimate.value - bc.exact) <= 3.0 * bc.estimate.std_error;
    rep.passed += bc.within_3se ? 1 : 0;
    rep.max_capped_fraction = std::max(rep.max_capped_fraction, bc.estimate.capped_fraction());
    rep.cases.push_back(bc);
  }
  return rep;
}

}  // namespace fatou
