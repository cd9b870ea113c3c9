#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace fatou {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Point in ambient space. Planar scenes leave z at zero.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Point operator*(double s, Point a) { return {s * a.x, s * a.y, s * a.z}; }
  friend constexpr Point operator*(Point a, double s) { return s * a; }
  friend constexpr bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Point a) { return std::sqrt(dot(a, a)); }
inline double dist(Point a, Point b) { return norm(a - b); }
inline double cross2(Point a, Point b) { return a.x * b.y - a.y * b.x; }

/// Closed axis-aligned box in the plane.
struct Box2 {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  Point center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.0}; }
  bool contains(Point p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  Box2 inflated(double r) const { return {x0 - r, y0 - r, x1 + r, y1 + r}; }
  /// Concentric dilate by factor s.
  Box2 scaled(double s) const {
    const Point c = center();
    const double hw = 0.5 * s * width(), hh = 0.5 * s * height();
    return {c.x - hw, c.y - hh, c.x + hw, c.y + hh};
  }
  double diameter() const { return std::hypot(width(), height()); }
  void expand(Point p) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  static Box2 empty() { return {kInf, kInf, -kInf, -kInf}; }
  bool is_empty() const { return x0 > x1 || y0 > y1; }
};

inline double point_box_distance(Point p, const Box2& b) {
  const double dx = std::max({b.x0 - p.x, 0.0, p.x - b.x1});
  const double dy = std::max({b.y0 - p.y, 0.0, p.y - b.y1});
  return std::hypot(dx, dy);
}

inline Point point_box_nearest(Point p, const Box2& b) {
  return {std::clamp(p.x, b.x0, b.x1), std::clamp(p.y, b.y0, b.y1), 0.0};
}

inline double box_box_distance(const Box2& a, const Box2& b) {
  const double dx = std::max({b.x0 - a.x1, 0.0, a.x0 - b.x1});
  const double dy = std::max({b.y0 - a.y1, 0.0, a.y0 - b.y1});
  return std::hypot(dx, dy);
}

inline bool boxes_touch(const Box2& a, const Box2& b) {
  return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

/// Farthest point of the box from p.
inline double point_box_max_distance(Point p, const Box2& b) {
  const double dx = std::max(std::abs(p.x - b.x0), std::abs(p.x - b.x1));
  const double dy = std::max(std::abs(p.y - b.y0), std::abs(p.y - b.y1));
  return std::hypot(dx, dy);
}

inline Point segment_nearest(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return a;
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

inline double point_segment_distance(Point p, Point a, Point b) {
  return dist(p, segment_nearest(p, a, b));
}

/// Liang-Barsky clip test: does the closed segment meet the closed box.
inline bool segment_meets_box(Point a, Point b, const Box2& box) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - box.x0, box.x1 - a.x, a.y - box.y0, box.y1 - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
    } else {
      const double t = q[i] / p[i];
      if (p[i] < 0.0) {
        t0 = std::max(t0, t);
      } else {
        t1 = std::min(t1, t);
      }
      if (t0 > t1) return false;
    }
  }
  return true;
}

inline double segment_box_distance(Point a, Point b, const Box2& box) {
  if (segment_meets_box(a, b, box)) return 0.0;
  double d = std::min(point_box_distance(a, box), point_box_distance(b, box));
  const Point corners[4] = {{box.x0, box.y0, 0}, {box.x1, box.y0, 0}, {box.x0, box.y1, 0}, {box.x1, box.y1, 0}};
  for (const Point& c : corners) d = std::min(d, point_segment_distance(c, a, b));
  return d;
}

/// Length of the part of segment [a,b] strictly inside the open disk B(c, r).
inline double segment_disk_length(Point a, Point b, Point c, double r) {
  const Point ab = b - a;
  const double len = norm(ab);
  if (len == 0.0 || r <= 0.0) return 0.0;
  const Point u = (1.0 / len) * ab;
  const Point w = a - c;
  const double bq = dot(w, u);
  const double cq = dot(w, w) - r * r;
  const double disc = bq * bq - cq;
  if (disc <= 0.0) return 0.0;
  const double s = std::sqrt(disc);
  const double t0 = std::max(-bq - s, 0.0);
  const double t1 = std::min(-bq + s, len);
  return std::max(t1 - t0, 0.0);
}

namespace detail {
// Integral of sqrt(r^2 - t^2) dt.
inline double semicircle_antiderivative(double t, double r) {
  t = std::clamp(t, -r, r);
  return 0.5 * (t * std::sqrt(std::max(r * r - t * t, 0.0)) + r * r * std::asin(t / r));
}

// Area of the disk of radius r at the origin intersected with {X <= x, Y <= y}.
inline double disk_quadrant_area(double x, double y, double r) {
  if (x <= -r || y <= -r) return 0.0;
  x = std::min(x, r);
  auto S = [r](double t) { return semicircle_antiderivative(t, r); };
  if (y >= r) return 2.0 * (S(x) - S(-r));
  const double a = std::sqrt(std::max(r * r - y * y, 0.0));
  if (y >= 0.0) {
    // |t| > a: full chord 2s; |t| < a: y + s.
    double area = 0.0;
    const double l1 = std::min(x, -a);
    area += 2.0 * (S(l1) - S(-r));
    if (x > -a) {
      const double l2 = std::min(x, a);
      area += y * (l2 + a) + (S(l2) - S(-a));
    }
    if (x > a) area += 2.0 * (S(x) - S(a));
    return area;
  }
  // y < 0: only |t| < a contributes y + s.
  if (x <= -a) return 0.0;
  const double l2 = std::min(x, a);
  return y * (l2 + a) + (S(l2) - S(-a));
}
}  // namespace detail

/// Exact area of the open disk B(c, r) intersected with a closed box.
inline double disk_box_area(Point c, double r, const Box2& b) {
  if (r <= 0.0) return 0.0;
  using detail::disk_quadrant_area;
  const double x0 = b.x0 - c.x, x1 = b.x1 - c.x, y0 = b.y0 - c.y, y1 = b.y1 - c.y;
  const double area = disk_quadrant_area(x1, y1, r) - disk_quadrant_area(x0, y1, r) -
                      disk_quadrant_area(x1, y0, r) + disk_quadrant_area(x0, y0, r);
  return std::clamp(area, 0.0, b.width() * b.height());
}

/// Andrew monotone chain; returns hull vertices counter-clockwise.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  auto turn = [](Point o, Point a, Point b) { return cross2(a - o, b - o); };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && turn(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

inline double point_set_diameter(const std::vector<Point>& pts) {
  const auto hull = convex_hull(pts);
  double d = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) d = std::max(d, dist(hull[i], hull[j]));
  return d;
}

}  // namespace fatou
