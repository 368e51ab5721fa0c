#include "waypixel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace waypixel::geom {

double point_segment_distance(const Vec2& p, const Segment& s) {
  const Vec2 ab = s.b - s.a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - s.a).norm();
  const double t = std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0);
  return (p - (s.a + t * ab)).norm();
}

std::optional<std::pair<double, double>> intersect(const Segment& s, const Segment& t) {
  const Vec2 r = s.b - s.a;
  const Vec2 q = t.b - t.a;
  const double denom = cross(r, q);
  if (std::abs(denom) < 1e-15) return std::nullopt;  // parallel; touching handled by distance
  const Vec2 d = t.a - s.a;
  const double ts = cross(d, q) / denom;
  const double tt = cross(d, r) / denom;
  if (ts < 0.0 || ts > 1.0 || tt < 0.0 || tt > 1.0) return std::nullopt;
  return std::pair{ts, tt};
}

double segment_segment_distance(const Segment& s, const Segment& t) {
  if (intersect(s, t)) return 0.0;
  return std::min({point_segment_distance(s.a, t), point_segment_distance(s.b, t),
                   point_segment_distance(t.a, s), point_segment_distance(t.b, s)});
}

std::optional<double> ray_segment(const Vec2& origin, const Vec2& dir, const Segment& s,
                                  double min_t) {
  const Vec2 q = s.b - s.a;
  const double denom = cross(dir, q);
  if (std::abs(denom) < 1e-15) return std::nullopt;
  const Vec2 d = s.a - origin;
  const double t = cross(d, q) / denom;
  const double u = cross(d, dir) / denom;
  if (t <= min_t || u < 0.0 || u > 1.0) return std::nullopt;
  return t;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace waypixel::geom
