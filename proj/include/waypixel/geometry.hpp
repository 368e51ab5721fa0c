#pragma once

#include <Eigen/Core>

#include <optional>

namespace waypixel::geom {

using Vec2 = Eigen::Vector2d;

struct Segment {
  Vec2 a;
  Vec2 b;

  double length() const { return (b - a).norm(); }
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Segment& s);

/// Minimum distance between two closed segments (0 when they touch or cross).
double segment_segment_distance(const Segment& s, const Segment& t);

/// Parameters (t along s, u along t) of a proper or touching intersection.
std::optional<std::pair<double, double>> intersect(const Segment& s, const Segment& t);

/// Smallest ray parameter t > min_t with origin + t*dir on the segment.
std::optional<double> ray_segment(const Vec2& origin, const Vec2& dir, const Segment& s,
                                  double min_t = 1e-12);

double wrap_angle(double a);

}  // namespace waypixel::geom
