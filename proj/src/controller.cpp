#include "waypixel/controller.hpp"

#include "waypixel/error.hpp"
#include "waypixel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace waypixel {

NavigabilityMask navigable_mask(const FrameRecord& pointmap, const NavigabilityParams& params) {
  NavigabilityMask mask(pointmap.valid_mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!pointmap.valid_mask[i]) continue;
    const auto& p = pointmap.pointmap[i];
    const double h = height_above_floor(p, params.sensor_height);
    mask[i] = h >= params.h_min && h <= params.h_max && ground_range(p) <= params.r_max;
  }
  return mask;
}

namespace {

geom::Vec2 ground(const Eigen::Vector3f& p) { return {p.z(), -p.x()}; }

}  // namespace

std::vector<geom::Vec2> visible_obstacles(const FrameRecord& frame, const NavigabilityParams& nav) {
  std::vector<geom::Vec2> out;
  for (int u = 0; u < frame.width; ++u) {
    double best = std::numeric_limits<double>::infinity();
    geom::Vec2 best_pt;
    for (int v = 0; v < frame.height; ++v) {
      const PixelCoord px{u, v};
      if (!frame.valid(px)) continue;
      const auto& p = frame.point(px);
      const double h = height_above_floor(p, nav.sensor_height);
      if (h <= nav.h_max || h > 2.0) continue;
      const double r = ground_range(p);
      if (r < best) {
        best = r;
        best_pt = ground(p);
      }
    }
    if (std::isfinite(best)) out.push_back(best_pt);
  }
  return out;
}

Rollout plan_rollout(const WayPixelCostmap& costmap, const FrameRecord& pointmap,
                     const NavigabilityMask& mask, const ControllerParams& params,
                     std::span<const geom::Vec2> remembered) {
  std::vector<geom::Vec2> obstacles;
  if (params.path_clearance > 0.0) {
    obstacles = visible_obstacles(pointmap, params.nav);
    obstacles.insert(obstacles.end(), remembered.begin(), remembered.end());
  }

  bool found = false;
  std::tuple<double, int, int> best{};
  for (int v = 0; v < pointmap.height; ++v) {
    for (int u = 0; u < pointmap.width; ++u) {
      const PixelCoord px{u, v};
      const auto idx = pointmap.index(px);
      if (!mask[idx] || !costmap.valid[idx] || !std::isfinite(costmap.cost[idx])) continue;
      const auto& p = pointmap.point(px);
      const double score = costmap.cost[idx] + params.beta * ground_range(p);
      const std::tuple<double, int, int> key{score, v, u};
      if (found && !(key < best)) continue;
      if (!obstacles.empty()) {
        const geom::Segment path{{0.0, 0.0}, ground(p)};
        const bool blocked = std::any_of(obstacles.begin(), obstacles.end(), [&](const geom::Vec2& o) {
          // Paths that start inside the margin may not get any closer.
          const double limit = std::min(params.path_clearance, o.norm());
          return geom::point_segment_distance(o, path) < limit - 1e-9;
        });
        if (blocked) continue;
      }
      best = key;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::NoNavigableTarget, "no navigable pixel with finite cost");

  const PixelCoord target{std::get<2>(best), std::get<1>(best)};
  const auto& tp = pointmap.point(target);
  const geom::Vec2 end = ground(tp);
  Rollout r;
  r.target = target;
  r.target_cost = costmap.cost[pointmap.index(target)];
  for (int i = 0; i < kRolloutLength; ++i) {
    const double t = static_cast<double>(i + 1) / kRolloutLength;
    r.waypoints[i] = {t * end.x(), t * end.y()};
  }
  r.terminal_yaw = std::atan2(end.y(), end.x());
  return r;
}

ControlCommand waypoint_to_control(const Rollout& rollout, const ControllerParams& params) {
  const auto& w = rollout.waypoints.front();
  constexpr double half_pi = std::numbers::pi / 2.0;
  ControlCommand cmd;
  const double bearing = std::clamp(std::atan2(w.y_left, w.x_forward), -half_pi, half_pi);
  cmd.turn = params.turn_gain * bearing;
  cmd.forward = std::clamp(std::hypot(w.x_forward, w.y_left) * std::cos(bearing), 0.0, params.max_forward);
  if (std::abs(bearing) > params.rotate_in_place_above) cmd.forward = 0.0;
  return cmd;
}

}  // namespace waypixel
