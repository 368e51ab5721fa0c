#pragma once

#include "waypixel/frameio.hpp"
#include "waypixel/geometry.hpp"
#include "waypixel/planner.hpp"

#include <array>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace waypixel {

// Deterministic costmap-descent controller. It keeps the learned controller's
// interface (costmap in, ten local bird's-eye waypoints out) without weights.

struct NavigabilityParams {
  double h_min = -0.35;  // height above floor, meters
  double h_max = 0.10;
  double r_max = 3.0;    // horizontal range, meters
  double sensor_height = 0.4;
};

using NavigabilityMask = std::vector<std::uint8_t>;

/// Height above floor of a camera-frame point (camera y points down).
inline double height_above_floor(const Eigen::Vector3f& p, double sensor_height) {
  return sensor_height - p.y();
}
inline double ground_range(const Eigen::Vector3f& p) {
  return std::hypot(static_cast<double>(p.x()), static_cast<double>(p.z()));
}

NavigabilityMask navigable_mask(const FrameRecord& pointmap, const NavigabilityParams& params = {});

struct Waypoint {
  double x_forward = 0.0;
  double y_left = 0.0;
};

inline constexpr int kRolloutLength = 10;

struct Rollout {
  std::array<Waypoint, kRolloutLength> waypoints{};
  double terminal_yaw = 0.0;
  PixelCoord target;
  double target_cost = 0.0;
};

struct ControllerParams {
  NavigabilityParams nav;
  double beta = 0.1;  // range penalty per meter
  /// Minimum ground distance between the straight path to a target and any
  /// visible obstacle point; 0 disables the check.
  double path_clearance = 0.3;
  double max_forward = 0.25;
  double rotate_in_place_above = std::numbers::pi / 3.0;
  double search_turn = std::numbers::pi / 6.0;  // fallback rotation per step
  double turn_gain = 1.0;  // fraction of the waypoint bearing turned per step
};

/// Nearest obstacle point (above h_max, below 2 m) per image column, in the
/// robot ground frame (x forward, y left).
std::vector<geom::Vec2> visible_obstacles(const FrameRecord& frame, const NavigabilityParams& nav);

/// Picks the masked finite-cost pixel minimising cost + beta * range and
/// interpolates ten waypoints towards its ground projection. Targets whose
/// straight path passes closer than path_clearance to a visible or
/// `remembered` obstacle point are skipped.
Rollout plan_rollout(const WayPixelCostmap& costmap, const FrameRecord& pointmap,
                     const NavigabilityMask& mask, const ControllerParams& params = {},
                     std::span<const geom::Vec2> remembered = {});

struct ControlCommand {
  double forward = 0.0;
  double turn = 0.0;
};

/// Pure pursuit on the first waypoint, the bearing scaled by turn_gain.
ControlCommand waypoint_to_control(const Rollout& rollout, const ControllerParams& params = {});

}  // namespace waypixel
