#pragma once

#include "waypixel/frameio.hpp"
#include "waypixel/geometry.hpp"
#include "waypixel/hash.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace waypixel::synth {

using geom::Segment;
using geom::Vec2;

inline constexpr double kRobotRadius = 0.2;
inline constexpr double kSensorHeight = 0.4;

struct Rect {
  Vec2 min{0.0, 0.0};
  Vec2 max{0.0, 0.0};

  bool contains(const Vec2& p, double margin = 0.0) const {
    return p.x() >= min.x() + margin && p.y() >= min.y() + margin &&
           p.x() <= max.x() - margin && p.y() <= max.y() - margin;
  }
  Vec2 center() const { return 0.5 * (min + max); }
};

enum class LayoutKind { Box, Corridor, CorridorThreeRooms };

std::string to_string(LayoutKind kind);
LayoutKind parse_layout(const std::string& name);

struct WorldSpec {
  LayoutKind layout = LayoutKind::Box;
  double width = 6.0;   // x extent, meters
  double length = 6.0;  // y extent, meters
  double landmark_density = 10.0;  // landmarks per meter of wall, per visible side
  double ceiling_z = 2.5;
  std::uint64_t seed = 0;
};

struct Landmark {
  std::uint32_t id = 0;
  Eigen::Vector3d position;
  Vec2 normal;  // unit normal of the wall side the landmark is painted on
  int wall = -1;
};

/// Free-space description used to lay out routes and tasks.
struct Room {
  Rect area;
  std::optional<Vec2> door;  // door centre on the shared wall with the corridor
};

struct World {
  LayoutKind layout = LayoutKind::Box;
  std::vector<Segment> walls;
  double floor_z = 0.0;
  double ceiling_z = 2.5;
  std::vector<Landmark> landmarks;
  std::uint32_t goal_landmark = 0;
  Rect bounds;
  std::uint64_t seed = 0;
  // Corridor strip for the multi-room layout; the whole box otherwise.
  Rect corridor;
  std::vector<Room> rooms;

  /// Distance from p to the closest wall.
  double clearance(const Vec2& p) const;
  /// Smallest distance between the segment [a, b] and any wall.
  double clearance(const Segment& s) const;
  /// True if the straight segment between two points intersects no wall.
  bool line_of_sight(const Vec2& a, const Vec2& b, int ignore_wall = -1) const;
};

World build_world(const WorldSpec& spec);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double sensor_height = kSensorHeight;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose&) const = default;
};

struct Intrinsics {
  int width = 64;
  int height = 48;
  double horizontal_fov = std::numbers::pi / 2.0;

  double focal() const;
  /// Angular size of one pixel, radians.
  double angular_resolution() const { return horizontal_fov / width; }
};

struct NoiseKnobs {
  double point_sigma = 0.0;
  double scale_jitter = 0.0;  // epsilon of the per-frame multiplicative scale
  double match_dropout = 0.0;
  std::uint64_t seed = 0;

  bool zero() const { return point_sigma == 0.0 && scale_jitter == 0.0 && match_dropout == 0.0; }
};

struct VisibleLandmark {
  std::uint32_t landmark_id = 0;
  PixelCoord pixel;
};

struct FrameObservation {
  FrameRecord frame;
  std::vector<VisibleLandmark> visible_landmarks;  // sorted by landmark id
  double scale = 1.0;  // per-frame scale factor that was applied
};

/// World point expressed in the camera frame of `pose` (x right, y down, z forward).
Eigen::Vector3d camera_from_world(const Pose& pose, const Eigen::Vector3d& world_point);
Eigen::Vector3d world_from_camera(const Pose& pose, const Eigen::Vector3d& camera_point);

FrameObservation render_frame(const World& world, const Pose& pose, const Intrinsics& k,
                              const NoiseKnobs& noise, std::uint32_t frame_id = 0);

/// Landmark-identity correspondences between two observations. The pair is
/// labelled (obs_a.frame_id, obs_b.frame_id) and pixel_i belongs to obs_a.
PairRecord oracle_match(const FrameObservation& obs_a, const FrameObservation& obs_b,
                        const NoiseKnobs& noise);

struct Traversal {
  std::vector<Pose> poses;
  std::vector<FrameObservation> observations;
  MatchBundle bundle;
};

struct TraversalOptions {
  /// Largest yaw change between consecutive frames; sharper route corners get
  /// extra in-place rotation frames.
  double max_yaw_step = std::numbers::pi / 8.0;
};

Traversal generate_traversal(const World& world, const std::vector<Vec2>& route, double spacing,
                             const Intrinsics& k, int window, const NoiseKnobs& noise,
                             const TraversalOptions& options = {});

/// Poses sampled along a route, without rendering.
std::vector<Pose> sample_route(const std::vector<Vec2>& route, double spacing,
                               double max_yaw_step = std::numbers::pi / 8.0);

struct Command {
  double forward = 0.0;
  double turn = 0.0;
};

struct StepResult {
  Pose pose;
  bool collided = false;
};

StepResult step_robot(const World& world, const Pose& pose, const Command& command);

/// Shortest collision-free distances for a disc robot, computed on a
/// visibility graph around inflated wall endpoints.
class GeodesicMap {
 public:
  explicit GeodesicMap(const World& world, double radius = kRobotRadius);

  double distance(const Vec2& a, const Vec2& b) const;
  /// Vertices of the shortest path from a to b (inclusive); empty if unreachable.
  std::vector<Vec2> path(const Vec2& a, const Vec2& b) const;

 private:
  bool visible(const Vec2& a, const Vec2& b) const;

  std::vector<Segment> walls_;
  double radius_;
  std::vector<Vec2> vertices_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
};

double polyline_length(const std::vector<Vec2>& points);

}  // namespace waypixel::synth
