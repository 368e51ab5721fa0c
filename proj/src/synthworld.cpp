#include "waypixel/synthworld.hpp"

#include "waypixel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <unordered_map>

namespace waypixel::synth {

namespace {

constexpr double kCorridorDepth = 2.5;
constexpr double kDoorWidth = 1.2;

}  // namespace

std::string to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::Box: return "box";
    case LayoutKind::Corridor: return "corridor";
    case LayoutKind::CorridorThreeRooms: return "corridor+3rooms";
  }
  return "box";
}

LayoutKind parse_layout(const std::string& name) {
  if (name == "box") return LayoutKind::Box;
  if (name == "corridor") return LayoutKind::Corridor;
  if (name == "corridor+3rooms") return LayoutKind::CorridorThreeRooms;
  throw Error(ErrorCode::InvalidArgument, "unknown layout '" + name + "'");
}

// ---------------------------------------------------------------------------
// World

double World::clearance(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : walls) best = std::min(best, geom::point_segment_distance(p, w));
  return best;
}

double World::clearance(const Segment& s) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : walls) best = std::min(best, geom::segment_segment_distance(s, w));
  return best;
}

bool World::line_of_sight(const Vec2& a, const Vec2& b, int ignore_wall) const {
  const Segment s{a, b};
  for (std::size_t i = 0; i < walls.size(); ++i) {
    if (static_cast<int>(i) == ignore_wall) continue;
    if (auto hit = geom::intersect(s, walls[i]); hit && hit->first < 1.0 - 1e-9) return false;
  }
  return true;
}

namespace {

void add_box(std::vector<Segment>& walls, double w, double l) {
  walls.push_back({{0, 0}, {w, 0}});
  walls.push_back({{w, 0}, {w, l}});
  walls.push_back({{w, l}, {0, l}});
  walls.push_back({{0, l}, {0, 0}});
}

void check_layout(const std::vector<Segment>& walls) {
  for (const auto& w : walls) {
    if (!(w.length() > 1e-9)) throw Error(ErrorCode::DegenerateLayout, "zero-length wall");
  }
  for (std::size_t i = 0; i < walls.size(); ++i) {
    for (std::size_t j = i + 1; j < walls.size(); ++j) {
      auto hit = geom::intersect(walls[i], walls[j]);
      if (!hit) continue;
      constexpr double eps = 1e-9;
      const bool interior_i = hit->first > eps && hit->first < 1.0 - eps;
      const bool interior_j = hit->second > eps && hit->second < 1.0 - eps;
      if (interior_i && interior_j) {
        throw Error(ErrorCode::DegenerateLayout, "walls " + std::to_string(i) + " and " +
                                                     std::to_string(j) + " cross");
      }
    }
  }
}

}  // namespace

World build_world(const WorldSpec& spec) {
  if (!(spec.landmark_density > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "landmark density must be positive");
  }
  if (!(spec.width >= 4.0 && spec.width <= 100.0 && spec.length >= 4.0 && spec.length <= 100.0)) {
    throw Error(ErrorCode::InvalidArgument, "world sides must lie in [4, 100] m");
  }
  if (!(spec.ceiling_z > 0.5)) throw Error(ErrorCode::InvalidArgument, "ceiling too low");

  World world;
  world.layout = spec.layout;
  world.ceiling_z = spec.ceiling_z;
  world.seed = spec.seed;
  world.bounds = {{0.0, 0.0}, {spec.width, spec.length}};
  const double w = spec.width;
  const double l = spec.length;
  add_box(world.walls, w, l);

  if (spec.layout == LayoutKind::CorridorThreeRooms) {
    const double c = kCorridorDepth;
    world.corridor = {{0.0, 0.0}, {w, c}};
    const double room_w = w / 3.0;
    // Wall between corridor and rooms, broken by one door per room.
    double x = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double door_c = (k + 0.5) * room_w;
      world.walls.push_back({{x, c}, {door_c - kDoorWidth / 2, c}});
      x = door_c + kDoorWidth / 2;
      world.rooms.push_back({Rect{{k * room_w, c}, {(k + 1) * room_w, l}}, Vec2{door_c, c}});
    }
    world.walls.push_back({{x, c}, {w, c}});
    world.walls.push_back({{room_w, c}, {room_w, l}});
    world.walls.push_back({{2 * room_w, c}, {2 * room_w, l}});
    if (room_w < kDoorWidth + 1.0 || l - c < 3.0) {
      throw Error(ErrorCode::DegenerateLayout, "rooms too small for corridor+3rooms");
    }
  } else {
    world.corridor = world.bounds;
    world.rooms.push_back({world.bounds, std::nullopt});
  }
  check_layout(world.walls);

  std::mt19937_64 rng(mix_seed(spec.seed, 0x6c616e646d61726bULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uint32_t next_id = 0;
  for (std::size_t i = 0; i < world.walls.size(); ++i) {
    const auto& seg = world.walls[i];
    const Vec2 along = (seg.b - seg.a).normalized();
    const Vec2 n0{-along.y(), along.x()};
    for (const Vec2& normal : {n0, Vec2(-n0)}) {
      const Vec2 probe = 0.5 * (seg.a + seg.b) + 0.05 * normal;
      if (!world.bounds.contains(probe, 1e-6)) continue;
      const auto count = static_cast<int>(std::lround(spec.landmark_density * seg.length()));
      for (int k = 0; k < count; ++k) {
        const double s = unit(rng);
        const double z = world.floor_z + unit(rng) * (world.ceiling_z - world.floor_z);
        const Vec2 p = seg.a + s * (seg.b - seg.a);
        world.landmarks.push_back({next_id++, Eigen::Vector3d(p.x(), p.y(), z), normal,
                                   static_cast<int>(i)});
      }
    }
  }
  if (world.landmarks.empty()) throw Error(ErrorCode::DegenerateLayout, "no landmarks generated");
  world.goal_landmark = static_cast<std::uint32_t>(rng() % world.landmarks.size());
  return world;
}

// ---------------------------------------------------------------------------
// Camera and rendering

double Intrinsics::focal() const { return 0.5 * width / std::tan(0.5 * horizontal_fov); }

Eigen::Vector3d camera_from_world(const Pose& pose, const Eigen::Vector3d& world_point) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  const Eigen::Vector3d d = world_point - Eigen::Vector3d(pose.x, pose.y, pose.sensor_height);
  return {d.x() * s - d.y() * c, -d.z(), d.x() * c + d.y() * s};
}

Eigen::Vector3d world_from_camera(const Pose& pose, const Eigen::Vector3d& p) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  return {pose.x + p.x() * s + p.z() * c, pose.y - p.x() * c + p.z() * s,
          pose.sensor_height - p.y()};
}

FrameObservation render_frame(const World& world, const Pose& pose, const Intrinsics& k,
                              const NoiseKnobs& noise, std::uint32_t frame_id) {
  FrameObservation obs;
  auto& fr = obs.frame;
  fr.frame_id = frame_id;
  fr.width = k.width;
  fr.height = k.height;
  const std::size_t n = static_cast<std::size_t>(k.width) * static_cast<std::size_t>(k.height);
  fr.pointmap.assign(n, Eigen::Vector3f::Zero());
  fr.valid_mask.assign(n, 0);

  const double f = k.focal();
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  const Vec2 origin = pose.position();
  const double h = pose.sensor_height;

  std::vector<Eigen::Vector3d> truth(n, Eigen::Vector3d::Zero());
  for (int v = 0; v < k.height; ++v) {
    const double yn = (v + 0.5 - 0.5 * k.height) / f;
    const double dz = -yn;
    for (int u = 0; u < k.width; ++u) {
      const double xn = (u + 0.5 - 0.5 * k.width) / f;
      const Vec2 dir2{xn * s + c, -xn * c + s};
      double t_wall = std::numeric_limits<double>::infinity();
      for (const auto& wseg : world.walls) {
        if (auto t = geom::ray_segment(origin, dir2, wseg)) t_wall = std::min(t_wall, *t);
      }
      double t = t_wall;
      const double z_hit = h + t_wall * dz;
      if (!(z_hit >= world.floor_z && z_hit <= world.ceiling_z)) {
        if (dz < 0.0) {
          t = (world.floor_z - h) / dz;
        } else if (dz > 0.0) {
          t = (world.ceiling_z - h) / dz;
        }
      }
      if (!std::isfinite(t) || t <= 0.0) continue;
      const std::size_t idx = static_cast<std::size_t>(v) * k.width + u;
      truth[idx] = {xn * t, yn * t, t};
      fr.valid_mask[idx] = 1;
    }
  }

  // Visible landmarks are established on the noiseless render. A pixel shows
  // at most one landmark, the one projecting closest to its center, and its
  // pointmap entry is the landmark itself.
  std::map<std::pair<int, int>, std::tuple<double, std::uint32_t, Eigen::Vector3d>> best_at_pixel;
  for (const auto& lm : world.landmarks) {
    const Vec2 l2 = lm.position.head<2>();
    if ((origin - l2).dot(lm.normal) <= 0.0) continue;
    const Eigen::Vector3d pc = camera_from_world(pose, lm.position);
    if (pc.z() <= 0.05) continue;
    const double uf = f * pc.x() / pc.z() + 0.5 * k.width - 0.5;
    const double vf = f * pc.y() / pc.z() + 0.5 * k.height - 0.5;
    const long u = std::lround(uf);
    const long v = std::lround(vf);
    if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
    if (!world.line_of_sight(origin, l2, lm.wall)) continue;
    const std::size_t idx = static_cast<std::size_t>(v) * k.width + static_cast<std::size_t>(u);
    if (!fr.valid_mask[idx]) continue;
    const double err = std::hypot(uf - static_cast<double>(u), vf - static_cast<double>(v));
    const auto key = std::pair{static_cast<int>(u), static_cast<int>(v)};
    auto it = best_at_pixel.find(key);
    if (it == best_at_pixel.end() || err < std::get<0>(it->second)) best_at_pixel[key] = {err, lm.id, pc};
  }
  for (const auto& [px, entry] : best_at_pixel) {
    obs.visible_landmarks.push_back({std::get<1>(entry), PixelCoord{px.first, px.second}});
    truth[static_cast<std::size_t>(px.second) * k.width + static_cast<std::size_t>(px.first)] = std::get<2>(entry);
  }
  std::sort(obs.visible_landmarks.begin(), obs.visible_landmarks.end(),
            [](const auto& a, const auto& b) { return a.landmark_id < b.landmark_id; });

  std::mt19937_64 rng(mix_seed(noise.seed, 0x706f696e746d6170ULL));
  double scale = 1.0;
  if (noise.scale_jitter > 0.0) {
    scale = std::uniform_real_distribution<double>(1.0 - noise.scale_jitter,
                                                   1.0 + noise.scale_jitter)(rng);
  }
  obs.scale = scale;
  std::normal_distribution<double> gauss(0.0, noise.point_sigma > 0.0 ? noise.point_sigma : 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!fr.valid_mask[i]) continue;
    Eigen::Vector3d p = scale * truth[i];
    if (noise.point_sigma > 0.0) p += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    if (p.z() <= 1e-3) {
      fr.valid_mask[i] = 0;
      continue;
    }
    fr.pointmap[i] = p.cast<float>();
  }
  // A landmark whose pixel lost validity to noise is no longer observable.
  std::erase_if(obs.visible_landmarks,
                [&](const VisibleLandmark& vl) { return !fr.valid(vl.pixel); });
  return obs;
}

PairRecord oracle_match(const FrameObservation& obs_a, const FrameObservation& obs_b,
                        const NoiseKnobs& noise) {
  PairRecord pair;
  pair.frame_i = obs_a.frame.frame_id;
  pair.frame_j = obs_b.frame.frame_id;
  std::unordered_map<std::uint32_t, PixelCoord> in_b;
  in_b.reserve(obs_b.visible_landmarks.size());
  for (const auto& vl : obs_b.visible_landmarks) in_b.emplace(vl.landmark_id, vl.pixel);
  for (const auto& vl : obs_a.visible_landmarks) {
    auto it = in_b.find(vl.landmark_id);
    if (it == in_b.end()) continue;
    if (noise.match_dropout > 0.0 &&
        hash_uniform(mix_seed(noise.seed, vl.landmark_id)) < noise.match_dropout) {
      continue;
    }
    pair.matches.push_back({vl.pixel, it->second, 1.0f});
  }
  return pair;
}

// ---------------------------------------------------------------------------
// Traversals

double polyline_length(const std::vector<Vec2>& points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

std::vector<Pose> sample_route(const std::vector<Vec2>& route, double spacing,
                               double max_yaw_step) {
  if (route.empty()) throw Error(ErrorCode::InvalidArgument, "empty route");
  if (!(spacing > 0.0)) throw Error(ErrorCode::InvalidArgument, "spacing must be positive");
  std::vector<Vec2> pts;
  for (const auto& p : route) {
    if (pts.empty() || (p - pts.back()).norm() > 1e-9) pts.push_back(p);
  }
  std::vector<Pose> poses;
  if (pts.size() == 1) {
    poses.push_back({pts[0].x(), pts[0].y(), 0.0});
    return poses;
  }
  auto heading = [&](std::size_t k) {
    const Vec2 d = pts[k + 1] - pts[k];
    return std::atan2(d.y(), d.x());
  };
  double yaw = heading(0);
  poses.push_back({pts[0].x(), pts[0].y(), yaw});
  double seg_start = 0.0;
  long next = 1;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double seg_yaw = heading(k);
    const double delta = geom::wrap_angle(seg_yaw - yaw);
    if (std::abs(delta) > 1e-12) {
      const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(delta) / max_yaw_step)));
      for (int i = 1; i <= steps; ++i) {
        const double y = i == steps ? seg_yaw : geom::wrap_angle(yaw + delta * i / steps);
        poses.push_back({pts[k].x(), pts[k].y(), y});
      }
      yaw = seg_yaw;
    }
    const double len = (pts[k + 1] - pts[k]).norm();
    const Vec2 dir = (pts[k + 1] - pts[k]) / len;
    while (next * spacing <= seg_start + len + 1e-9) {
      const double along = std::min(next * spacing - seg_start, len);
      const Vec2 p = pts[k] + along * dir;
      poses.push_back({p.x(), p.y(), seg_yaw});
      ++next;
    }
    seg_start += len;
  }
  const Vec2 end = pts.back();
  if ((poses.back().position() - end).norm() > 1e-9) poses.push_back({end.x(), end.y(), yaw});
  return poses;
}

Traversal generate_traversal(const World& world, const std::vector<Vec2>& route, double spacing,
                             const Intrinsics& k, int window, const NoiseKnobs& noise,
                             const TraversalOptions& options) {
  if (window < 1) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (!world.bounds.contains(route[i]) || world.clearance(route[i]) < kRobotRadius) {
      throw Error(ErrorCode::UnreachableRoute, "route waypoint " + std::to_string(i) +
                                                   " is not in free space");
    }
    if (i > 0 && world.clearance(Segment{route[i - 1], route[i]}) < kRobotRadius) {
      throw Error(ErrorCode::UnreachableRoute,
                  "route leg " + std::to_string(i - 1) + " crosses or grazes a wall");
    }
  }
  Traversal tr;
  tr.poses = sample_route(route, spacing, options.max_yaw_step);
  const auto n = tr.poses.size();
  tr.observations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    NoiseKnobs frame_noise = noise;
    frame_noise.seed = mix_seed(noise.seed, i);
    tr.observations.push_back(
        render_frame(world, tr.poses[i], k, frame_noise, static_cast<std::uint32_t>(i)));
  }
  auto& b = tr.bundle;
  b.window_size = window;
  for (const auto& obs : tr.observations) b.frames.push_back(obs.frame);
  for (std::size_t t = 1; t < n; ++t) {
    for (int d = 1; d <= window && static_cast<std::size_t>(d) <= t; ++d) {
      NoiseKnobs pair_noise = noise;
      pair_noise.seed = mix_seed(mix_seed(noise.seed, 0x7061697273ULL + t), d);
      b.pairs.push_back(oracle_match(tr.observations[t], tr.observations[t - d], pair_noise));
    }
  }
  b.meta["generator"] = "waypixel-synthworld 1";
  b.meta["world_seed"] = std::to_string(world.seed);
  b.meta["layout"] = to_string(world.layout);
  b.meta["noise_seed"] = std::to_string(noise.seed);
  b.meta["point_sigma"] = std::to_string(noise.point_sigma);
  b.meta["scale_jitter"] = std::to_string(noise.scale_jitter);
  b.meta["match_dropout"] = std::to_string(noise.match_dropout);
  return tr;
}

// ---------------------------------------------------------------------------
// Robot

StepResult step_robot(const World& world, const Pose& pose, const Command& command) {
  Pose next = pose;
  next.yaw = geom::wrap_angle(pose.yaw + command.turn);
  const Vec2 dir{std::cos(next.yaw), std::sin(next.yaw)};
  const Vec2 end = pose.position() + command.forward * dir;
  if (world.clearance(Segment{pose.position(), end}) < kRobotRadius) return {pose, true};
  next.x = end.x();
  next.y = end.y();
  return {next, false};
}

// ---------------------------------------------------------------------------
// Geodesics

GeodesicMap::GeodesicMap(const World& world, double radius)
    : walls_(world.walls), radius_(radius) {
  const double rho = 1.15 * radius + 0.02;
  for (const auto& w : walls_) {
    for (const Vec2& e : {w.a, w.b}) {
      for (int k = 0; k < 8; ++k) {
        const double a = k * std::numbers::pi / 4.0;
        const Vec2 p = e + rho * Vec2(std::cos(a), std::sin(a));
        if (!world.bounds.contains(p) || world.clearance(p) < radius_) continue;
        const bool dup = std::any_of(vertices_.begin(), vertices_.end(),
                                     [&](const Vec2& q) { return (q - p).norm() < 1e-9; });
        if (!dup) vertices_.push_back(p);
      }
    }
  }
  adjacency_.resize(vertices_.size());
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    for (std::size_t j = i + 1; j < vertices_.size(); ++j) {
      if (!visible(vertices_[i], vertices_[j])) continue;
      const double d = (vertices_[i] - vertices_[j]).norm();
      adjacency_[i].emplace_back(static_cast<int>(j), d);
      adjacency_[j].emplace_back(static_cast<int>(i), d);
    }
  }
}

bool GeodesicMap::visible(const Vec2& a, const Vec2& b) const {
  const Segment s{a, b};
  for (const auto& w : walls_) {
    if (geom::segment_segment_distance(s, w) < radius_ - 1e-6) return false;
  }
  return true;
}

std::vector<Vec2> GeodesicMap::path(const Vec2& a, const Vec2& b) const {
  if (visible(a, b)) return {a, b};
  // Vertex indices: [0, n) graph vertices, n = a, n + 1 = b.
  const int n = static_cast<int>(vertices_.size());
  const int src = n;
  const int dst = n + 1;
  std::vector<std::vector<std::pair<int, double>>> extra(n + 2);
  for (int i = 0; i < n; ++i) {
    if (visible(a, vertices_[i])) extra[src].emplace_back(i, (a - vertices_[i]).norm());
    if (visible(vertices_[i], b)) extra[i].emplace_back(dst, (b - vertices_[i]).norm());
  }
  std::vector<double> dist(n + 2, std::numeric_limits<double>::infinity());
  std::vector<int> prev(n + 2, -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.emplace(0.0, src);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == dst) break;
    auto relax = [&](int v, double w) {
      if (d + w < dist[v]) {
        dist[v] = d + w;
        prev[v] = u;
        pq.emplace(dist[v], v);
      }
    };
    if (u < n) {
      for (const auto& [v, w] : adjacency_[u]) relax(v, w);
    }
    for (const auto& [v, w] : extra[u]) relax(v, w);
  }
  if (!std::isfinite(dist[dst])) return {};
  std::vector<Vec2> out;
  for (int v = dst; v != -1; v = prev[v]) {
    out.push_back(v == src ? a : v == dst ? b : vertices_[v]);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double GeodesicMap::distance(const Vec2& a, const Vec2& b) const {
  const auto p = path(a, b);
  if (p.empty()) return std::numeric_limits<double>::infinity();
  return polyline_length(p);
}

}  // namespace waypixel::synth
