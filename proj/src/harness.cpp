#include "waypixel/harness.hpp"

#include "waypixel/error.hpp"
#include "waypixel/hash.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace waypixel::harness {

using synth::Pose;
using synth::World;

std::string to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Imitate: return "imitate";
    case TaskKind::AltGoal: return "altgoal";
    case TaskKind::Shortcut: return "shortcut";
    case TaskKind::Reverse: return "reverse";
  }
  return "?";
}

TaskKind parse_task(const std::string& text) {
  if (text == "imitate") return TaskKind::Imitate;
  if (text == "altgoal") return TaskKind::AltGoal;
  if (text == "shortcut") return TaskKind::Shortcut;
  if (text == "reverse") return TaskKind::Reverse;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + text + "'");
}

std::string to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::None: return "none";
    case FailureReason::Timeout: return "timeout";
    case FailureReason::NoTargetStall: return "no-target-stall";
  }
  return "?";
}

PipelineConfig::PipelineConfig() {
  graph.window = 0;
  controller.turn_gain = 0.5;
}

// ---------------------------------------------------------------------------
// Tasks

namespace {

constexpr double kGoalOffset = 0.45;  // goal position sits this far off its wall
constexpr double kMinGeodesic = 5.0;

bool is_multi_room(const World& world) { return world.rooms.size() >= 2; }

double corridor_lane(const World& world) { return world.corridor.center().y(); }

/// Pixels of each frame that take part in at least one correspondence.
std::vector<std::set<PixelCoord>> matched_pixels(const MatchBundle& bundle) {
  std::vector<std::set<PixelCoord>> out(bundle.frames.size());
  for (const auto& pair : bundle.pairs) {
    for (const auto& m : pair.matches) {
      out[pair.frame_i].insert(m.pixel_i);
      out[pair.frame_j].insert(m.pixel_j);
    }
  }
  return out;
}

struct GoalCandidate {
  std::uint32_t landmark = 0;
  std::uint32_t frame = 0;
  PixelCoord pixel;
  Vec2 position;
  double score = 0.0;
};

Vec2 goal_point(const synth::Landmark& lm) { return lm.position.head<2>() + kGoalOffset * lm.normal; }

bool goal_point_free(const World& world, const Vec2& p) {
  return world.bounds.contains(p, 0.3) && world.clearance(p) >= synth::kRobotRadius + 0.1;
}

/// Graph-node landmarks of `frame` with a free goal point, scored by `score`
/// (lower is better); `keep` filters candidates.
template <class Keep, class Score>
std::vector<GoalCandidate> frame_candidates(const Episode& ep, const std::vector<std::set<PixelCoord>>& matched,
                                            std::uint32_t frame, Keep keep, Score score) {
  std::vector<GoalCandidate> out;
  const auto& obs = ep.mapping.observations[frame];
  for (const auto& vl : obs.visible_landmarks) {
    if (!matched[frame].count(vl.pixel)) continue;
    const auto& lm = ep.world.landmarks[vl.landmark_id];
    const Vec2 g = goal_point(lm);
    if (!goal_point_free(ep.world, g) || !keep(lm, vl)) continue;
    out.push_back({vl.landmark_id, frame, vl.pixel, g, score(lm, vl)});
  }
  std::sort(out.begin(), out.end(), [](const GoalCandidate& a, const GoalCandidate& b) {
    return std::tie(a.score, a.landmark) < std::tie(b.score, b.landmark);
  });
  return out;
}

double trajectory_length(const std::vector<Pose>& poses, std::size_t from) {
  double total = 0.0;
  for (std::size_t i = from + 1; i < poses.size(); ++i) {
    total += (poses[i].position() - poses[i - 1].position()).norm();
  }
  return total;
}

void set_goal(Episode& ep, const GoalCandidate& c) {
  ep.goal_landmark = c.landmark;
  ep.goal_node = {c.frame, c.pixel.u, c.pixel.v};
  ep.goal_position = c.position;
}

/// Landmark on the wall the last mapping frame faces, near the image centre.
GoalCandidate end_goal(const Episode& ep, const std::vector<std::set<PixelCoord>>& matched,
                       std::mt19937_64& rng) {
  const auto last = static_cast<std::uint32_t>(ep.mapping.poses.size() - 1);
  const auto& pose = ep.mapping.poses[last];
  const Vec2 fwd{std::cos(pose.yaw), std::sin(pose.yaw)};
  const int half_w = ep.mapping.bundle.frames[last].width / 2;
  auto cands = frame_candidates(
      ep, matched, last, [&](const synth::Landmark& lm, const synth::VisibleLandmark&) {
        return lm.normal.dot(fwd) < -0.7;
      },
      [&](const synth::Landmark&, const synth::VisibleLandmark& vl) {
        return std::abs(vl.pixel.u + 0.5 - half_w);
      });
  if (cands.empty()) throw Error(ErrorCode::TaskInfeasible, "no goal landmark at the route end");
  const std::size_t pick = std::min<std::size_t>(cands.size(), 5);
  return cands[rng() % pick];
}

std::vector<Vec2> imitate_route(const World& world, std::mt19937_64& rng) {
  const double w = world.bounds.max.x();
  const double l = world.bounds.max.y();
  if (is_multi_room(world)) {
    const double lane = corridor_lane(world);
    const auto& room = world.rooms[rng() % world.rooms.size()];
    const double dx = room.door->x();
    const double x0 = dx < 0.5 * w ? w - 0.8 : 0.8;
    return {{x0, lane}, {dx, lane}, {dx, l - 1.2}};
  }
  std::uniform_real_distribution<double> jitter(-0.15, 0.15);
  if (l >= w) {
    const double x = w * (0.5 + jitter(rng));
    return {{x, 0.8}, {x, l - 1.2}};
  }
  const double y = l * (0.5 + jitter(rng));
  return {{0.8, y}, {w - 1.2, y}};
}

void render_mapping(Episode& ep, const PipelineConfig& cfg) {
  synth::NoiseKnobs noise = cfg.noise;
  noise.seed = mix_seed(cfg.noise.seed, mix_seed(ep.seed, 0x6d6170ULL));
  ep.mapping = synth::generate_traversal(ep.world, ep.route, cfg.map_spacing, cfg.intrinsics,
                                         cfg.window, noise);
}

}  // namespace

std::vector<Vec2> default_route(const World& world, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x726f757465ULL));
  return imitate_route(world, rng);
}

Episode make_task(const World& world, TaskKind task, std::uint64_t seed, const PipelineConfig& cfg) {
  if ((task == TaskKind::AltGoal || task == TaskKind::Shortcut) && !is_multi_room(world)) {
    throw Error(ErrorCode::TaskInfeasible, to_string(task) + " needs a world with at least two rooms");
  }
  Episode ep;
  ep.world = world;
  ep.task = task;
  ep.seed = seed;
  ep.step_limit = cfg.max_steps;
  ep.success_radius = cfg.success_radius;
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(task) + 0x7461736bULL));
  const synth::GeodesicMap geo(world);
  const double w = world.bounds.max.x();

  switch (task) {
    case TaskKind::Imitate: {
      ep.route = default_route(world, seed);
      render_mapping(ep, cfg);
      const auto matched = matched_pixels(ep.mapping.bundle);
      set_goal(ep, end_goal(ep, matched, rng));
      std::vector<std::size_t> starts;
      for (std::size_t i = 0; i < ep.mapping.poses.size(); ++i) {
        if (geo.distance(ep.mapping.poses[i].position(), ep.goal_position) >= kMinGeodesic) {
          starts.push_back(i);
        }
      }
      if (starts.empty()) throw Error(ErrorCode::TaskInfeasible, "route shorter than 5 m");
      ep.start_index = starts[rng() % starts.size()];
      break;
    }
    case TaskKind::Reverse: {
      ep.route = default_route(world, seed);
      render_mapping(ep, cfg);
      const auto matched = matched_pixels(ep.mapping.bundle);
      const Vec2 first = ep.mapping.poses.front().position();
      auto cands = frame_candidates(
          ep, matched, 0, [](const auto&, const auto&) { return true; },
          [&](const synth::Landmark& lm, const synth::VisibleLandmark&) {
            return (goal_point(lm) - first).norm();
          });
      if (cands.empty()) throw Error(ErrorCode::TaskInfeasible, "first frame has no goal landmark");
      set_goal(ep, cands.front());
      ep.goal_position = first;
      ep.start_index = ep.mapping.poses.size() - 1;
      break;
    }
    case TaskKind::AltGoal: {
      const double lane = corridor_lane(world);
      const bool rightwards = rng() % 2 == 0;
      ep.route = rightwards ? std::vector<Vec2>{{0.8, lane}, {w - 0.8, lane}}
                            : std::vector<Vec2>{{w - 0.8, lane}, {0.8, lane}};
      render_mapping(ep, cfg);
      const auto matched = matched_pixels(ep.mapping.bundle);
      const Vec2 start = ep.mapping.poses.front().position();
      std::vector<GoalCandidate> cands;
      std::set<std::uint32_t> seen;
      for (std::uint32_t f = 0; f < ep.mapping.poses.size(); ++f) {
        auto fc = frame_candidates(
            ep, matched, f,
            [&](const synth::Landmark&, const synth::VisibleLandmark& vl) {
              const Vec2 g = goal_point(world.landmarks[vl.landmark_id]);
              return !world.corridor.contains(g, -0.5) && geo.distance(start, g) >= kMinGeodesic;
            },
            [&](const synth::Landmark& lm, const synth::VisibleLandmark&) {
              return (lm.position.head<2>() - ep.mapping.poses[f].position()).norm();
            });
        for (const auto& c : fc) {
          if (seen.insert(c.landmark).second) cands.push_back(c);
        }
      }
      if (cands.empty()) throw Error(ErrorCode::TaskInfeasible, "no side-room landmark seen from the route");
      set_goal(ep, cands[rng() % cands.size()]);
      ep.start_index = 0;
      break;
    }
    case TaskKind::Shortcut: {
      // Perimeter loop inside one room, then out through its door and along
      // the corridor; the diagonal across the room is free.
      const double lane = corridor_lane(world);
      const auto& room = world.rooms[rng() % world.rooms.size()];
      const bool rightwards = rng() % 2 == 0;
      const double x_near = rightwards ? room.area.min.x() + 0.9 : room.area.max.x() - 0.9;
      const double x_far = rightwards ? room.area.max.x() - 0.9 : room.area.min.x() + 0.9;
      const double y_top = room.area.max.y() - 0.9;
      const double y_low = room.area.min.y() + 0.9;
      const double dx = room.door->x();
      const double x_end = rightwards ? w - 0.8 : 0.8;
      ep.route = {{x_near, y_top}, {x_far, y_top}, {x_far, y_low}, {dx, y_low}, {dx, lane}, {x_end, lane}};
      render_mapping(ep, cfg);
      const auto matched = matched_pixels(ep.mapping.bundle);
      set_goal(ep, end_goal(ep, matched, rng));
      ep.start_index = 0;
      break;
    }
  }
  ep.start = ep.mapping.poses[ep.start_index];
  ep.geodesic_length = geo.distance(ep.start.position(), ep.goal_position);
  ep.mapping_length = trajectory_length(ep.mapping.poses, ep.start_index);
  if (!(ep.geodesic_length >= kMinGeodesic) || !std::isfinite(ep.geodesic_length)) {
    throw Error(ErrorCode::TaskInfeasible, "start and goal closer than 5 m");
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Offline map

MapContext build_map(const Episode& ep, const PipelineConfig& cfg) {
  MapContext ctx;
  ctx.graph = build_graph(ep.mapping.bundle, cfg.graph);
  // With subsampling the goal pixel may not survive; fall back to the node of
  // the goal frame nearest to it in that frame's pointmap.
  ctx.goal = ep.goal_node;
  if (!ctx.graph.find(ctx.goal)) {
    const auto& frame = ep.mapping.bundle.frames[ep.goal_node.frame];
    const auto& members = ep.goal_node.frame < ctx.graph.per_frame.size()
                              ? ctx.graph.per_frame[ep.goal_node.frame]
                              : std::vector<std::uint32_t>{};
    if (members.empty()) throw Error(ErrorCode::GoalNotInGraph, "goal frame has no graph nodes");
    const auto& gp = frame.point(ep.goal_node.pixel());
    std::uint32_t best = members.front();
    for (auto n : members) {
      if ((ctx.graph.points[n] - gp).norm() < (ctx.graph.points[best] - gp).norm()) best = n;
    }
    ctx.goal = ctx.graph.nodes[best];
  }
  const auto t0 = std::chrono::steady_clock::now();
  ctx.field = std::make_shared<const CostField>(goal_costs(ctx.graph, ctx.goal));
  ctx.dijkstra_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ctx;
}

// ---------------------------------------------------------------------------
// Episode loop

namespace {

std::uint32_t oracle_index(const std::vector<Pose>& poses, const Pose& pose) {
  std::uint32_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < poses.size(); ++i) {
    const double score = (poses[i].position() - pose.position()).norm() +
                         0.1 * std::abs(geom::wrap_angle(poses[i].yaw - pose.yaw));
    if (score <= best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

constexpr std::size_t kObstacleMemorySteps = 12;

Vec2 to_world(const Pose& pose, const Vec2& local) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return {pose.x + c * local.x() - s * local.y(), pose.y + s * local.x() + c * local.y()};
}

Vec2 to_robot(const Pose& pose, const Vec2& world) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  const Vec2 d = world - pose.position();
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

struct PlannedStep {
  WayPixelCostmap costmap;
  SparseCostmap sparse;
};

nlohmann::json finite_or_null(std::optional<double> v) {
  return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json pose_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}}; }

}  // namespace

std::pair<EpisodeOutcome, EpisodeTrace> run_episode(const Episode& ep, const PipelineConfig& cfg,
                                                    const RunOptions& options) {
  std::optional<MapContext> owned;
  const MapContext* map = options.map;
  if (map == nullptr) {
    owned = build_map(ep, cfg);
    map = &*owned;
  }
  const auto& poses = ep.mapping.poses;
  const auto& map_frames = ep.mapping.bundle.frames;
  const synth::GeodesicMap geo(ep.world);

  EpisodeOutcome out;
  EpisodeTrace trace;
  Pose pose = ep.start;
  LocalizationState loc;
  loc.current_index = static_cast<std::uint32_t>(ep.start_index);
  std::optional<PlannedStep> previous;
  int reuse_count = 0;
  bool last_collided = false;
  std::vector<Vec2> memory;
  std::deque<std::size_t> memory_sizes;
  double last_turn_sign = 1.0;
  const std::uint64_t run_seed = mix_seed(cfg.noise.seed, mix_seed(ep.seed, 0x72756eULL));

  auto at_goal = [&](const Pose& p) { return (p.position() - ep.goal_position).norm() <= ep.success_radius; };

  int step = 0;
  for (; step < ep.step_limit && !at_goal(pose); ++step) {
    TraceStep ts;
    ts.step = step;
    ts.pose = pose;

    synth::NoiseKnobs qnoise = cfg.noise;
    qnoise.seed = mix_seed(run_seed, 0x7175657279ULL + static_cast<std::uint64_t>(step));
    const std::uint32_t query_id = static_cast<std::uint32_t>(map_frames.size());
    const auto query = synth::render_frame(ep.world, pose, cfg.intrinsics, qnoise, query_id);

    std::optional<PlannedStep> planned;
    try {
      if (cfg.localizer.mode == LocalizerMode::Oracle) loc.current_index = oracle_index(poses, pose);
      const auto submap =
          build_submap({loc.current_index, cfg.localizer.radius, cfg.localizer.subsample}, poses.size());
      std::vector<FrameMatches> fm;
      std::vector<std::pair<std::uint32_t, std::size_t>> counts;
      for (auto f : submap) {
        synth::NoiseKnobs mnoise = cfg.noise;
        mnoise.seed = mix_seed(qnoise.seed, f);
        auto pair = synth::oracle_match(query, ep.mapping.observations[f], mnoise);
        counts.emplace_back(f, pair.matches.size());
        if (!pair.matches.empty()) fm.push_back({f, std::move(pair.matches)});
      }
      if (cfg.localizer.mode == LocalizerMode::Matched) {
        loc = localize(counts, loc);
      } else if (fm.empty()) {
        throw Error(ErrorCode::NoMatches, "query matched no submap frame");
      }
      const auto sel = select_reference(map->graph, *map->field, map_frames, fm);
      PlannedStep ps;
      ps.sparse = sparse_costmap(query_id, sel.selected());
      ps.costmap = densify_costmap(ps.sparse, query.frame, cfg.densify);
      ts.reference = sel.reference;
      ts.sparse_pixels = ps.sparse.entries.size();
      planned = std::move(ps);
      previous = planned;
      reuse_count = 0;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoMatches && e.code() != ErrorCode::NoLocalizedFrame &&
          e.code() != ErrorCode::EmptySparseSet && e.code() != ErrorCode::NoReachableNode) {
        throw;
      }
      if (previous && reuse_count < cfg.reuse_costmap_steps) {
        ++reuse_count;
        planned = previous;
        ts.fallback = "reuse-costmap";
      } else {
        ts.fallback = "rotate";
      }
    }
    ts.localized_index = loc.current_index;

    // Obstacles seen over the last steps, kept in world coordinates via odometry.
    if (cfg.controller.path_clearance > 0.0) {
      if (memory_sizes.size() == kObstacleMemorySteps) {
        memory.erase(memory.begin(), memory.begin() + static_cast<long>(memory_sizes.front()));
        memory_sizes.pop_front();
      }
      const auto seen = visible_obstacles(query.frame, cfg.controller.nav);
      for (const auto& o : seen) memory.push_back(to_world(pose, o));
      memory_sizes.push_back(seen.size());
    }

    synth::Command cmd;
    if (options.controller) {
      cmd = options.controller(planned ? &planned->costmap : nullptr, query.frame, pose);
    } else if (planned) {
      try {
        const auto mask = navigable_mask(query.frame, cfg.controller.nav);
        std::vector<Vec2> remembered;
        for (const auto& p : memory) remembered.push_back(to_robot(pose, p));
        const auto rollout = plan_rollout(planned->costmap, query.frame, mask, cfg.controller, remembered);
        const auto cc = waypoint_to_control(rollout, cfg.controller);
        ts.target = rollout.target;
        ts.first_waypoint = rollout.waypoints.front();
        if (std::abs(cc.turn) > 1e-9) last_turn_sign = cc.turn > 0 ? 1.0 : -1.0;
        const Eigen::Vector3d footprint(0.0, cfg.controller.nav.sensor_height, 0.0);
        const double here = propagate_cost(planned->sparse, query.frame, footprint);
        ts.target_cost = rollout.target_cost;
        ts.footprint_cost = here;
        const double drop = cfg.descent_margin * ground_range(query.frame.point(rollout.target));
        if (cfg.descent_check && rollout.target_cost > here - drop) {
          cmd = {0.0, last_turn_sign * cfg.controller.search_turn};
          ts.fallback = "uphill-rotate";
        } else if (last_collided) {
          cmd = {0.0, last_turn_sign * cfg.controller.search_turn};
          ts.fallback = "collision-rotate";
        } else {
          cmd = {cc.forward, cc.turn};
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoNavigableTarget) throw;
        ts.fallback = "rotate";
      }
    }
    if (!options.controller && !ts.fallback.empty() && ts.fallback != "uphill-rotate" &&
        ts.fallback != "collision-rotate" && ts.fallback != "reuse-costmap") {
      cmd = {0.0, last_turn_sign * cfg.controller.search_turn};
    }
    if (!ts.fallback.empty()) ++out.fallback_steps;

    const auto res = synth::step_robot(ep.world, pose, cmd);
    ts.command = cmd;
    ts.collided = res.collided;
    if (res.collided) {
      ++out.collisions;
    } else {
      out.path_length += std::abs(cmd.forward);
    }
    last_collided = res.collided;
    pose = res.pose;
    if (cfg.trace && planned) {
      ts.costmap.assign(planned->costmap.cost.begin(), planned->costmap.cost.end());
    }
    trace.steps.push_back(std::move(ts));
  }
  out.steps = step;
  out.success = at_goal(pose);
  out.failure = out.success ? FailureReason::None : FailureReason::Timeout;
  out.remaining_geodesic = std::max(0.0, geo.distance(pose.position(), ep.goal_position));
  if (!std::isfinite(out.remaining_geodesic)) out.remaining_geodesic = ep.geodesic_length;
  trace.final_pose = pose;
  return {out, trace};
}

nlohmann::json EpisodeTrace::to_json() const {
  nlohmann::json j;
  j["final_pose"] = pose_json(final_pose);
  auto& arr = j["steps"] = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json e;
    e["step"] = s.step;
    e["pose"] = pose_json(s.pose);
    e["localized_index"] = s.localized_index;
    e["reference"] = s.reference ? nlohmann::json(*s.reference) : nlohmann::json();
    e["target"] = s.target ? nlohmann::json({s.target->u, s.target->v}) : nlohmann::json();
    e["first_waypoint"] = s.first_waypoint
                              ? nlohmann::json({s.first_waypoint->x_forward, s.first_waypoint->y_left})
                              : nlohmann::json();
    e["command"] = {{"forward", s.command.forward}, {"turn", s.command.turn}};
    e["collided"] = s.collided;
    e["fallback"] = s.fallback;
    e["sparse_pixels"] = s.sparse_pixels;
    e["target_cost"] = finite_or_null(s.target_cost);
    e["footprint_cost"] = finite_or_null(s.footprint_cost);
    if (!s.costmap.empty()) {
      nlohmann::json cm = nlohmann::json::array();
      for (float c : s.costmap) cm.push_back(std::isfinite(c) ? nlohmann::json(c) : nlohmann::json());
      e["costmap"] = std::move(cm);
    }
    arr.push_back(std::move(e));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Metrics

MetricsReport compute_metrics(const std::vector<EpisodeOutcome>& outcomes,
                              const std::vector<Episode>& episodes) {
  if (outcomes.size() != episodes.size()) {
    throw Error(ErrorCode::InvalidArgument, "outcomes and episodes are not aligned");
  }
  MetricsReport r;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const double l = episodes[i].geodesic_length;
    const double denom = std::max(l, o.path_length);
    const double eff = denom > 0.0 ? l / denom : 1.0;
    const double progress = l > 0.0 ? std::max(0.0, 1.0 - o.remaining_geodesic / l) : 1.0;
    EpisodeMetrics m;
    m.spl = (o.success ? 1.0 : 0.0) * eff;
    m.sspl = progress * eff;
    r.episodes.push_back(m);
    r.mean_spl += m.spl;
    r.mean_sspl += m.sspl;
    r.success_rate += o.success ? 1.0 : 0.0;
    ++r.counts_per_task[to_string(episodes[i].task)];
  }
  if (!outcomes.empty()) {
    const double n = static_cast<double>(outcomes.size());
    r.mean_spl /= n;
    r.mean_sspl /= n;
    r.success_rate /= n;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Suites

std::size_t worker_count() {
  std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("WAYPIXEL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = static_cast<std::size_t>(v);
  }
  return hw;
}

synth::WorldSpec default_suite_world(std::size_t k, std::uint64_t seed) {
  synth::WorldSpec spec;
  spec.seed = mix_seed(seed, k);
  spec.landmark_density = 10.0;
  if (k % 2 == 0) {
    spec.layout = synth::LayoutKind::Corridor;
    spec.width = 5.0;
    spec.length = 18.0;
  } else {
    spec.layout = synth::LayoutKind::CorridorThreeRooms;
    spec.width = 12.0;
    spec.length = 9.0;
  }
  return spec;
}

template <class Fn>
void parallel_for(std::size_t n, Fn fn) {
  const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SuiteResult run_suite(const SuiteSpec& suite, const PipelineConfig& cfg) {
  SuiteResult res;
  res.episodes.resize(suite.episodes);
  res.outcomes.resize(suite.episodes);
  res.traces.resize(suite.episodes);
  parallel_for(suite.episodes, [&](std::size_t k) {
    const auto spec = suite.world ? suite.world(k) : default_suite_world(k, suite.seed);
    const auto world = synth::build_world(spec);
    auto ep = make_task(world, suite.task, mix_seed(suite.seed, 0x65700000ULL + k), cfg);
    auto [outcome, trace] = run_episode(ep, cfg);
    res.outcomes[k] = outcome;
    if (cfg.trace) res.traces[k] = std::move(trace);
    res.episodes[k] = std::move(ep);
  });
  res.metrics = compute_metrics(res.outcomes, res.episodes);
  return res;
}

// ---------------------------------------------------------------------------
// Benchmark

std::string BenchSetting::name() const {
  std::string s = strategy_name(strategy, knn_k);
  if (subsample != 1) s += "/sub" + std::to_string(subsample);
  if (merge) s += "+merge";
  return s;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

NodeKey default_goal(const PixelGraph& g) {
  for (std::size_t f = g.per_frame.size(); f-- > 0;) {
    if (!g.per_frame[f].empty()) return g.nodes[g.per_frame[f].front()];
  }
  throw Error(ErrorCode::EmptyGraph, "graph has no nodes");
}

}  // namespace

BenchRow benchmark_setting(const MatchBundle& bundle, const BenchSetting& setting,
                           std::optional<NodeKey> goal, int repeats, std::uint64_t seed) {
  GraphBuildConfig gcfg;
  gcfg.strategy = setting.strategy;
  gcfg.knn_k = setting.knn_k;
  gcfg.subsample = setting.subsample;
  gcfg.seed = seed;
  std::vector<double> intra, weights, dijk;
  PixelGraph last;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    auto g = build_graph(bundle, gcfg);
    const auto timings = g.timings;
    if (setting.merge) g = merge_nodes(g);
    const NodeKey gk = goal && g.find(*goal) ? *goal : default_goal(g);
    const GraphAdjacency adj(g);
    const auto t0 = std::chrono::steady_clock::now();
    const auto field = goal_costs(g, adj, gk);
    dijk.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    intra.push_back(timings.intra_s);
    weights.push_back(timings.weights_s);
    last = std::move(g);
  }
  BenchRow row;
  row.setting = setting;
  row.stats = graph_stats(last, {median(intra), median(weights)}, median(dijk));
  return row;
}

std::vector<BenchRow> benchmark_graph(const MatchBundle& bundle, const std::vector<BenchSetting>& settings,
                                      std::optional<NodeKey> goal, int repeats) {
  std::vector<BenchRow> rows;
  for (const auto& s : settings) rows.push_back(benchmark_setting(bundle, s, goal, repeats));
  return rows;
}

std::string format_bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "setting" << std::right << std::setw(9) << "frames" << std::setw(10)
     << "nodes" << std::setw(12) << "intra" << std::setw(10) << "inter" << std::setw(12) << "bytes"
     << std::setw(11) << "t_intra" << std::setw(11) << "t_weight" << std::setw(11) << "t_dijk";
  const bool nav = std::any_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.navigation; });
  if (nav) os << std::setw(9) << "SR" << std::setw(9) << "SPL" << std::setw(9) << "SSPL";
  os << "\n";
  for (const auto& r : rows) {
    const auto& s = r.stats;
    os << std::left << std::setw(22) << r.setting.name() << std::right << std::setw(9)
       << s.num_frames_with_nodes << std::setw(10) << s.num_nodes << std::setw(12) << s.num_intra_edges
       << std::setw(10) << s.num_inter_edges << std::setw(12) << s.disk_bytes << std::fixed
       << std::setprecision(5) << std::setw(11) << s.time_intra_s << std::setw(11) << s.time_weights_s
       << std::setw(11) << s.time_dijkstra_s;
    if (r.navigation) {
      os << std::setprecision(3) << std::setw(9) << r.navigation->success_rate << std::setw(9)
         << r.navigation->mean_spl << std::setw(9) << r.navigation->mean_sspl;
    }
    os.unsetf(std::ios::fixed);
    os << "\n";
  }
  return os.str();
}

nlohmann::json bench_to_json(const std::vector<BenchRow>& rows) {
  nlohmann::json j;
  j["format"] = "waypixel-bench";
  j["version"] = 1;
  auto& arr = j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    const auto& s = r.stats;
    nlohmann::json e = {{"setting", r.setting.name()},
                        {"strategy", strategy_name(r.setting.strategy, r.setting.knn_k)},
                        {"subsample", r.setting.subsample},
                        {"merge", r.setting.merge},
                        {"frames", s.num_frames},
                        {"frames_with_nodes", s.num_frames_with_nodes},
                        {"nodes", s.num_nodes},
                        {"intra_edges", s.num_intra_edges},
                        {"inter_edges", s.num_inter_edges},
                        {"disk_bytes", s.disk_bytes},
                        {"time_intra_s", s.time_intra_s},
                        {"time_weights_s", s.time_weights_s},
                        {"time_dijkstra_s", s.time_dijkstra_s}};
    if (r.navigation) {
      e["navigation"] = {{"success_rate", r.navigation->success_rate},
                         {"mean_spl", r.navigation->mean_spl},
                         {"mean_sspl", r.navigation->mean_sspl}};
    }
    arr.push_back(std::move(e));
  }
  return j;
}

// ---------------------------------------------------------------------------
// World documents

WorldDocument parse_world_document(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string("waypixel-world")) != "waypixel-world" ||
        doc.value("version", 1) != 1) {
      throw Error(ErrorCode::SchemaViolation, "not a waypixel-world v1 document");
    }
    WorldDocument out;
    auto& w = out.world;
    w.layout = synth::parse_layout(doc.at("layout").get<std::string>());
    w.width = doc.at("width").get<double>();
    w.length = doc.at("length").get<double>();
    w.landmark_density = doc.value("landmark_density", w.landmark_density);
    w.ceiling_z = doc.value("ceiling", w.ceiling_z);
    w.seed = doc.value("seed", std::uint64_t{0});

    auto& p = out.pipeline;
    if (doc.contains("intrinsics")) {
      const auto& k = doc["intrinsics"];
      p.intrinsics.width = k.value("width", p.intrinsics.width);
      p.intrinsics.height = k.value("height", p.intrinsics.height);
      p.intrinsics.horizontal_fov =
          k.value("hfov_deg", p.intrinsics.horizontal_fov * 180.0 / std::numbers::pi) * std::numbers::pi / 180.0;
    }
    if (doc.contains("noise")) {
      const auto& n = doc["noise"];
      p.noise.point_sigma = n.value("point_sigma", 0.0);
      p.noise.scale_jitter = n.value("scale_jitter", 0.0);
      p.noise.match_dropout = n.value("match_dropout", 0.0);
      p.noise.seed = n.value("seed", std::uint64_t{0});
    }
    if (doc.contains("mapping")) {
      const auto& m = doc["mapping"];
      p.map_spacing = m.value("spacing", p.map_spacing);
      p.window = m.value("window", p.window);
    }
    if (doc.contains("graph")) {
      const auto& g = doc["graph"];
      if (g.contains("strategy")) parse_strategy(g["strategy"].get<std::string>(), p.graph);
      p.graph.subsample = g.value("subsample", p.graph.subsample);
      p.graph.merge_nodes = g.value("merge", p.graph.merge_nodes);
      p.graph.seed = g.value("seed", p.graph.seed);
    }
    if (doc.contains("localizer")) {
      const auto& l = doc["localizer"];
      if (l.contains("mode")) p.localizer.mode = parse_localizer_mode(l["mode"].get<std::string>());
      p.localizer.radius = l.value("radius", p.localizer.radius);
      p.localizer.subsample = l.value("subsample", p.localizer.subsample);
    }
    if (doc.contains("controller")) {
      const auto& c = doc["controller"];
      auto& cp = p.controller;
      cp.beta = c.value("beta", cp.beta);
      cp.nav.r_max = c.value("r_max", cp.nav.r_max);
      cp.nav.h_min = c.value("h_min", cp.nav.h_min);
      cp.nav.h_max = c.value("h_max", cp.nav.h_max);
      cp.path_clearance = c.value("path_clearance", cp.path_clearance);
      cp.max_forward = c.value("max_forward", cp.max_forward);
      cp.turn_gain = c.value("turn_gain", cp.turn_gain);
      cp.search_turn = c.value("search_turn", cp.search_turn);
      p.descent_check = c.value("descent_check", p.descent_check);
      p.descent_margin = c.value("descent_margin", p.descent_margin);
    }
    if (doc.contains("episode")) {
      const auto& e = doc["episode"];
      p.max_steps = e.value("max_steps", p.max_steps);
      p.success_radius = e.value("success_radius", p.success_radius);
      if (e.contains("densify")) {
        const auto mode = e["densify"].get<std::string>();
        if (mode != "pruned" && mode != "brute-force") {
          throw Error(ErrorCode::SchemaViolation, "densify must be 'pruned' or 'brute-force'");
        }
        p.densify = mode == "pruned" ? DensifyMode::Pruned : DensifyMode::BruteForce;
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("world document: ") + e.what());
  }
}

WorldDocument load_world_document(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
  }
  return parse_world_document(doc);
}

nlohmann::json outcome_to_json(const Episode& ep, const EpisodeOutcome& o, const EpisodeMetrics& m) {
  return {{"task", to_string(ep.task)},
          {"seed", ep.seed},
          {"world_seed", ep.world.seed},
          {"layout", synth::to_string(ep.world.layout)},
          {"start", pose_json(ep.start)},
          {"goal", {ep.goal_position.x(), ep.goal_position.y()}},
          {"goal_node", {ep.goal_node.frame, ep.goal_node.u, ep.goal_node.v}},
          {"geodesic_length", ep.geodesic_length},
          {"mapping_length", ep.mapping_length},
          {"success", o.success},
          {"path_length", o.path_length},
          {"remaining_geodesic", o.remaining_geodesic},
          {"steps", o.steps},
          {"collisions", o.collisions},
          {"fallback_steps", o.fallback_steps},
          {"failure", to_string(o.failure)},
          {"spl", m.spl},
          {"sspl", m.sspl}};
}

}  // namespace waypixel::harness
