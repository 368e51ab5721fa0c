#pragma once

#include "waypixel/controller.hpp"
#include "waypixel/localizer.hpp"
#include "waypixel/pixelgraph.hpp"
#include "waypixel/planner.hpp"
#include "waypixel/synthworld.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace waypixel::harness {

using geom::Vec2;

enum class TaskKind { Imitate, AltGoal, Shortcut, Reverse };

std::string to_string(TaskKind task);
TaskKind parse_task(const std::string& text);

struct PipelineConfig {
  synth::Intrinsics intrinsics;
  synth::NoiseKnobs noise;  // mapping renders, query renders and matching
  double map_spacing = 1.0;
  int window = 3;
  GraphBuildConfig graph;
  LocalizerConfig localizer;
  ControllerParams controller;
  DensifyMode densify = DensifyMode::Pruned;
  int max_steps = 300;
  double success_radius = 1.0;
  int reuse_costmap_steps = 3;
  /// Rotate in place instead of moving when the best target is not cheaper
  /// than the robot's own footprint.
  bool descent_check = true;
  /// Required cost drop per meter of target range for the descent check.
  double descent_margin = 0.0;
  bool trace = false;

  PipelineConfig();
};

struct Episode {
  synth::World world;
  TaskKind task = TaskKind::Imitate;
  std::uint64_t seed = 0;
  std::vector<Vec2> route;
  synth::Traversal mapping;
  std::size_t start_index = 0;  // mapping pose the start pose was taken from
  synth::Pose start;
  Vec2 goal_position{0.0, 0.0};
  std::uint32_t goal_landmark = 0;
  NodeKey goal_node;
  double geodesic_length = 0.0;  // shortest path start -> goal
  double mapping_length = 0.0;   // mapped trajectory length from start to its end
  int step_limit = 300;
  double success_radius = 1.0;
};

/// Lays out the mapping route, renders the prior traversal and picks start
/// and goal for the requested task.
Episode make_task(const synth::World& world, TaskKind task, std::uint64_t seed,
                  const PipelineConfig& cfg = {});

/// Offline map: the pixel graph built from the episode's mapping bundle and
/// the cost field towards the episode goal.
struct MapContext {
  PixelGraph graph;
  NodeKey goal;  // goal node actually present in the graph
  std::shared_ptr<const CostField> field;
  double dijkstra_s = 0.0;
};

MapContext build_map(const Episode& ep, const PipelineConfig& cfg);

enum class FailureReason { None, Timeout, NoTargetStall };

std::string to_string(FailureReason reason);

struct EpisodeOutcome {
  bool success = false;
  double path_length = 0.0;         // p
  double remaining_geodesic = 0.0;  // d_T
  int steps = 0;
  int collisions = 0;
  int fallback_steps = 0;
  FailureReason failure = FailureReason::None;
};

struct TraceStep {
  int step = 0;
  synth::Pose pose;
  std::uint32_t localized_index = 0;
  std::optional<std::uint32_t> reference;
  std::optional<PixelCoord> target;
  std::optional<Waypoint> first_waypoint;
  std::optional<double> target_cost;
  std::optional<double> footprint_cost;  // propagated cost at the robot's floor point
  synth::Command command;
  bool collided = false;
  std::string fallback;  // empty when the planner produced the command
  std::size_t sparse_pixels = 0;
  std::vector<float> costmap;  // only when tracing costmaps
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  synth::Pose final_pose;

  nlohmann::json to_json() const;
};

/// Replaces the costmap-descent controller; receives the step's costmap and
/// query frame.
using ControllerOverride =
    std::function<synth::Command(const WayPixelCostmap*, const FrameRecord&, const synth::Pose&)>;

struct RunOptions {
  ControllerOverride controller;
  const MapContext* map = nullptr;  // built on demand when null
};

std::pair<EpisodeOutcome, EpisodeTrace> run_episode(const Episode& ep, const PipelineConfig& cfg,
                                                    const RunOptions& options = {});

struct EpisodeMetrics {
  double spl = 0.0;
  double sspl = 0.0;
};

struct MetricsReport {
  std::vector<EpisodeMetrics> episodes;
  double mean_spl = 0.0;
  double mean_sspl = 0.0;
  double success_rate = 0.0;
  std::map<std::string, std::size_t> counts_per_task;
};

/// SPL_i = S_i * l_i / max(l_i, p_i);
/// SSPL_i = (1 - min(1, d_T / d_0)) * l_i / max(l_i, p_i) with d_0 = l_i.
MetricsReport compute_metrics(const std::vector<EpisodeOutcome>& outcomes,
                              const std::vector<Episode>& episodes);

// ---------------------------------------------------------------------------
// Suites

/// World spec used for episode k of a suite; the default alternates a
/// corridor and a corridor+3rooms world.
using WorldFactory = std::function<synth::WorldSpec(std::size_t k)>;

struct SuiteSpec {
  TaskKind task = TaskKind::Imitate;
  std::size_t episodes = 36;
  std::uint64_t seed = 0;
  WorldFactory world;
};

struct SuiteResult {
  std::vector<Episode> episodes;
  std::vector<EpisodeOutcome> outcomes;
  std::vector<EpisodeTrace> traces;
  MetricsReport metrics;
};

synth::WorldSpec default_suite_world(std::size_t k, std::uint64_t seed);

/// Runs the suite on a worker pool sized by WAYPIXEL_THREADS (default: one
/// worker per hardware thread). Results are independent of the pool size.
SuiteResult run_suite(const SuiteSpec& suite, const PipelineConfig& cfg);

std::size_t worker_count();

// ---------------------------------------------------------------------------
// Representation-efficiency benchmark

struct BenchSetting {
  IntraStrategy strategy = IntraStrategy::Emst;
  int knn_k = 8;
  int subsample = 1;
  bool merge = false;

  std::string name() const;
};

struct BenchRow {
  BenchSetting setting;
  GraphStats stats;  // timings are medians over repeats
  std::optional<MetricsReport> navigation;
};

BenchRow benchmark_setting(const MatchBundle& bundle, const BenchSetting& setting,
                           std::optional<NodeKey> goal, int repeats, std::uint64_t seed = 0);

std::vector<BenchRow> benchmark_graph(const MatchBundle& bundle,
                                      const std::vector<BenchSetting>& settings,
                                      std::optional<NodeKey> goal, int repeats = 5);

std::string format_bench_table(const std::vector<BenchRow>& rows);
nlohmann::json bench_to_json(const std::vector<BenchRow>& rows);

// ---------------------------------------------------------------------------
// Configuration files (`waypixel-world v1`)

struct WorldDocument {
  synth::WorldSpec world;
  PipelineConfig pipeline;
};

WorldDocument parse_world_document(const nlohmann::json& doc);
WorldDocument load_world_document(const std::filesystem::path& path);
nlohmann::json outcome_to_json(const Episode& ep, const EpisodeOutcome& outcome,
                               const EpisodeMetrics& metrics);

/// Default mapping route for a world: the Imitate route.
std::vector<Vec2> default_route(const synth::World& world, std::uint64_t seed);

}  // namespace waypixel::harness
