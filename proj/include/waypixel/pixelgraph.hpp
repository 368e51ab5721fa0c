#pragma once

#include "waypixel/frameio.hpp"

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace waypixel {

/// Canonical pixel-node key. Ordering is lexicographic on (frame, u, v) and
/// is used for every tie-break in graph construction and planning.
struct NodeKey {
  std::uint32_t frame = 0;
  int u = 0;
  int v = 0;

  auto operator<=>(const NodeKey&) const = default;
  PixelCoord pixel() const { return {u, v}; }
};

enum class IntraStrategy { Exhaustive, Emst, Knn };

struct GraphBuildConfig {
  int window = 0;     // pairs with frame_i - frame_j > window are ignored; 0 = bundle window
  int subsample = 1;  // keep each correspondence with probability 1 / subsample
  IntraStrategy strategy = IntraStrategy::Emst;
  int knn_k = 8;
  bool merge_nodes = false;
  std::uint64_t seed = 0;

  bool operator==(const GraphBuildConfig&) const = default;
};

/// "exhaustive", "emst" or "knn:K".
std::string strategy_name(IntraStrategy strategy, int k);
void parse_strategy(const std::string& text, GraphBuildConfig& cfg);

struct WeightedEdge {
  std::uint32_t a = 0;  // a < b
  std::uint32_t b = 0;
  float weight = 0.0f;

  bool operator==(const WeightedEdge&) const = default;
};

struct BuildTimings {
  double intra_s = 0.0;
  double weights_s = 0.0;
};

struct PixelGraph {
  GraphBuildConfig config;
  std::uint32_t num_frames = 0;
  std::vector<NodeKey> nodes;             // sorted, unique
  std::vector<Eigen::Vector3f> points;    // owning frame's pointmap value per node
  std::vector<std::uint32_t> representative;  // identity unless merged
  std::vector<WeightedEdge> inter_edges;  // weight 0; empty once merged
  std::vector<WeightedEdge> intra_edges;  // between representatives when merged
  std::vector<std::vector<std::uint32_t>> per_frame;  // frame -> node indices, sorted
  bool merged = false;
  BuildTimings timings;  // not serialized

  std::optional<std::uint32_t> find(const NodeKey& key) const;
  std::size_t num_vertices() const;
  std::size_t frames_with_nodes() const;
};

/// Edge weight between two points of one frame: Euclidean distance in that
/// frame's pointmap, rounded to f32.
float edge_weight(const Eigen::Vector3f& p, const Eigen::Vector3f& q);

// Intra-frame connectivity over one frame's node points. Returned indices are
// local to `points`, with a < b, sorted lexicographically.
std::vector<WeightedEdge> intra_edges_exhaustive(std::span<const Eigen::Vector3f> points);
std::vector<WeightedEdge> intra_edges_emst(std::span<const Eigen::Vector3f> points);
/// Symmetric k-nearest-neighbour graph united with the frame's EMST, which
/// keeps the frame connected.
std::vector<WeightedEdge> intra_edges_knn(std::span<const Eigen::Vector3f> points, int k);

PixelGraph build_graph(const MatchBundle& bundle, const GraphBuildConfig& cfg);

/// Contracts every inter-frame edge; parallel edges keep the minimum weight.
PixelGraph merge_nodes(const PixelGraph& graph);

struct GraphStats {
  std::size_t num_frames = 0;
  std::size_t num_frames_with_nodes = 0;
  std::size_t num_nodes = 0;
  std::size_t num_intra_edges = 0;
  std::size_t num_inter_edges = 0;
  std::size_t disk_bytes = 0;
  double time_intra_s = 0.0;
  double time_weights_s = 0.0;
  double time_dijkstra_s = 0.0;
};

GraphStats graph_stats(const PixelGraph& graph, const BuildTimings& timings,
                       double dijkstra_s = 0.0);

/// Canonical `waypixel-graph v1` text.
std::string serialize_graph(const PixelGraph& graph);
PixelGraph parse_graph(std::string_view text);
void save_graph(const PixelGraph& graph, const std::filesystem::path& path);
PixelGraph load_graph(const std::filesystem::path& path);

}  // namespace waypixel
