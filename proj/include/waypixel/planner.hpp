#pragma once

#include "waypixel/frameio.hpp"
#include "waypixel/pixelgraph.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace waypixel {

inline constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();

/// Compressed adjacency over node indices. Non-representative nodes of a
/// merged graph have no incident edges.
struct GraphAdjacency {
  std::vector<std::uint32_t> offsets;  // size nodes + 1
  std::vector<std::uint32_t> targets;
  std::vector<double> weights;

  explicit GraphAdjacency(const PixelGraph& graph);
  std::size_t num_nodes() const { return offsets.size() - 1; }
};

/// Shortest-path cost from every node to the goal node.
struct CostField {
  std::uint32_t goal = 0;
  std::vector<double> node_cost;  // indexed by node; merged members share their class cost

  double cost(std::uint32_t node) const { return node_cost[node]; }
};

/// Single-source Dijkstra from a distance vector seeded at `source`.
std::vector<double> dijkstra(const GraphAdjacency& adjacency, std::uint32_t source);

CostField goal_costs(const PixelGraph& graph, const NodeKey& goal);
CostField goal_costs(const PixelGraph& graph, const GraphAdjacency& adjacency, const NodeKey& goal);

/// Cost fields are computed once per goal and shared.
class CostFieldCache {
 public:
  explicit CostFieldCache(const PixelGraph& graph) : graph_(&graph), adjacency_(graph) {}

  std::shared_ptr<const CostField> get(const NodeKey& goal);

 private:
  const PixelGraph* graph_;
  GraphAdjacency adjacency_;
  std::mutex mutex_;
  std::map<NodeKey, std::shared_ptr<const CostField>> fields_;
};

struct BridgeResult {
  double cost = kInfiniteCost;
  std::uint32_t node = 0;  // bridging node (graph node index)
};

/// Cost of an off-graph reference pixel: the minimum over the frame's graph
/// nodes of local 3D distance plus the node's cost-to-goal.
BridgeResult bridge_cost(const Eigen::Vector3f& ref_point, std::span<const std::uint32_t> frame_nodes,
                         const PixelGraph& graph, const CostField& field);

/// Correspondences between the query frame and one map frame; pixel_i is the
/// query pixel, pixel_j the map pixel.
struct FrameMatches {
  std::uint32_t ref_frame = 0;
  std::vector<Match> matches;
};

struct BridgedMatch {
  PixelCoord query_pixel;
  PixelCoord ref_pixel;
  double cost = kInfiniteCost;
  std::uint32_t bridge_node = 0;
};

struct BridgedFrame {
  std::uint32_t frame = 0;
  std::size_t num_matches = 0;  // before bridging
  std::vector<BridgedMatch> bridged;  // successfully bridged matches only
  double median = kInfiniteCost;      // lower median of bridged costs
};

struct ReferenceSelection {
  std::uint32_t reference = 0;
  std::vector<BridgedFrame> frames;  // one per input frame with >= 1 bridged match

  const BridgedFrame& selected() const;
};

/// Lower median (element (n - 1) / 2 of the sorted values).
double lower_median(std::vector<double> values);

/// Bridges every match of every submap frame and picks the frame with the
/// smallest median cost; ties prefer more bridged matches, then the lower id.
ReferenceSelection select_reference(const PixelGraph& graph, const CostField& field,
                                    std::span<const FrameRecord> map_frames,
                                    std::span<const FrameMatches> query_matches);

struct SparseEntry {
  PixelCoord pixel;
  double cost = 0.0;
};

struct SparseCostmap {
  std::uint32_t query_frame = 0;
  std::uint32_t reference_frame = 0;
  std::vector<SparseEntry> entries;  // unique pixels, row-major order
};

/// Transfers bridged reference costs onto query pixels; a query pixel matched
/// more than once keeps its smallest cost.
SparseCostmap sparse_costmap(std::uint32_t query_frame, const BridgedFrame& reference);

enum class DensifyMode { BruteForce, Pruned };

struct WayPixelCostmap {
  int width = 0;
  int height = 0;
  std::uint32_t query_frame = 0;
  std::uint32_t reference_frame = 0;
  std::vector<double> cost;         // +inf where invalid
  std::vector<std::uint8_t> valid;  // pointmap validity
  std::vector<std::int32_t> provenance;  // index into the sparse entries, -1 if invalid

  double at(PixelCoord p) const { return cost[static_cast<std::size_t>(p.v) * width + p.u]; }
  std::size_t matched_sources() const;
};

WayPixelCostmap densify_costmap(const SparseCostmap& sparse, const FrameRecord& query,
                                DensifyMode mode = DensifyMode::BruteForce);

/// Cost of an arbitrary query-frame 3D point propagated from the sparse set.
double propagate_cost(const SparseCostmap& sparse, const FrameRecord& query,
                      const Eigen::Vector3d& point);

struct CostmapEmbedding {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // (row-major pixel) * channels + channel

  std::span<const float> pixel(std::size_t index) const {
    return {values.data() + index * channels, static_cast<std::size_t>(channels)};
  }
};

std::vector<double> embedding_wavelengths(int channels, double lambda_max);

/// Sinusoidal encoding (sin(c / l_j), cos(c / l_j)) per wavelength; invalid
/// pixels encode as zeros.
CostmapEmbedding encode_costmap(const WayPixelCostmap& costmap, int channels = 16,
                                double lambda_max = 64.0);

}  // namespace waypixel
