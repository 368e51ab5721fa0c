#include "waypixel/planner.hpp"

#include "waypixel/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace waypixel {

GraphAdjacency::GraphAdjacency(const PixelGraph& graph) {
  const std::size_t n = graph.nodes.size();
  std::vector<std::uint32_t> degree(n, 0);
  auto count = [&](const std::vector<WeightedEdge>& edges) {
    for (const auto& e : edges) {
      ++degree[e.a];
      ++degree[e.b];
    }
  };
  count(graph.inter_edges);
  count(graph.intra_edges);
  offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] = offsets[i] + degree[i];
  targets.resize(offsets[n]);
  weights.resize(offsets[n]);
  std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  auto fill = [&](const std::vector<WeightedEdge>& edges) {
    for (const auto& e : edges) {
      targets[cursor[e.a]] = e.b;
      weights[cursor[e.a]++] = e.weight;
      targets[cursor[e.b]] = e.a;
      weights[cursor[e.b]++] = e.weight;
    }
  };
  fill(graph.inter_edges);
  fill(graph.intra_edges);
}

std::vector<double> dijkstra(const GraphAdjacency& adj, std::uint32_t source) {
  std::vector<double> dist(adj.num_nodes(), kInfiniteCost);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (auto k = adj.offsets[u]; k < adj.offsets[u + 1]; ++k) {
      const double nd = d + adj.weights[k];
      const auto v = adj.targets[k];
      if (nd < dist[v]) {
        dist[v] = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

CostField goal_costs(const PixelGraph& graph, const GraphAdjacency& adjacency, const NodeKey& goal) {
  const auto idx = graph.find(goal);
  if (!idx) {
    throw Error(ErrorCode::GoalNotInGraph, "goal (" + std::to_string(goal.frame) + "," +
                                               std::to_string(goal.u) + "," +
                                               std::to_string(goal.v) + ") is not a graph node");
  }
  const auto dist = dijkstra(adjacency, graph.representative[*idx]);
  CostField field;
  field.goal = *idx;
  field.node_cost.resize(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) field.node_cost[i] = dist[graph.representative[i]];
  return field;
}

CostField goal_costs(const PixelGraph& graph, const NodeKey& goal) {
  return goal_costs(graph, GraphAdjacency(graph), goal);
}

std::shared_ptr<const CostField> CostFieldCache::get(const NodeKey& goal) {
  std::lock_guard lock(mutex_);
  auto it = fields_.find(goal);
  if (it != fields_.end()) return it->second;
  auto field = std::make_shared<const CostField>(goal_costs(*graph_, adjacency_, goal));
  fields_.emplace(goal, field);
  return field;
}

// ---------------------------------------------------------------------------

BridgeResult bridge_cost(const Eigen::Vector3f& ref_point, std::span<const std::uint32_t> frame_nodes,
                         const PixelGraph& graph, const CostField& field) {
  BridgeResult best;
  bool found = false;
  const Eigen::Vector3d p = ref_point.cast<double>();
  // frame_nodes is sorted by NodeKey, so strict < keeps the lexicographic tie-break.
  for (auto node : frame_nodes) {
    const double c = field.cost(node);
    if (!std::isfinite(c)) continue;
    const double total = (p - graph.points[node].cast<double>()).norm() + c;
    if (!found || total < best.cost) {
      best = {total, node};
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::NoReachableNode, "no finite-cost node in reference frame");
  return best;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return kInfiniteCost;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

const BridgedFrame& ReferenceSelection::selected() const {
  for (const auto& f : frames) {
    if (f.frame == reference) return f;
  }
  throw Error(ErrorCode::NoLocalizedFrame, "selected reference missing from selection");
}

ReferenceSelection select_reference(const PixelGraph& graph, const CostField& field,
                                    std::span<const FrameRecord> map_frames,
                                    std::span<const FrameMatches> query_matches) {
  ReferenceSelection sel;
  for (const auto& fm : query_matches) {
    if (fm.matches.empty()) continue;
    if (fm.ref_frame >= map_frames.size() || fm.ref_frame >= graph.per_frame.size()) {
      throw Error(ErrorCode::InvalidArgument, "query matches reference an unknown map frame");
    }
    const auto& frame = map_frames[fm.ref_frame];
    const auto& nodes = graph.per_frame[fm.ref_frame];
    BridgedFrame bf;
    bf.frame = fm.ref_frame;
    bf.num_matches = fm.matches.size();
    for (const auto& m : fm.matches) {
      if (!frame.valid(m.pixel_j)) continue;
      try {
        const auto b = bridge_cost(frame.point(m.pixel_j), nodes, graph, field);
        bf.bridged.push_back({m.pixel_i, m.pixel_j, b.cost, b.node});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoReachableNode) throw;
        break;  // every match of this frame fails the same way
      }
    }
    if (bf.bridged.empty()) continue;
    std::vector<double> costs;
    costs.reserve(bf.bridged.size());
    for (const auto& b : bf.bridged) costs.push_back(b.cost);
    bf.median = lower_median(std::move(costs));
    sel.frames.push_back(std::move(bf));
  }
  if (sel.frames.empty()) throw Error(ErrorCode::NoLocalizedFrame, "no submap frame could be bridged");
  const BridgedFrame* best = nullptr;
  for (const auto& f : sel.frames) {
    if (best == nullptr || f.median < best->median ||
        (f.median == best->median && (f.bridged.size() > best->bridged.size() ||
                                      (f.bridged.size() == best->bridged.size() && f.frame < best->frame)))) {
      best = &f;
    }
  }
  sel.reference = best->frame;
  return sel;
}

SparseCostmap sparse_costmap(std::uint32_t query_frame, const BridgedFrame& reference) {
  SparseCostmap sparse;
  sparse.query_frame = query_frame;
  sparse.reference_frame = reference.frame;
  std::map<std::pair<int, int>, double> best;  // keyed (v, u): row-major order
  for (const auto& b : reference.bridged) {
    const auto key = std::pair{b.query_pixel.v, b.query_pixel.u};
    auto [it, inserted] = best.emplace(key, b.cost);
    if (!inserted) it->second = std::min(it->second, b.cost);
  }
  sparse.entries.reserve(best.size());
  for (const auto& [key, cost] : best) sparse.entries.push_back({PixelCoord{key.second, key.first}, cost});
  return sparse;
}

// ---------------------------------------------------------------------------

std::size_t WayPixelCostmap::matched_sources() const {
  std::vector<std::int32_t> ids;
  for (auto p : provenance) {
    if (p >= 0) ids.push_back(p);
  }
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

WayPixelCostmap densify_costmap(const SparseCostmap& sparse, const FrameRecord& query,
                                DensifyMode mode) {
  if (sparse.entries.empty()) throw Error(ErrorCode::EmptySparseSet, "no matched query pixels");
  const std::size_t n = static_cast<std::size_t>(query.width) * query.height;
  WayPixelCostmap out;
  out.width = query.width;
  out.height = query.height;
  out.query_frame = sparse.query_frame;
  out.reference_frame = sparse.reference_frame;
  out.cost.assign(n, kInfiniteCost);
  out.valid.assign(query.valid_mask.begin(), query.valid_mask.end());
  out.provenance.assign(n, -1);

  const std::size_t m = sparse.entries.size();
  std::vector<Eigen::Vector3d> src(m);
  std::vector<double> src_cost(m);
  std::vector<char> is_source(n, 0);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& e = sparse.entries[k];
    if (!query.valid(e.pixel)) {
      throw Error(ErrorCode::InvalidArgument, "sparse pixel has no valid 3D point");
    }
    src[k] = query.point(e.pixel).cast<double>();
    src_cost[k] = e.cost;
    const auto idx = query.index(e.pixel);
    out.cost[idx] = e.cost;
    out.provenance[idx] = static_cast<std::int32_t>(k);
    is_source[idx] = 1;
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == DensifyMode::Pruned) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return src_cost[a] < src_cost[b]; });
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!out.valid[i] || is_source[i]) continue;
    const Eigen::Vector3d p = query.pointmap[i].cast<double>();
    double best = kInfiniteCost;
    std::int32_t arg = -1;
    for (const auto k : order) {
      // Sources are visited by increasing cost: none past this point can win.
      if (mode == DensifyMode::Pruned && src_cost[k] > best) break;
      const double total = (p - src[k]).norm() + src_cost[k];
      if (total < best || (total == best && static_cast<std::int32_t>(k) < arg)) {
        best = total;
        arg = static_cast<std::int32_t>(k);
      }
    }
    out.cost[i] = best;
    out.provenance[i] = arg;
  }
  return out;
}

double propagate_cost(const SparseCostmap& sparse, const FrameRecord& query,
                      const Eigen::Vector3d& point) {
  double best = kInfiniteCost;
  for (const auto& e : sparse.entries) {
    best = std::min(best, (point - query.point(e.pixel).cast<double>()).norm() + e.cost);
  }
  return best;
}

std::vector<double> embedding_wavelengths(int channels, double lambda_max) {
  const int pairs = channels / 2;
  std::vector<double> lambdas(pairs);
  for (int j = 0; j < pairs; ++j) {
    lambdas[j] = pairs == 1 ? 1.0 : std::pow(lambda_max, static_cast<double>(j) / (pairs - 1));
  }
  return lambdas;
}

CostmapEmbedding encode_costmap(const WayPixelCostmap& costmap, int channels, double lambda_max) {
  if (channels < 2 || channels % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument, "embedding channel count must be even and >= 2");
  }
  const auto lambdas = embedding_wavelengths(channels, lambda_max);
  CostmapEmbedding emb;
  emb.width = costmap.width;
  emb.height = costmap.height;
  emb.channels = channels;
  emb.values.assign(costmap.cost.size() * static_cast<std::size_t>(channels), 0.0f);
  for (std::size_t i = 0; i < costmap.cost.size(); ++i) {
    const double c = costmap.cost[i];
    if (!costmap.valid[i] || !std::isfinite(c)) continue;
    float* out = emb.values.data() + i * channels;
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      out[2 * j] = static_cast<float>(std::sin(c / lambdas[j]));
      out[2 * j + 1] = static_cast<float>(std::cos(c / lambdas[j]));
    }
  }
  return emb;
}

}  // namespace waypixel
