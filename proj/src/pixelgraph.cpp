#include "waypixel/pixelgraph.hpp"

#include "waypixel/error.hpp"
#include "waypixel/hash.hpp"
#include "waypixel/union_find.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace waypixel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void sort_unique(std::vector<WeightedEdge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& x, const WeightedEdge& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const WeightedEdge& x, const WeightedEdge& y) {
                            return x.a == y.a && x.b == y.b;
                          }),
              edges.end());
}

WeightedEdge make_edge(std::uint32_t i, std::uint32_t j, float w) {
  return i < j ? WeightedEdge{i, j, w} : WeightedEdge{j, i, w};
}

}  // namespace

std::string strategy_name(IntraStrategy strategy, int k) {
  switch (strategy) {
    case IntraStrategy::Exhaustive: return "exhaustive";
    case IntraStrategy::Emst: return "emst";
    case IntraStrategy::Knn: return "knn:" + std::to_string(k);
  }
  return "emst";
}

void parse_strategy(const std::string& text, GraphBuildConfig& cfg) {
  if (text == "exhaustive") {
    cfg.strategy = IntraStrategy::Exhaustive;
  } else if (text == "emst") {
    cfg.strategy = IntraStrategy::Emst;
  } else if (text == "knn" || text.starts_with("knn:")) {
    cfg.strategy = IntraStrategy::Knn;
    if (text.size() > 4) {
      try {
        cfg.knn_k = std::stoi(text.substr(4));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "bad k in strategy '" + text + "'");
      }
    }
    if (cfg.knn_k < 1) throw Error(ErrorCode::InvalidArgument, "knn k must be >= 1");
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown strategy '" + text + "'");
  }
}

float edge_weight(const Eigen::Vector3f& p, const Eigen::Vector3f& q) {
  return static_cast<float>((p.cast<double>() - q.cast<double>()).norm());
}

std::vector<WeightedEdge> intra_edges_exhaustive(std::span<const Eigen::Vector3f> points) {
  const auto n = static_cast<std::uint32_t>(points.size());
  std::vector<WeightedEdge> edges;
  edges.reserve(static_cast<std::size_t>(n) * (n > 0 ? n - 1 : 0) / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) edges.push_back({i, j, edge_weight(points[i], points[j])});
  }
  return edges;
}

std::vector<WeightedEdge> intra_edges_emst(std::span<const Eigen::Vector3f> points) {
  // Dense Prim; ties resolved toward the lower index.
  const auto n = static_cast<std::uint32_t>(points.size());
  std::vector<WeightedEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  std::vector<float> key(n, std::numeric_limits<float>::infinity());
  std::vector<std::uint32_t> parent(n, 0);
  std::vector<char> in_tree(n, 0);
  key[0] = 0.0f;
  for (std::uint32_t iter = 0; iter < n; ++iter) {
    std::uint32_t best = n;
    for (std::uint32_t u = 0; u < n; ++u) {
      if (!in_tree[u] && (best == n || key[u] < key[best])) best = u;
    }
    in_tree[best] = 1;
    if (iter > 0) edges.push_back(make_edge(parent[best], best, key[best]));
    for (std::uint32_t u = 0; u < n; ++u) {
      if (in_tree[u]) continue;
      const float w = edge_weight(points[best], points[u]);
      if (w < key[u]) {
        key[u] = w;
        parent[u] = best;
      }
    }
  }
  sort_unique(edges);
  return edges;
}

std::vector<WeightedEdge> intra_edges_knn(std::span<const Eigen::Vector3f> points, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "knn k must be >= 1");
  const auto n = static_cast<std::uint32_t>(points.size());
  auto edges = intra_edges_emst(points);
  const std::uint32_t take = std::min<std::uint32_t>(static_cast<std::uint32_t>(k), n > 0 ? n - 1 : 0);
  std::vector<std::pair<float, std::uint32_t>> cand;
  for (std::uint32_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::uint32_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(edge_weight(points[i], points[j]), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + take, cand.end());
    for (std::uint32_t r = 0; r < take; ++r) edges.push_back(make_edge(i, cand[r].second, cand[r].first));
  }
  sort_unique(edges);
  return edges;
}

// ---------------------------------------------------------------------------

std::optional<std::uint32_t> PixelGraph::find(const NodeKey& key) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
  if (it == nodes.end() || *it != key) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes.begin());
}

std::size_t PixelGraph::num_vertices() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < representative.size(); ++i) n += representative[i] == i ? 1 : 0;
  return n;
}

std::size_t PixelGraph::frames_with_nodes() const {
  return static_cast<std::size_t>(std::count_if(per_frame.begin(), per_frame.end(),
                                                [](const auto& f) { return !f.empty(); }));
}

PixelGraph build_graph(const MatchBundle& bundle, const GraphBuildConfig& cfg) {
  if (cfg.subsample < 1) throw Error(ErrorCode::InvalidArgument, "subsample factor must be >= 1");
  if (cfg.window < 0) throw Error(ErrorCode::InvalidArgument, "window must be >= 1");
  if (cfg.strategy == IntraStrategy::Knn && cfg.knn_k < 1) {
    throw Error(ErrorCode::InvalidArgument, "knn k must be >= 1");
  }
  const int window = cfg.window == 0 ? bundle.window_size : cfg.window;
  const double keep_rate = 1.0 / cfg.subsample;

  struct Kept {
    NodeKey a;
    NodeKey b;
  };
  std::vector<Kept> kept;
  for (const auto& pair : bundle.pairs) {
    if (pair.frame_i >= bundle.frames.size() || pair.frame_j >= bundle.frames.size()) {
      throw Error(ErrorCode::InvariantViolation, "pair references a missing frame");
    }
    if (static_cast<long>(pair.frame_i) - static_cast<long>(pair.frame_j) > window) continue;
    const auto& fa = bundle.frames[pair.frame_i];
    const auto& fb = bundle.frames[pair.frame_j];
    for (const auto& m : pair.matches) {
      if (!fa.valid(m.pixel_i) || !fb.valid(m.pixel_j)) {
        throw Error(ErrorCode::InvariantViolation, "matched pixel is not valid in its frame");
      }
      if (cfg.subsample > 1) {
        std::uint64_t h = mix_seed(cfg.seed, pair.frame_i);
        h = mix_seed(h, pair.frame_j);
        h = mix_seed(h, (static_cast<std::uint64_t>(m.pixel_i.u) << 32) | static_cast<std::uint32_t>(m.pixel_i.v));
        h = mix_seed(h, (static_cast<std::uint64_t>(m.pixel_j.u) << 32) | static_cast<std::uint32_t>(m.pixel_j.v));
        if (hash_uniform(h) >= keep_rate) continue;
      }
      kept.push_back({{pair.frame_i, m.pixel_i.u, m.pixel_i.v},
                      {pair.frame_j, m.pixel_j.u, m.pixel_j.v}});
    }
  }
  if (kept.empty()) throw Error(ErrorCode::EmptyGraph, "no correspondences survive subsampling");

  PixelGraph g;
  g.config = cfg;
  g.config.window = window;
  g.num_frames = static_cast<std::uint32_t>(bundle.frames.size());
  g.nodes.reserve(kept.size() * 2);
  for (const auto& k : kept) {
    g.nodes.push_back(k.a);
    g.nodes.push_back(k.b);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  g.points.reserve(g.nodes.size());
  g.per_frame.assign(g.num_frames, {});
  for (std::uint32_t i = 0; i < g.nodes.size(); ++i) {
    const auto& key = g.nodes[i];
    g.points.push_back(bundle.frames[key.frame].point(key.pixel()));
    g.per_frame[key.frame].push_back(i);
  }
  g.representative.resize(g.nodes.size());
  std::iota(g.representative.begin(), g.representative.end(), std::uint32_t{0});

  g.inter_edges.reserve(kept.size());
  for (const auto& k : kept) g.inter_edges.push_back(make_edge(*g.find(k.a), *g.find(k.b), 0.0f));
  sort_unique(g.inter_edges);

  // Topology first, then a separate pass assigning Euclidean weights; the two
  // phases are timed independently.
  std::vector<Eigen::Vector3f> local;
  std::vector<WeightedEdge> selected;
  auto t0 = Clock::now();
  for (const auto& frame_nodes : g.per_frame) {
    if (frame_nodes.size() < 2) continue;
    local.clear();
    for (auto idx : frame_nodes) local.push_back(g.points[idx]);
    std::vector<WeightedEdge> edges;
    switch (cfg.strategy) {
      case IntraStrategy::Exhaustive: edges = intra_edges_exhaustive(local); break;
      case IntraStrategy::Emst: edges = intra_edges_emst(local); break;
      case IntraStrategy::Knn: edges = intra_edges_knn(local, cfg.knn_k); break;
    }
    for (const auto& e : edges) selected.push_back({frame_nodes[e.a], frame_nodes[e.b], 0.0f});
  }
  g.timings.intra_s = seconds_since(t0);

  t0 = Clock::now();
  for (auto& e : selected) e.weight = edge_weight(g.points[e.a], g.points[e.b]);
  g.intra_edges = std::move(selected);
  sort_unique(g.intra_edges);
  g.timings.weights_s = seconds_since(t0);

  if (cfg.merge_nodes) {
    const auto timings = g.timings;
    g = merge_nodes(g);
    g.timings = timings;
  }
  return g;
}

PixelGraph merge_nodes(const PixelGraph& graph) {
  if (graph.merged) throw Error(ErrorCode::InvalidArgument, "graph is already merged");
  const auto n = graph.nodes.size();
  DisjointSets sets(n);
  for (const auto& e : graph.inter_edges) sets.unite(e.a, e.b);

  // Representative = lexicographically smallest member (lowest node index).
  std::vector<std::uint32_t> root_min(n, std::numeric_limits<std::uint32_t>::max());
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& m = root_min[sets.find(i)];
    m = std::min(m, i);
  }
  PixelGraph out = graph;
  out.merged = true;
  out.config.merge_nodes = true;
  out.inter_edges.clear();
  for (std::uint32_t i = 0; i < n; ++i) out.representative[i] = root_min[sets.find(i)];

  std::map<std::pair<std::uint32_t, std::uint32_t>, float> best;
  for (const auto& e : graph.intra_edges) {
    const auto ra = out.representative[e.a];
    const auto rb = out.representative[e.b];
    if (ra == rb) continue;
    const auto key = std::minmax(ra, rb);
    auto [it, inserted] = best.emplace(key, e.weight);
    if (!inserted) it->second = std::min(it->second, e.weight);
  }
  out.intra_edges.clear();
  out.intra_edges.reserve(best.size());
  for (const auto& [key, w] : best) out.intra_edges.push_back({key.first, key.second, w});
  return out;
}

GraphStats graph_stats(const PixelGraph& graph, const BuildTimings& timings, double dijkstra_s) {
  GraphStats s;
  s.num_frames = graph.num_frames;
  s.num_frames_with_nodes = graph.frames_with_nodes();
  s.num_nodes = graph.num_vertices();
  s.num_intra_edges = graph.intra_edges.size();
  s.num_inter_edges = graph.inter_edges.size();
  s.disk_bytes = serialize_graph(graph).size();
  s.time_intra_s = timings.intra_s;
  s.time_weights_s = timings.weights_s;
  s.time_dijkstra_s = dijkstra_s;
  return s;
}

}  // namespace waypixel
