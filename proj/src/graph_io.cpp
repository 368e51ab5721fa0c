#include "waypixel/binary.hpp"
#include "waypixel/error.hpp"
#include "waypixel/pixelgraph.hpp"

#include <json.hpp>

#include <numeric>

namespace waypixel {

using nlohmann::json;

namespace {

std::string encode_edges(const std::vector<WeightedEdge>& edges) {
  ByteWriter w;
  for (const auto& e : edges) {
    w.u32(e.a);
    w.u32(e.b);
    w.f32(e.weight);
  }
  return base64_encode(w.bytes());
}

std::vector<WeightedEdge> decode_edges(const std::string& text, std::size_t num_nodes) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 12 != 0) throw Error(ErrorCode::MalformedFile, "edge table size");
  ByteReader r(bytes);
  std::vector<WeightedEdge> edges(bytes.size() / 12);
  for (auto& e : edges) {
    e.a = r.u32();
    e.b = r.u32();
    e.weight = r.f32();
    if (e.a >= num_nodes || e.b >= num_nodes) {
      throw Error(ErrorCode::InvariantViolation, "edge references a missing node");
    }
  }
  return edges;
}

}  // namespace

std::string serialize_graph(const PixelGraph& g) {
  if (g.num_frames > 0xffff) throw Error(ErrorCode::InvalidArgument, "too many frames for u16 ids");
  json root;
  root["format"] = "waypixel-graph";
  root["version"] = 1;
  root["config"] = {
      {"window", g.config.window},
      {"subsample", g.config.subsample},
      {"strategy", strategy_name(g.config.strategy, g.config.knn_k)},
      {"merge_nodes", g.config.merge_nodes},
      {"seed", g.config.seed},
  };
  root["counts"] = {
      {"frames", g.num_frames},
      {"nodes", g.nodes.size()},
      {"vertices", g.num_vertices()},
      {"intra_edges", g.intra_edges.size()},
      {"inter_edges", g.inter_edges.size()},
  };
  ByteWriter nodes;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& k = g.nodes[i];
    nodes.u16(static_cast<std::uint16_t>(k.frame));
    nodes.u16(static_cast<std::uint16_t>(k.u));
    nodes.u16(static_cast<std::uint16_t>(k.v));
    nodes.f32(g.points[i].x());
    nodes.f32(g.points[i].y());
    nodes.f32(g.points[i].z());
  }
  root["nodes_b64"] = base64_encode(nodes.bytes());
  root["intra_edges_b64"] = encode_edges(g.intra_edges);
  root["inter_edges_b64"] = encode_edges(g.inter_edges);
  if (g.merged) {
    ByteWriter reps;
    for (auto r : g.representative) reps.u32(r);
    root["representatives_b64"] = base64_encode(reps.bytes());
  }
  return root.dump() + "\n";
}

PixelGraph parse_graph(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
  PixelGraph g;
  try {
    if (root.at("format") != "waypixel-graph" || root.at("version") != 1) {
      throw Error(ErrorCode::SchemaViolation, "not a waypixel-graph v1 file");
    }
    const auto& cfg = root.at("config");
    g.config.window = cfg.at("window").get<int>();
    g.config.subsample = cfg.at("subsample").get<int>();
    parse_strategy(cfg.at("strategy").get<std::string>(), g.config);
    g.config.merge_nodes = cfg.at("merge_nodes").get<bool>();
    g.config.seed = cfg.at("seed").get<std::uint64_t>();
    g.num_frames = root.at("counts").at("frames").get<std::uint32_t>();

    const auto node_bytes = base64_decode(root.at("nodes_b64").get<std::string>());
    if (node_bytes.size() % 18 != 0) throw Error(ErrorCode::MalformedFile, "node table size");
    ByteReader r(node_bytes);
    const std::size_t n = node_bytes.size() / 18;
    g.per_frame.assign(g.num_frames, {});
    for (std::size_t i = 0; i < n; ++i) {
      NodeKey k;
      k.frame = r.u16();
      k.u = r.u16();
      k.v = r.u16();
      const float x = r.f32();
      const float y = r.f32();
      const float z = r.f32();
      if (k.frame >= g.num_frames) throw Error(ErrorCode::InvariantViolation, "node frame out of range");
      if (!g.nodes.empty() && !(g.nodes.back() < k)) {
        throw Error(ErrorCode::InvariantViolation, "node table not strictly sorted");
      }
      g.nodes.push_back(k);
      g.points.emplace_back(x, y, z);
      g.per_frame[k.frame].push_back(static_cast<std::uint32_t>(i));
    }
    g.intra_edges = decode_edges(root.at("intra_edges_b64").get<std::string>(), n);
    g.inter_edges = decode_edges(root.at("inter_edges_b64").get<std::string>(), n);
    g.representative.resize(n);
    std::iota(g.representative.begin(), g.representative.end(), std::uint32_t{0});
    g.merged = g.config.merge_nodes;
    if (g.merged) {
      const auto rep_bytes = base64_decode(root.at("representatives_b64").get<std::string>());
      if (rep_bytes.size() != 4 * n) throw Error(ErrorCode::MalformedFile, "representative table size");
      ByteReader rr(rep_bytes);
      for (auto& rep : g.representative) {
        rep = rr.u32();
        if (rep >= n) throw Error(ErrorCode::InvariantViolation, "representative out of range");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  return g;
}

void save_graph(const PixelGraph& graph, const std::filesystem::path& path) {
  write_text_file(path, serialize_graph(graph));
}

PixelGraph load_graph(const std::filesystem::path& path) { return parse_graph(read_text_file(path)); }

}  // namespace waypixel
