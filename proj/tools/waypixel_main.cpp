#include "waypixel/binary.hpp"
#include "waypixel/error.hpp"
#include "waypixel/frameio.hpp"
#include "waypixel/harness.hpp"
#include "waypixel/pixelgraph.hpp"
#include "waypixel/planner.hpp"
#include "waypixel/synthworld.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace waypixel;
using nlohmann::json;

namespace {

std::vector<double> split_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::InvalidArgument, "not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// "a,b;c,d" or "a,b c,d" -> rows of `width` numbers.
std::vector<std::vector<double>> parse_rows(std::string text, std::size_t width) {
  std::replace(text.begin(), text.end(), ' ', ';');
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    if (row.empty()) continue;
    auto nums = split_numbers(row, ',');
    if (nums.size() != width) {
      throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(width) + " values in '" + row + "'");
    }
    rows.push_back(std::move(nums));
  }
  return rows;
}

NodeKey parse_goal(const std::string& text) {
  const auto nums = split_numbers(text, ',');
  if (nums.size() != 3 || nums[0] < 0 || nums[1] < 0 || nums[2] < 0) {
    throw Error(ErrorCode::InvalidArgument, "goal must be F,U,V");
  }
  return {static_cast<std::uint32_t>(nums[0]), static_cast<int>(nums[1]), static_cast<int>(nums[2])};
}

// "F" picks the first node of frame F; "F,U,V" names a node.
NodeKey resolve_goal(const PixelGraph& g, const std::string& text) {
  const auto nums = split_numbers(text, ',');
  if (nums.size() != 1) return parse_goal(text);
  if (nums[0] < 0 || nums[0] >= g.per_frame.size() || g.per_frame[nums[0]].empty()) {
    throw Error(ErrorCode::GoalNotInGraph, "frame " + text + " holds no graph nodes");
  }
  return g.nodes[g.per_frame[nums[0]].front()];
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void print_stats_table(const GraphStats& s) {
  std::cout << std::left << std::setw(20) << "frames" << s.num_frames << "\n"
            << std::setw(20) << "frames_with_nodes" << s.num_frames_with_nodes << "\n"
            << std::setw(20) << "nodes" << s.num_nodes << "\n"
            << std::setw(20) << "intra_edges" << s.num_intra_edges << "\n"
            << std::setw(20) << "inter_edges" << s.num_inter_edges << "\n"
            << std::setw(20) << "disk_bytes" << s.disk_bytes << "\n"
            << std::setw(20) << "time_intra_s" << s.time_intra_s << "\n"
            << std::setw(20) << "time_weights_s" << s.time_weights_s << "\n";
}

// ---------------------------------------------------------------------------

struct MapArgs {
  std::string bundle, out, strategy = "emst";
  int window = 0, subsample = 1;
  bool merge = false;
  std::uint64_t seed = 0;
  float min_confidence = 0.0f;
};

// Drops query frames appended by gen-world --queries.
void strip_query_frames(MatchBundle& b) {
  const auto it = b.meta.find("query_frames_begin");
  if (it == b.meta.end()) return;
  const auto end = std::min<std::size_t>(std::stoul(it->second), b.frames.size());
  b.frames.resize(end);
  std::erase_if(b.pairs, [&](const PairRecord& p) { return p.frame_i >= end || p.frame_j >= end; });
  b.meta.erase("query_frames_begin");
}

int cmd_map(const MapArgs& a) {
  auto bundle = load_bundle(a.bundle);
  strip_query_frames(bundle);
  if (a.min_confidence > 0.0f) {
    for (auto& p : bundle.pairs) {
      std::erase_if(p.matches, [&](const Match& m) { return m.confidence < a.min_confidence; });
    }
  }
  GraphBuildConfig cfg;
  parse_strategy(a.strategy, cfg);
  cfg.window = a.window;
  cfg.subsample = a.subsample;
  cfg.seed = a.seed;
  cfg.merge_nodes = a.merge;
  const auto graph = build_graph(bundle, cfg);
  save_graph(graph, a.out);
  print_stats_table(graph_stats(graph, graph.timings));
  return 0;
}

struct PlanArgs {
  std::string graph, goal, query, out, densify = "pruned";
};

int cmd_plan(const PlanArgs& a) {
  const auto graph = load_graph(a.graph);
  const auto bundle = load_bundle(a.query);
  const auto goal = resolve_goal(graph, a.goal);
  const auto field = goal_costs(graph, goal);
  std::uint32_t map_end = graph.num_frames;
  if (auto it = bundle.meta.find("query_frames_begin"); it != bundle.meta.end()) {
    map_end = static_cast<std::uint32_t>(std::stoul(it->second));
  }
  if (map_end > bundle.frames.size()) {
    throw Error(ErrorCode::InvalidArgument, "query bundle holds fewer frames than the map");
  }
  const std::span<const FrameRecord> map_frames(bundle.frames.data(), map_end);
  const auto mode = a.densify == "brute-force" ? DensifyMode::BruteForce : DensifyMode::Pruned;
  fs::create_directories(a.out);

  json summary;
  summary["goal"] = {goal.frame, goal.u, goal.v};
  summary["queries"] = json::array();
  std::cout << std::left << std::setw(8) << "query" << std::setw(8) << "ref" << std::setw(10) << "sparse"
            << std::setw(10) << "finite" << "min_cost\n";
  for (std::uint32_t q = map_end; q < bundle.frames.size(); ++q) {
    std::vector<FrameMatches> fm;
    for (const auto& p : bundle.pairs) {
      if (p.frame_i == q && p.frame_j < map_end && !p.matches.empty()) fm.push_back({p.frame_j, p.matches});
    }
    json entry = {{"query_frame", q}};
    try {
      const auto sel = select_reference(graph, field, map_frames, fm);
      const auto sparse = sparse_costmap(q, sel.selected());
      const auto cm = densify_costmap(sparse, bundle.frames[q], mode);
      std::vector<float> raw(cm.cost.size());
      std::size_t finite = 0;
      double min_cost = kInfiniteCost;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = static_cast<float>(cm.cost[i]);
        if (std::isfinite(cm.cost[i])) {
          ++finite;
          min_cost = std::min(min_cost, cm.cost[i]);
        }
      }
      const auto name = "costmap_" + std::to_string(q);
      std::ofstream os(fs::path(a.out) / (name + ".f32"), std::ios::binary);
      ByteWriter w;
      for (float c : raw) w.f32(c);
      const auto& bytes = w.bytes();
      os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!os) throw Error(ErrorCode::IoFailure, "cannot write costmap for frame " + std::to_string(q));
      entry["reference_frame"] = cm.reference_frame;
      entry["width"] = cm.width;
      entry["height"] = cm.height;
      entry["sparse_pixels"] = sparse.entries.size();
      entry["finite_pixels"] = finite;
      entry["min_cost"] = min_cost;
      entry["file"] = name + ".f32";
      std::cout << std::setw(8) << q << std::setw(8) << cm.reference_frame << std::setw(10)
                << sparse.entries.size() << std::setw(10) << finite << min_cost << "\n";
    } catch (const Error& e) {
      entry["error"] = to_string(e.code());
      std::cout << std::setw(8) << q << to_string(e.code()) << "\n";
    }
    summary["queries"].push_back(std::move(entry));
  }
  write_json(fs::path(a.out) / "summary.json", summary);
  return 0;
}

struct RunArgs {
  std::string world, task = "imitate", report, localizer;
  std::size_t episodes = 36;
  std::uint64_t seed = 0;
  bool trace = false;
};

int cmd_run(const RunArgs& a) {
  auto doc = harness::load_world_document(a.world);
  doc.pipeline.trace = a.trace;
  if (!a.localizer.empty()) doc.pipeline.localizer.mode = parse_localizer_mode(a.localizer);
  harness::SuiteSpec suite;
  suite.task = harness::parse_task(a.task);
  suite.episodes = a.episodes;
  suite.seed = a.seed;
  const auto base = doc.world;
  suite.world = [base](std::size_t k) {
    auto w = base;
    w.seed = base.seed + k;
    return w;
  };
  const auto res = harness::run_suite(suite, doc.pipeline);

  json report;
  report["format"] = "waypixel-run";
  report["version"] = 1;
  report["task"] = a.task;
  report["seed"] = a.seed;
  report["episodes"] = json::array();
  std::cout << std::left << std::setw(5) << "ep" << std::setw(9) << "success" << std::setw(10) << "l"
            << std::setw(10) << "p" << std::setw(10) << "d_T" << std::setw(8) << "steps" << std::setw(8)
            << "SPL" << "SSPL\n";
  std::cout << std::fixed << std::setprecision(3);
  for (std::size_t k = 0; k < res.episodes.size(); ++k) {
    const auto& o = res.outcomes[k];
    const auto& m = res.metrics.episodes[k];
    auto e = harness::outcome_to_json(res.episodes[k], o, m);
    if (a.trace) e["trace"] = res.traces[k].to_json();
    report["episodes"].push_back(std::move(e));
    std::cout << std::setw(5) << k << std::setw(9) << (o.success ? "yes" : "no") << std::setw(10)
              << res.episodes[k].geodesic_length << std::setw(10) << o.path_length << std::setw(10)
              << o.remaining_geodesic << std::setw(8) << o.steps << std::setw(8) << m.spl << m.sspl << "\n";
  }
  report["aggregate"] = {{"success_rate", res.metrics.success_rate},
                         {"mean_spl", res.metrics.mean_spl},
                         {"mean_sspl", res.metrics.mean_sspl},
                         {"counts_per_task", res.metrics.counts_per_task}};
  std::cout << "success_rate " << res.metrics.success_rate << "  mean_spl " << res.metrics.mean_spl
            << "  mean_sspl " << res.metrics.mean_sspl << "\n";
  if (!a.report.empty()) write_json(a.report, report);
  return 0;
}

struct BenchArgs {
  std::string bundle, strategies = "exhaustive,emst,knn:8", subsample = "1", goal, report, world;
  int repeats = 5;
  std::size_t episodes = 0;
  bool merge = false;
};

int cmd_bench(const BenchArgs& a) {
  auto bundle = load_bundle(a.bundle);
  strip_query_frames(bundle);
  std::vector<harness::BenchSetting> settings;
  std::vector<std::string> names;
  {
    std::stringstream ss(a.strategies);
    std::string s;
    while (std::getline(ss, s, ',')) {
      if (!s.empty()) names.push_back(s);
    }
  }
  for (double sub : split_numbers(a.subsample, ',')) {
    for (const auto& n : names) {
      GraphBuildConfig c;
      parse_strategy(n, c);
      settings.push_back({c.strategy, c.knn_k, static_cast<int>(sub), a.merge});
    }
  }
  std::optional<NodeKey> goal;
  if (!a.goal.empty()) goal = parse_goal(a.goal);
  auto rows = harness::benchmark_graph(bundle, settings, goal, a.repeats);
  if (!a.world.empty() && a.episodes > 0) {
    const auto doc = harness::load_world_document(a.world);
    for (auto& row : rows) {
      auto cfg = doc.pipeline;
      cfg.graph.strategy = row.setting.strategy;
      cfg.graph.knn_k = row.setting.knn_k;
      cfg.graph.subsample = row.setting.subsample;
      cfg.graph.merge_nodes = row.setting.merge;
      harness::SuiteSpec suite;
      suite.episodes = a.episodes;
      const auto base = doc.world;
      suite.world = [base](std::size_t k) {
        auto w = base;
        w.seed = base.seed + k;
        return w;
      };
      row.navigation = harness::run_suite(suite, cfg).metrics;
    }
  }
  std::cout << harness::format_bench_table(rows);
  if (!a.report.empty()) write_json(a.report, harness::bench_to_json(rows));
  return 0;
}

struct GenArgs {
  std::string spec, route, out, queries, poses_out;
};

int cmd_gen_world(const GenArgs& a) {
  const auto doc = harness::load_world_document(a.spec);
  const auto world = synth::build_world(doc.world);
  const auto& p = doc.pipeline;
  std::vector<geom::Vec2> route;
  if (a.route.empty()) {
    route = harness::default_route(world, doc.world.seed);
  } else {
    for (const auto& r : parse_rows(a.route, 2)) route.emplace_back(r[0], r[1]);
  }
  auto tr = synth::generate_traversal(world, route, p.map_spacing, p.intrinsics, p.window, p.noise);
  auto& bundle = tr.bundle;
  const auto map_frames = static_cast<std::uint32_t>(tr.observations.size());
  if (!a.queries.empty()) {
    const auto rows = parse_rows(a.queries, 3);
    bundle.meta["query_frames_begin"] = std::to_string(map_frames);
    for (std::size_t q = 0; q < rows.size(); ++q) {
      const synth::Pose pose{rows[q][0], rows[q][1], rows[q][2]};
      synth::NoiseKnobs noise = p.noise;
      noise.seed = mix_seed(p.noise.seed, 0x71000000ULL + q);
      const auto id = static_cast<std::uint32_t>(map_frames + q);
      const auto obs = synth::render_frame(world, pose, p.intrinsics, noise, id);
      bundle.frames.push_back(obs.frame);
      for (std::uint32_t f = 0; f < map_frames; ++f) {
        noise.seed = mix_seed(noise.seed, f);
        bundle.pairs.push_back(synth::oracle_match(obs, tr.observations[f], noise));
      }
    }
    bundle.window_size = static_cast<int>(bundle.frames.size());
  }
  save_bundle(bundle, a.out);
  if (!a.poses_out.empty()) {
    json poses = json::array();
    for (const auto& ps : tr.poses) poses.push_back({{"x", ps.x}, {"y", ps.y}, {"yaw", ps.yaw}});
    write_json(a.poses_out, poses);
  }
  std::cout << "frames " << bundle.frames.size() << "  pairs " << bundle.pairs.size() << "  landmarks "
            << world.landmarks.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"waypixel: pixel-graph topometric navigation toolkit"};
  app.require_subcommand(1);

  MapArgs map_args;
  auto* map = app.add_subcommand("map", "build a pixel graph from a match bundle");
  map->add_option("--bundle", map_args.bundle, "input match bundle")->required();
  map->add_option("--window", map_args.window, "inter-frame window (0 = bundle window)");
  map->add_option("--subsample", map_args.subsample, "keep 1 in F correspondences");
  map->add_option("--strategy", map_args.strategy, "exhaustive | emst | knn:K");
  map->add_flag("--merge", map_args.merge, "contract inter-frame edges");
  map->add_option("--seed", map_args.seed, "subsampling seed");
  map->add_option("--min-confidence", map_args.min_confidence, "drop matches below this confidence");
  map->add_option("--out", map_args.out, "output graph file")->required();

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "costmaps for the query frames of a bundle");
  plan->add_option("--graph", plan_args.graph)->required();
  plan->add_option("--goal", plan_args.goal, "goal node F,U,V or frame F")->required();
  plan->add_option("--query", plan_args.query, "bundle with map frames followed by query frames")->required();
  plan->add_option("--out", plan_args.out, "output directory")->required();
  plan->add_option("--densify", plan_args.densify)->check(CLI::IsMember({"pruned", "brute-force"}));

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run seeded navigation episodes");
  run->add_option("--world", run_args.world, "world spec JSON")->required();
  run->add_option("--task", run_args.task)->check(CLI::IsMember({"imitate", "altgoal", "shortcut", "reverse"}));
  run->add_option("--episodes", run_args.episodes);
  run->add_option("--seed", run_args.seed);
  run->add_option("--localizer", run_args.localizer)->check(CLI::IsMember({"oracle", "matched"}));
  run->add_flag("--trace", run_args.trace, "include per-step traces in the report");
  run->add_option("--report", run_args.report, "report JSON");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "representation-efficiency benchmark");
  bench->add_option("--bundle", bench_args.bundle)->required();
  bench->add_option("--strategies", bench_args.strategies, "comma-separated strategies");
  bench->add_option("--subsample", bench_args.subsample, "comma-separated subsampling factors");
  bench->add_option("--repeats", bench_args.repeats);
  bench->add_option("--goal", bench_args.goal, "goal node F,U,V");
  bench->add_flag("--merge", bench_args.merge);
  bench->add_option("--world", bench_args.world, "world spec for the navigation columns");
  bench->add_option("--episodes", bench_args.episodes, "Imitate episodes per row");
  bench->add_option("--report", bench_args.report);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-world", "render a synthetic traversal into a match bundle");
  gen->add_option("--spec", gen_args.spec, "world spec JSON")->required();
  gen->add_option("--route", gen_args.route, "waypoints x,y;x,y;... (or space separated)");
  gen->add_option("--queries", gen_args.queries, "query poses x,y,yaw;... appended after the map frames");
  gen->add_option("--poses-out", gen_args.poses_out, "write mapping poses as JSON");
  gen->add_option("--out", gen_args.out, "output bundle")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*map) return cmd_map(map_args);
    if (*plan) return cmd_plan(plan_args);
    if (*run) return cmd_run(run_args);
    if (*bench) return cmd_bench(bench_args);
    if (*gen) return cmd_gen_world(gen_args);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
