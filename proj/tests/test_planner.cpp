#include "test_support.hpp"

#include "waypixel/error.hpp"
#include "waypixel/planner.hpp"
#include "waypixel/synthworld.hpp"

#include <doctest.h>

#include <map>

using namespace waypixel;

namespace {

// A graph with one node per frame at pixel (0, 0) and arbitrary edges.
PixelGraph manual_graph(std::size_t n, const std::vector<WeightedEdge>& edges) {
  PixelGraph g;
  g.num_frames = static_cast<std::uint32_t>(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    g.nodes.push_back({i, 0, 0});
    g.points.emplace_back(0.0f, 0.0f, 1.0f);
    g.representative.push_back(i);
    g.per_frame.push_back({i});
  }
  g.intra_edges = edges;
  return g;
}

PixelGraph random_weighted_graph(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> w(0.0f, 5.0f);
  std::bernoulli_distribution zero(0.1);
  const double p = std::min(1.0, 4.0 / static_cast<double>(n));
  std::bernoulli_distribution has(p);
  std::vector<WeightedEdge> edges;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (has(rng)) edges.push_back({a, b, zero(rng) ? 0.0f : w(rng)});
    }
  }
  return manual_graph(n, edges);
}

// One frame whose pixel k sits at `points[k]`, all valid.
FrameRecord frame_with_points(std::uint32_t id, const std::vector<Eigen::Vector3f>& points) {
  FrameRecord f;
  f.frame_id = id;
  f.width = static_cast<int>(points.size());
  f.height = 1;
  f.pointmap = points;
  f.valid_mask.assign(points.size(), 1);
  return f;
}

SparseCostmap random_sparse(std::mt19937_64& rng, const FrameRecord& q, std::size_t m) {
  auto pixels = testing::valid_pixels(q);
  std::shuffle(pixels.begin(), pixels.end(), rng);
  pixels.resize(std::min(m, pixels.size()));
  std::sort(pixels.begin(), pixels.end(), [](PixelCoord a, PixelCoord b) {
    return std::pair{a.v, a.u} < std::pair{b.v, b.u};
  });
  std::uniform_real_distribution<double> cost(0.0, 30.0);
  SparseCostmap s;
  for (auto p : pixels) s.entries.push_back({p, cost(rng)});
  return s;
}

}  // namespace

TEST_CASE("goal_costs examples") {
  const auto g = manual_graph(3, {{0, 1, 1.0f}, {1, 2, 2.0f}});
  const auto field = goal_costs(g, NodeKey{2, 0, 0});
  CHECK(field.cost(2) == 0.0);
  CHECK(field.cost(0) == 3.0);
  CHECK(field.goal == 2);
  try {
    goal_costs(g, NodeKey{5, 0, 0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GoalNotInGraph);
  }
}

TEST_CASE("goal_costs equals Bellman-Ford on random graphs") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 1 + rng() % 200;
    const auto g = random_weighted_graph(rng, n);
    const auto goal = static_cast<std::uint32_t>(rng() % n);
    const auto field = goal_costs(g, g.nodes[goal]);
    const auto oracle = testing::bellman_ford(n, testing::graph_edge_list(g), goal);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(testing::close_rel(field.cost(i), oracle[i]));
    for (const auto& e : g.intra_edges) {
      if (std::isfinite(field.cost(e.a))) CHECK(std::abs(field.cost(e.a) - field.cost(e.b)) <= e.weight + 1e-9);
    }
  }
}

TEST_CASE("goal_costs on merged graphs matches the unmerged field") {
  std::mt19937_64 rng(32);
  testing::BundleShape shape;
  shape.max_matches = 15;
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const auto b = testing::random_bundle(rng, shape);
    PixelGraph g;
    try {
      g = build_graph(b, {});
    } catch (const Error&) {
      continue;
    }
    const auto m = merge_nodes(g);
    const auto goal = g.nodes[rng() % g.nodes.size()];
    const auto fu = goal_costs(g, goal);
    const auto fm = goal_costs(m, goal);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) CHECK(testing::close_rel(fu.cost(i), fm.cost(i)));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("CostFieldCache shares fields per goal") {
  const auto g = manual_graph(3, {{0, 1, 1.0f}, {1, 2, 2.0f}});
  CostFieldCache cache(g);
  const auto a = cache.get({2, 0, 0});
  const auto b = cache.get({2, 0, 0});
  CHECK(a.get() == b.get());
  CHECK(cache.get({0, 0, 0})->cost(2) == 3.0);
}

TEST_CASE("bridge_cost examples") {
  PixelGraph g;
  g.nodes = {{0, 0, 0}, {0, 1, 0}};
  g.points = {{1.0f, 0.0f, 1.0f}, {4.0f, 0.0f, 1.0f}};
  g.representative = {0, 1};
  g.per_frame = {{0, 1}};
  CostField field;
  field.node_cost = {10.0, 3.0};
  const std::vector<std::uint32_t> nodes = {0, 1};

  const auto coincide = bridge_cost({4.0f, 0.0f, 1.0f}, nodes, g, field);
  CHECK(coincide.cost == 3.0);
  CHECK(coincide.node == 1);

  const auto two = bridge_cost({0.0f, 0.0f, 1.0f}, nodes, g, field);
  CHECK(two.cost == 7.0);
  CHECK(two.node == 1);

  field.node_cost = {5.0, 5.0};
  const auto tie = bridge_cost({2.5f, 0.0f, 1.0f}, nodes, g, field);
  CHECK(tie.node == 0);

  field.node_cost = {kInfiniteCost, kInfiniteCost};
  try {
    bridge_cost({0.0f, 0.0f, 1.0f}, nodes, g, field);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoReachableNode);
  }
}

TEST_CASE("bridge_cost equals an exhaustive scan") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<float> xy(-4.0f, 4.0f);
  std::uniform_real_distribution<double> c(0.0, 20.0);
  std::bernoulli_distribution unreachable(0.2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 300;
    PixelGraph g;
    CostField field;
    std::vector<std::uint32_t> nodes;
    for (std::uint32_t i = 0; i < n; ++i) {
      g.nodes.push_back({0, static_cast<int>(i), 0});
      g.points.emplace_back(xy(rng), xy(rng), xy(rng) + 5.0f);
      field.node_cost.push_back(unreachable(rng) ? kInfiniteCost : c(rng));
      nodes.push_back(i);
    }
    const Eigen::Vector3f ref(xy(rng), xy(rng), xy(rng) + 5.0f);
    double best = kInfiniteCost;
    std::uint32_t arg = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
      const double dx = static_cast<double>(ref.x()) - g.points[i].x();
      const double dy = static_cast<double>(ref.y()) - g.points[i].y();
      const double dz = static_cast<double>(ref.z()) - g.points[i].z();
      const double total = std::sqrt(dx * dx + dy * dy + dz * dz) + field.node_cost[i];
      if (total < best) {
        best = total;
        arg = i;
      }
    }
    if (!std::isfinite(best)) {
      CHECK_THROWS_AS(bridge_cost(ref, nodes, g, field), Error);
      continue;
    }
    const auto r = bridge_cost(ref, nodes, g, field);
    CHECK(r.cost == doctest::Approx(best).epsilon(1e-12));
    CHECK(r.node == arg);
  }
}

TEST_CASE("lower median") {
  CHECK(lower_median({2, 2, 8}) == 2.0);
  CHECK(lower_median({3, 3, 3}) == 3.0);
  CHECK(lower_median({4, 1, 3, 2}) == 2.0);
  CHECK(lower_median({7}) == 7.0);
}

namespace {

// Frame f holds nodes at pixels 0..k-1 with the given costs, all at the origin.
struct SelectionFixture {
  PixelGraph graph;
  CostField field;
  std::vector<FrameRecord> frames;
};

SelectionFixture selection_fixture(const std::vector<std::vector<double>>& costs) {
  SelectionFixture s;
  for (std::uint32_t f = 0; f < costs.size(); ++f) {
    std::vector<Eigen::Vector3f> pts(costs[f].size(), Eigen::Vector3f(0.0f, 0.0f, 1.0f));
    s.frames.push_back(frame_with_points(f, pts));
    s.graph.per_frame.emplace_back();
    for (std::size_t k = 0; k < costs[f].size(); ++k) {
      s.graph.per_frame.back().push_back(static_cast<std::uint32_t>(s.graph.nodes.size()));
      s.graph.nodes.push_back({f, static_cast<int>(k), 0});
      s.graph.points.emplace_back(static_cast<float>(k) * 1000.0f, 0.0f, 1.0f);
      s.field.node_cost.push_back(costs[f][k]);
    }
  }
  // Node points far apart so every pixel bridges to its own node.
  for (std::uint32_t f = 0; f < costs.size(); ++f) {
    for (std::size_t k = 0; k < costs[f].size(); ++k) {
      s.frames[f].pointmap[k] = Eigen::Vector3f(static_cast<float>(k) * 1000.0f, 0.0f, 1.0f);
    }
  }
  return s;
}

FrameMatches matches_to_all(std::uint32_t frame, std::size_t k) {
  FrameMatches fm;
  fm.ref_frame = frame;
  for (std::size_t i = 0; i < k; ++i) fm.matches.push_back({{static_cast<int>(i), 0}, {static_cast<int>(i), 0}, 1.0f});
  return fm;
}

}  // namespace

TEST_CASE("select_reference examples") {
  SUBCASE("single frame") {
    auto s = selection_fixture({{4.0, 6.0}});
    const std::vector<FrameMatches> q = {matches_to_all(0, 2)};
    CHECK(select_reference(s.graph, s.field, s.frames, q).reference == 0);
  }
  SUBCASE("median comparison") {
    auto s = selection_fixture({{2, 2, 8}, {3, 3, 3}});
    const std::vector<FrameMatches> q = {matches_to_all(0, 3), matches_to_all(1, 3)};
    const auto sel = select_reference(s.graph, s.field, s.frames, q);
    CHECK(sel.reference == 0);
    CHECK(sel.selected().median == 2.0);
  }
  SUBCASE("ties prefer more matches, then the lower id") {
    auto s = selection_fixture({{1, 5}, {1, 5, 6}, {1, 5, 6}});
    const std::vector<FrameMatches> q = {matches_to_all(0, 2), matches_to_all(1, 3), matches_to_all(2, 3)};
    // medians: frame 0 -> 1, frames 1 and 2 -> 5
    CHECK(select_reference(s.graph, s.field, s.frames, q).reference == 0);
    auto t = selection_fixture({{5, 5}, {5, 5, 5}, {5, 5, 5}});
    CHECK(select_reference(t.graph, t.field, t.frames, q).reference == 1);
  }
  SUBCASE("no matches") {
    auto s = selection_fixture({{1.0}});
    const std::vector<FrameMatches> q = {FrameMatches{0, {}}};
    try {
      select_reference(s.graph, s.field, s.frames, q);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoLocalizedFrame);
    }
  }
}

TEST_CASE("select_reference equals a one-pass recompute") {
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> c(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t nf = 1 + rng() % 6;
    std::vector<std::vector<double>> costs(nf);
    for (auto& fc : costs) {
      fc.resize(1 + rng() % 7);
      // coarse values make median ties common
      for (auto& x : fc) x = std::floor(c(rng));
    }
    auto s = selection_fixture(costs);
    std::vector<FrameMatches> q;
    for (std::uint32_t f = 0; f < nf; ++f) q.push_back(matches_to_all(f, rng() % (costs[f].size() + 1)));

    // oracle: (median, -count, id) lexicographic minimum
    std::tuple<double, long, std::uint32_t> best{kInfiniteCost, 0, 0};
    bool any = false;
    for (std::uint32_t f = 0; f < nf; ++f) {
      std::vector<double> v(costs[f].begin(), costs[f].begin() + static_cast<long>(q[f].matches.size()));
      if (v.empty()) continue;
      std::sort(v.begin(), v.end());
      const std::tuple<double, long, std::uint32_t> key{v[(v.size() - 1) / 2], -static_cast<long>(v.size()), f};
      if (!any || key < best) best = key;
      any = true;
    }
    if (!any) {
      CHECK_THROWS_AS(select_reference(s.graph, s.field, s.frames, q), Error);
      continue;
    }
    const auto sel = select_reference(s.graph, s.field, s.frames, q);
    CHECK(sel.reference == std::get<2>(best));
    CHECK(sel.selected().median == std::get<0>(best));
  }
}

TEST_CASE("sparse_costmap examples") {
  BridgedFrame one;
  one.frame = 3;
  one.bridged = {{{2, 1}, {0, 0}, 4.2, 0}};
  const auto s1 = sparse_costmap(9, one);
  REQUIRE(s1.entries.size() == 1);
  CHECK(s1.entries[0].cost == 4.2);
  CHECK(s1.reference_frame == 3);
  CHECK(s1.query_frame == 9);

  BridgedFrame twice;
  twice.bridged = {{{2, 1}, {0, 0}, 5.0, 0}, {{0, 2}, {1, 0}, 1.0, 0}, {{2, 1}, {1, 1}, 3.0, 0}};
  const auto s2 = sparse_costmap(0, twice);
  REQUIRE(s2.entries.size() == 2);
  CHECK(s2.entries[0].pixel == PixelCoord{2, 1});
  CHECK(s2.entries[0].cost == 3.0);
  CHECK(s2.entries[1].pixel == PixelCoord{0, 2});
}

TEST_CASE("synthetic pipeline composes from bridge_cost") {
  synth::WorldSpec spec;
  spec.layout = synth::LayoutKind::Corridor;
  spec.width = 5;
  spec.length = 14;
  spec.seed = 5;
  const auto world = synth::build_world(spec);
  const auto trav = synth::generate_traversal(world, {{2.5, 1.0}, {2.5, 10.0}}, 0.5, {}, 3, {});
  GraphBuildConfig cfg;
  const auto g = build_graph(trav.bundle, cfg);
  const auto goal = g.nodes[g.per_frame.back().front()];
  const auto field = goal_costs(g, goal);

  const auto query = synth::render_frame(world, {2.6, 3.1, std::numbers::pi / 2 + 0.05}, {}, {}, 100);
  std::vector<FrameMatches> qm;
  for (std::uint32_t f = 2; f <= 8; ++f) {
    const auto pair = synth::oracle_match(query, trav.observations[f], {});
    qm.push_back({f, pair.matches});
  }
  const auto sel = select_reference(g, field, trav.bundle.frames, qm);
  const auto sparse = sparse_costmap(100, sel.selected());
  REQUIRE(!sparse.entries.empty());

  std::map<std::pair<int, int>, double> expect;
  for (const auto& fm : qm) {
    if (fm.ref_frame != sel.reference) continue;
    for (const auto& m : fm.matches) {
      const auto& frame = trav.bundle.frames[fm.ref_frame];
      const auto b = bridge_cost(frame.point(m.pixel_j), g.per_frame[fm.ref_frame], g, field);
      const auto key = std::pair{m.pixel_i.u, m.pixel_i.v};
      auto it = expect.find(key);
      if (it == expect.end()) expect.emplace(key, b.cost);
      else it->second = std::min(it->second, b.cost);
    }
  }
  REQUIRE(expect.size() == sparse.entries.size());
  for (const auto& e : sparse.entries) CHECK(expect.at({e.pixel.u, e.pixel.v}) == e.cost);

  const auto dense = densify_costmap(sparse, query.frame);
  for (const auto& e : sparse.entries) CHECK(dense.at(e.pixel) == e.cost);
}

TEST_CASE("densify_costmap examples") {
  const auto q = frame_with_points(0, {{0, 0, 1}, {1.5f, 0, 1}, {0, 0, 3}});
  SparseCostmap s;
  s.entries = {{{0, 0}, 2.0}};
  const auto d = densify_costmap(s, q);
  CHECK(d.at({0, 0}) == 2.0);
  CHECK(d.at({1, 0}) == 3.5);
  CHECK(d.at({2, 0}) == 4.0);
  CHECK(d.provenance == std::vector<std::int32_t>{0, 0, 0});

  auto masked = q;
  masked.valid_mask[1] = 0;
  const auto dm = densify_costmap(s, masked);
  CHECK(std::isinf(dm.at({1, 0})));
  CHECK(dm.provenance[1] == -1);

  try {
    densify_costmap(SparseCostmap{}, q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySparseSet);
  }
}

TEST_CASE("densify equals a brute-force oracle and the pruned mode") {
  std::mt19937_64 rng(35);
  for (int t = 0; t < 10; ++t) {
    const auto q = testing::random_frame(rng, 0, 64, 48, 0.9);
    const auto s = random_sparse(rng, q, 200);
    const auto d = densify_costmap(s, q, DensifyMode::BruteForce);
    const auto p = densify_costmap(s, q, DensifyMode::Pruned);
    CHECK(d.cost == p.cost);
    CHECK(d.provenance == p.provenance);
    std::map<std::pair<int, int>, double> sparse_at;
    for (const auto& e : s.entries) sparse_at[{e.pixel.u, e.pixel.v}] = e.cost;
    for (int v = 0; v < q.height; ++v) {
      for (int u = 0; u < q.width; ++u) {
        const PixelCoord px{u, v};
        if (!q.valid(px)) {
          REQUIRE(std::isinf(d.at(px)));
          continue;
        }
        if (auto it = sparse_at.find({u, v}); it != sparse_at.end()) {
          REQUIRE(d.at(px) == it->second);
          continue;
        }
        double best = kInfiniteCost;
        for (const auto& e : s.entries) {
          const Eigen::Vector3d a = q.point(px).cast<double>();
          const Eigen::Vector3d b = q.point(e.pixel).cast<double>();
          best = std::min(best, std::sqrt((a - b).squaredNorm()) + e.cost);
        }
        REQUIRE(testing::close_rel(d.at(px), best, 1e-12));
        // definitional minimality against every source
        const auto& src = s.entries[static_cast<std::size_t>(d.provenance[q.index(px)])];
        CHECK(testing::close_rel(d.at(px), (q.point(px).cast<double>() - q.point(src.pixel).cast<double>()).norm() + src.cost, 1e-12));
      }
    }
  }
}

TEST_CASE("removing a sparse source never lowers a dense cost") {
  std::mt19937_64 rng(36);
  for (int t = 0; t < 20; ++t) {
    const auto q = testing::random_frame(rng, 0, 16, 12, 0.9);
    const auto s = random_sparse(rng, q, 20);
    if (s.entries.size() < 2) continue;
    auto fewer = s;
    const auto removed = fewer.entries.begin() + static_cast<long>(rng() % fewer.entries.size());
    const auto removed_index = q.index(removed->pixel);
    fewer.entries.erase(removed);
    const auto full = densify_costmap(s, q);
    const auto part = densify_costmap(fewer, q);
    for (std::size_t i = 0; i < full.cost.size(); ++i) {
      // the removed pixel held a given cost, not a minimum over sources
      if (full.valid[i] && i != removed_index) CHECK(part.cost[i] >= full.cost[i]);
    }
  }
}

TEST_CASE("EMST costmaps dominate exhaustive costmaps") {
  synth::WorldSpec spec;
  spec.layout = synth::LayoutKind::Corridor;
  spec.width = 5;
  spec.length = 12;
  spec.seed = 6;
  const auto world = synth::build_world(spec);
  const auto trav = synth::generate_traversal(world, {{2.5, 1.0}, {2.5, 9.0}}, 0.5, {}, 3, {});
  GraphBuildConfig ce;
  ce.strategy = IntraStrategy::Exhaustive;
  const auto ge = build_graph(trav.bundle, ce);
  const auto gm = build_graph(trav.bundle, {});
  REQUIRE(ge.nodes == gm.nodes);
  const auto goal = gm.nodes[gm.per_frame.back().front()];
  const auto fe = goal_costs(ge, goal);
  const auto fm = goal_costs(gm, goal);
  for (std::size_t i = 0; i < ge.nodes.size(); ++i) CHECK(fm.cost(i) >= fe.cost(i) - 1e-9);

  const auto query = synth::render_frame(world, {2.4, 2.0, std::numbers::pi / 2}, {}, {}, 50);
  const std::uint32_t r = 2;
  const auto pair = synth::oracle_match(query, trav.observations[r], {});
  const std::vector<FrameMatches> qm = {{r, pair.matches}};
  const auto de = densify_costmap(sparse_costmap(50, select_reference(ge, fe, trav.bundle.frames, qm).selected()), query.frame);
  const auto dm = densify_costmap(sparse_costmap(50, select_reference(gm, fm, trav.bundle.frames, qm).selected()), query.frame);
  for (std::size_t i = 0; i < de.cost.size(); ++i) {
    if (de.valid[i]) CHECK(dm.cost[i] >= de.cost[i] - 1e-9);
  }
}

TEST_CASE("encode_costmap") {
  WayPixelCostmap c;
  c.width = 3;
  c.height = 1;
  c.cost = {0.0, 7.5, 7.5};
  c.valid = {1, 1, 1};
  const auto e = encode_costmap(c);
  CHECK(e.channels == 16);
  const auto zero = e.pixel(0);
  for (int j = 0; j < 8; ++j) {
    CHECK(zero[2 * j] == 0.0f);
    CHECK(zero[2 * j + 1] == 1.0f);
  }
  CHECK(std::equal(e.pixel(1).begin(), e.pixel(1).end(), e.pixel(2).begin()));

  const auto lambdas = embedding_wavelengths(16, 64.0);
  CHECK(lambdas.front() == 1.0);
  CHECK(lambdas.back() == doctest::Approx(64.0));

  c.valid[2] = 0;
  const auto masked = encode_costmap(c, 4);
  for (float x : masked.pixel(2)) CHECK(x == 0.0f);
  CHECK_THROWS_AS(encode_costmap(c, 3), Error);

  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> cost(0.0, 500.0);
  WayPixelCostmap r;
  r.width = 64;
  r.height = 48;
  for (int i = 0; i < 64 * 48; ++i) {
    r.cost.push_back(cost(rng));
    r.valid.push_back(1);
  }
  for (float x : encode_costmap(r).values) CHECK((x >= -1.0f && x <= 1.0f));
}
