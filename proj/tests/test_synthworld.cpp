#include "waypixel/error.hpp"
#include "waypixel/synthworld.hpp"

#include <doctest.h>

#include <cmath>
#include <queue>
#include <random>
#include <set>

using namespace waypixel;
using namespace waypixel::synth;

namespace {

double seg_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x() - a.x()) * dx + (p.y() - a.y()) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x() - (a.x() + t * dx), p.y() - (a.y() + t * dy));
}

double min_wall_dist(const World& w, const Vec2& p) {
  double best = 1e18;
  for (const auto& s : w.walls) best = std::min(best, seg_dist(p, s.a, s.b));
  return best;
}

WorldSpec rooms_spec(std::uint64_t seed) {
  WorldSpec s;
  s.layout = LayoutKind::CorridorThreeRooms;
  s.width = 12;
  s.length = 9;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("build_world is deterministic and validates density") {
  WorldSpec s;
  s.width = 6;
  s.length = 6;
  s.landmark_density = 10;
  s.seed = 7;
  const auto a = build_world(s);
  const auto b = build_world(s);
  REQUIRE(a.landmarks.size() == b.landmarks.size());
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
    CHECK(a.landmarks[i].position == b.landmarks[i].position);
  }
  CHECK(a.landmarks.size() == 4 * 60);
  s.landmark_density = 0;
  CHECK_THROWS_AS(build_world(s), Error);
}

TEST_CASE("corridor+3rooms landmarks lie on walls") {
  auto s = rooms_spec(42);
  const auto w = build_world(s);
  CHECK(w.rooms.size() == 3);
  for (const auto& lm : w.landmarks) {
    CHECK(min_wall_dist(w, lm.position.head<2>()) < 1e-9);
    CHECK(lm.position.z() >= w.floor_z);
    CHECK(lm.position.z() <= w.ceiling_z);
  }
}

TEST_CASE("degenerate multi-room layout") {
  auto s = rooms_spec(1);
  s.width = 6;
  try {
    build_world(s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLayout);
  }
}

TEST_CASE("squarely facing a wall 1 m away gives depth 1") {
  WorldSpec s;
  s.seed = 1;
  const auto w = build_world(s);
  const Pose pose{3.0, 5.0, std::numbers::pi / 2};
  const auto obs = render_frame(w, pose, {}, {});
  const auto& p = obs.frame.point({32, 24});
  CHECK(obs.frame.valid({32, 24}));
  CHECK(std::abs(p.z() - 1.0) < 1e-6);
}

TEST_CASE("landmarks behind a wall are not visible") {
  const auto w = build_world(rooms_spec(3));
  const Pose pose{4.0, 1.25, std::numbers::pi / 2};
  const Intrinsics k;
  const auto obs = render_frame(w, pose, k, {});
  for (const auto& vl : obs.visible_landmarks) {
    CHECK(w.landmarks[vl.landmark_id].position.y() <= 2.5 + 1e-9);
  }
  // Room landmarks do project into the image, so the check above is not vacuous.
  int in_view = 0;
  for (const auto& lm : w.landmarks) {
    if (lm.position.y() <= 2.6) continue;
    const auto pc = camera_from_world(pose, lm.position);
    if (pc.z() > 0.05 && std::abs(pc.x() / pc.z()) < 1.0 && std::abs(pc.y() / pc.z()) < 0.75) ++in_view;
  }
  CHECK(in_view > 10);
}

TEST_CASE("rendering consistency of visible landmarks") {
  const auto w = build_world(rooms_spec(5));
  const Intrinsics k;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(0.5, 11.5), uy(0.5, 2.0), yaw(-3.14, 3.14);
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    const Pose pose{ux(rng), uy(rng), yaw(rng)};
    const auto obs = render_frame(w, pose, k, {});
    for (const auto& vl : obs.visible_landmarks) {
      const auto pc = camera_from_world(pose, w.landmarks[vl.landmark_id].position);
      const Eigen::Vector3d got = obs.frame.point(vl.pixel).cast<double>();
      CHECK((got - pc).norm() < k.angular_resolution() * pc.norm() + 1e-5);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("scale jitter applies one shared factor") {
  const auto w = build_world(rooms_spec(9));
  const Pose pose{6.0, 1.25, 0.3};
  const auto clean = render_frame(w, pose, {}, {});
  NoiseKnobs n;
  n.scale_jitter = 0.2;
  n.seed = 77;
  const auto noisy = render_frame(w, pose, {}, n);
  CHECK(noisy.scale >= 0.8);
  CHECK(noisy.scale <= 1.2);
  CHECK(noisy.scale != 1.0);
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i < clean.frame.pointmap.size(); ++i) {
    if (!clean.frame.valid_mask[i]) continue;
    const double r = noisy.frame.pointmap[i].norm() / clean.frame.pointmap[i].norm();
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi - lo < 1e-5);
  CHECK(std::abs(lo - noisy.scale) < 1e-5);
}

TEST_CASE("oracle_match examples") {
  const auto w = build_world(rooms_spec(4));
  const Pose pose{6.0, 1.25, 0.0};
  const auto a = render_frame(w, pose, {}, {}, 0);
  const auto b = render_frame(w, pose, {}, {}, 1);

  SUBCASE("identical pose matches every landmark to itself") {
    const auto m = oracle_match(b, a, {});
    CHECK(m.matches.size() == a.visible_landmarks.size());
    for (const auto& x : m.matches) CHECK(x.pixel_i == x.pixel_j);
  }
  SUBCASE("disjoint views give no matches") {
    const auto r0 = render_frame(w, {2.0, 6.0, std::numbers::pi / 2}, {}, {}, 0);
    const auto r2 = render_frame(w, {10.0, 6.0, -std::numbers::pi / 2}, {}, {}, 1);
    CHECK(oracle_match(r2, r0, {}).matches.empty());
  }
  SUBCASE("dropout thins matches binomially and is seeded") {
    NoiseKnobs n;
    n.match_dropout = 0.5;
    n.seed = 99;
    const double total = static_cast<double>(a.visible_landmarks.size());
    REQUIRE(total > 30);
    const auto m1 = oracle_match(b, a, n);
    const auto m2 = oracle_match(b, a, n);
    CHECK(m1 == m2);
    const double kept = static_cast<double>(m1.matches.size());
    CHECK(std::abs(kept - 0.5 * total) <= 3.0 * std::sqrt(total * 0.25));
  }
  SUBCASE("symmetry") {
    const auto c = render_frame(w, {7.0, 1.0, 0.4}, {}, {}, 1);
    const auto ab = oracle_match(c, a, {});
    const auto ba = oracle_match(a, c, {});
    std::set<std::pair<PixelCoord, PixelCoord>> s1, s2;
    for (const auto& m : ab.matches) s1.insert({m.pixel_i, m.pixel_j});
    for (const auto& m : ba.matches) s2.insert({m.pixel_j, m.pixel_i});
    CHECK(s1 == s2);
    CHECK(!s1.empty());
  }
}

TEST_CASE("generate_traversal arithmetic and validity") {
  WorldSpec s;
  s.layout = LayoutKind::Corridor;
  s.width = 4;
  s.length = 8;
  s.seed = 3;
  const auto w = build_world(s);
  const auto tr = generate_traversal(w, {{2.0, 1.0}, {2.0, 5.0}}, 0.5, {}, 3, {});
  CHECK(tr.poses.size() == 9);
  CHECK(validate_bundle(tr.bundle).ok());

  const auto ten = generate_traversal(w, {{2.0, 1.0}, {2.0, 5.5}}, 0.5, {}, 3, {});
  REQUIRE(ten.poses.size() == 10);
  CHECK(ten.bundle.pairs.size() == 24);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto world = build_world(rooms_spec(rng()));
    NoiseKnobs n;
    n.point_sigma = 0.01;
    n.scale_jitter = 0.1;
    n.match_dropout = 0.2;
    n.seed = rng();
    const auto trv = generate_traversal(world, {{0.8, 1.25}, {6.0, 1.25}, {6.0, 7.0}}, 0.5, {}, 3, n);
    CHECK(validate_bundle(trv.bundle).ok());
  }
}

TEST_CASE("routes through walls are rejected") {
  const auto w = build_world(rooms_spec(1));
  try {
    generate_traversal(w, {{3.0, 1.25}, {3.0, 6.0}}, 0.5, {}, 3, {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnreachableRoute);
  }
}

TEST_CASE("step_robot examples") {
  WorldSpec s;
  s.seed = 2;
  const auto w = build_world(s);
  const Pose p{3.0, 3.0, 0.7};
  const auto r = step_robot(w, p, {0.25, 0.0});
  CHECK(!r.collided);
  CHECK(std::abs(r.pose.x - (3.0 + 0.25 * std::cos(0.7))) < 1e-12);
  CHECK(std::abs(r.pose.y - (3.0 + 0.25 * std::sin(0.7))) < 1e-12);

  const Pose near{5.7, 3.0, 0.0};  // wall at x = 6, 0.3 m ahead
  const auto hit = step_robot(w, near, {1.0, 0.0});
  CHECK(hit.collided);
  CHECK(hit.pose == near);
}

TEST_CASE("random walks never enter the inflated walls") {
  const auto w = build_world(rooms_spec(11));
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> fwd(0.0, 0.5), turn(-1.5, 1.5);
  for (int walk = 0; walk < 100; ++walk) {
    Pose p{1.0 + (walk % 10), 1.25, 0.0};
    for (int t = 0; t < 300; ++t) {
      p = step_robot(w, p, {fwd(rng), turn(rng)}).pose;
      REQUIRE(min_wall_dist(w, p.position()) >= kRobotRadius - 1e-9);
      REQUIRE(w.bounds.contains(p.position()));
    }
  }
}

TEST_CASE("geodesic distances match a fine grid search") {
  const auto w = build_world(rooms_spec(6));
  const GeodesicMap geo(w);
  CHECK(std::abs(geo.distance({1.0, 1.0}, {5.0, 1.5}) - std::hypot(4.0, 0.5)) < 1e-9);

  // 8-connected grid Dijkstra over free cells; it overestimates by at most
  // the 8-neighbourhood factor and the cell size.
  const double h = 0.05;
  const int nx = static_cast<int>(12 / h) + 1, ny = static_cast<int>(9 / h) + 1;
  std::vector<char> free(static_cast<std::size_t>(nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      free[j * nx + i] = min_wall_dist(w, {i * h, j * h}) >= kRobotRadius;
    }
  }
  auto grid_dist = [&](Vec2 a, Vec2 b) {
    const int si = static_cast<int>(std::lround(a.x() / h)), sj = static_cast<int>(std::lround(a.y() / h));
    const int ti = static_cast<int>(std::lround(b.x() / h)), tj = static_cast<int>(std::lround(b.y() / h));
    std::vector<double> d(free.size(), 1e18);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    d[sj * nx + si] = 0;
    pq.push({0, sj * nx + si});
    while (!pq.empty()) {
      auto [dd, c] = pq.top();
      pq.pop();
      if (dd > d[c]) continue;
      const int ci = c % nx, cj = c / nx;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int ni = ci + di, nj = cj + dj;
          if ((di == 0 && dj == 0) || ni < 0 || nj < 0 || ni >= nx || nj >= ny || !free[nj * nx + ni]) continue;
          const double nd = dd + h * std::hypot(di, dj);
          if (nd < d[nj * nx + ni]) {
            d[nj * nx + ni] = nd;
            pq.push({nd, nj * nx + ni});
          }
        }
      }
    }
    return d[tj * nx + ti];
  };
  const std::vector<std::pair<Vec2, Vec2>> queries = {
      {{1.0, 1.25}, {2.0, 7.0}}, {{1.0, 7.0}, {10.0, 7.0}}, {{6.0, 4.0}, {11.0, 1.0}}, {{3.0, 8.0}, {1.0, 3.0}}};
  for (const auto& [a, b] : queries) {
    const double g = geo.distance(a, b);
    const double grid = grid_dist(a, b);
    CHECK(g <= grid + 2 * h);
    CHECK(grid <= g * 1.0824 + 2 * h);  // 1 / cos(22.5 deg)
    CHECK(g >= (a - b).norm() - 1e-9);
  }
}
