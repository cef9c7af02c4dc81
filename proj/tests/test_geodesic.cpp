#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "crowdflow/geodesic.hpp"

using namespace crowdflow;

namespace {

const Box unit{0.0, 1.0, 0.0, 1.0};
const std::vector<Box> road{{0.0, 0.4, 0.45, 0.55}, {0.6, 1.0, 0.45, 0.55}};

bool in_road(Vec2 x) {
  for (const auto& b : road)
    if (x.x >= b.xmin && x.x <= b.xmax && x.y > b.ymin && x.y < b.ymax) return true;
  return false;
}

// Dijkstra on an n x n node grid with every step (a, b), |a|, |b| <= 3 and
// gcd(a, b) = 1; a step is allowed when its sampled segment avoids the road.
// Walkers head for the bottom row.
std::vector<double> dijkstra_to_bottom(int n) {
  const double h = 1.0 / (n - 1);
  std::vector<double> dist(n * n, INFINITY);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (int i = 0; i < n; ++i) {
    dist[i] = 0.0;
    heap.push({0.0, i});
  }
  std::vector<std::pair<int, int>> steps;
  for (int a = -3; a <= 3; ++a)
    for (int b = -3; b <= 3; ++b)
      if ((a || b) && std::gcd(a, b) == 1) steps.push_back({a, b});
  while (!heap.empty()) {
    auto [d, k] = heap.top();
    heap.pop();
    if (d > dist[k]) continue;
    const int i = k % n, j = k / n;
    for (auto [a, b] : steps) {
      const int ii = i + a, jj = j + b;
      if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
      bool clear = true;
      for (int s = 0; s <= 8 && clear; ++s) clear = !in_road({(i + a * s / 8.0) * h, (j + b * s / 8.0) * h});
      if (!clear) continue;
      const double nd = d + h * std::hypot(a, b);
      if (nd < dist[jj * n + ii]) {
        dist[jj * n + ii] = nd;
        heap.push({nd, jj * n + ii});
      }
    }
  }
  return dist;
}

}  // namespace

TEST(Eikonal, OpenDomainDistanceIsHeight) {
  auto d = solve_eikonal(make_eikonal_grid(unit, 41, 41, {}, TargetSide::bottom));
  EXPECT_EQ(d.unreachable, 0u);
  for (int j = 0; j < 41; ++j)
    for (int i = 0; i < 41; ++i) EXPECT_NEAR(d.T[d.grid.index(i, j)], j / 40.0, 1e-12);
  Vec2 v;
  ASSERT_TRUE(sample_direction(d, {0.37, 0.61}, v));
  EXPECT_NEAR(v.x, 0.0, 1e-12);
  EXPECT_NEAR(v.y, -1.0, 1e-12);
  EXPECT_NEAR(sample_distance(d, {0.37, 0.61}), 0.61, 1e-12);
}

TEST(Eikonal, RoundsTheKerb) {
  // road blocks y in [0.45, 0.55] except the crossing x in [0.4, 0.6]; a
  // walker north-west of the crossing bends round the corner (0.4, 0.55)
  std::vector<Box> road{{0.0, 0.4, 0.45, 0.55}, {0.6, 1.0, 0.45, 0.55}};
  auto d = solve_eikonal(make_eikonal_grid(unit, 257, 257, road, TargetSide::bottom));
  const Vec2 corner{0.4, 0.55};
  for (Vec2 x : {Vec2{0.2, 0.8}, Vec2{0.1, 0.95}, Vec2{0.3, 0.6}}) {
    const double exact = norm(x - corner) + 0.55;
    EXPECT_NEAR(sample_distance(d, x), exact, 0.02 * exact);
    Vec2 v;
    ASSERT_TRUE(sample_direction(d, x, v));
    EXPECT_GT(dot(v, (corner - x) / norm(corner - x)), 0.99);
  }
  // inside the crossing the way is straight down
  Vec2 v;
  ASSERT_TRUE(sample_direction(d, {0.5, 0.5}, v));
  EXPECT_LT(v.y, -0.99);
}

TEST(Eikonal, PointSourceIsEuclidean) {
  EikonalGrid g = make_eikonal_grid(unit, 65, 65, {}, TargetSide::bottom);
  std::fill(g.target.begin(), g.target.end(), 0);
  g.target[g.index(20, 30)] = 1;
  auto d = solve_eikonal(g);
  double worst = 0.0;
  for (int j = 0; j < 65; ++j)
    for (int i = 0; i < 65; ++i)
      worst = std::max(worst, std::abs(d.T[g.index(i, j)] - norm(g.node(i, j) - g.node(20, 30))));
  // first-order marching from a point source is O(h |log h|), not O(h)
  EXPECT_LE(worst, g.hx * std::abs(std::log(g.hx)));
  EXPECT_GT(worst, 0.0);
  EXPECT_EQ(d.T[g.index(20, 45)], 15 * g.hx);
}

TEST(Eikonal, WalledTargetLeavesEverythingUnreachable) {
  EikonalGrid g = make_eikonal_grid(unit, 21, 21, {}, TargetSide::bottom);
  std::fill(g.target.begin(), g.target.end(), 0);
  g.target[g.index(10, 10)] = 1;
  for (int j = 9; j <= 11; ++j)
    for (int i = 9; i <= 11; ++i)
      if (i != 10 || j != 10) g.walkable[g.index(i, j)] = 0;
  auto d = solve_eikonal(g);
  EXPECT_EQ(d.unreachable, 21u * 21u - 9u);
}

TEST(Eikonal, CrosswalkMatchesDijkstraNextHop) {
  auto d = solve_eikonal(make_eikonal_grid(unit, 256, 256, road, TargetSide::bottom));
  Mesh m = build_structured_tri_mesh(80, 80, unit);
  auto f = direction_field(d, m);
  const int n = 200;
  const double h = 1.0 / (n - 1);
  auto dist = dijkstra_to_bottom(n);
  auto at = [&](int i, int j) { return dist[std::clamp(j, 0, n - 1) * n + std::clamp(i, 0, n - 1)]; };
  int total = 0, good = 0;
  for (int c = 0; c < m.num_cells(); ++c) {
    const Vec2 x = m.cell_centroid[c];
    if (x.y < 0.6 || (x.x > 0.38 && x.x < 0.62)) continue;
    const int i = static_cast<int>(std::lround(x.x / h)), j = static_cast<int>(std::lround(x.y / h));
    Vec2 g{(at(i + 1, j) - at(i - 1, j)) / (2 * h), (at(i, j + 1) - at(i, j - 1)) / (2 * h)};
    if (!std::isfinite(g.x) || !std::isfinite(g.y) || norm(g) == 0.0) continue;
    const Vec2 oracle = -g / norm(g);
    ++total;
    if (dot(oracle, f.dir[c]) >= std::cos(15.0 * M_PI / 180.0)) ++good;
  }
  ASSERT_GT(total, 1000);
  EXPECT_GE(good, 0.95 * total) << good << " of " << total;
}

TEST(Eikonal, FollowingTheFieldDescends) {
  auto d = solve_eikonal(make_eikonal_grid(unit, 256, 256, road, TargetSide::bottom));
  const double h = d.grid.hx;
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  int walkers = 0;
  while (walkers < 100) {
    Vec2 x{u(rng), u(rng)};
    if (in_road(x) || std::abs(x.y - 0.45) < 2 * h || std::abs(x.y - 0.55) < 2 * h) continue;
    ++walkers;
    double t = sample_distance(d, x);
    for (int k = 0; k < 20000 && t > h; ++k) {
      Vec2 v;
      ASSERT_TRUE(sample_direction(d, x, v)) << x.x << ' ' << x.y;
      // a step that would cut a kerb corner slides along the wall instead,
      // as the zero wall flux does for the crowd
      Vec2 step = 0.25 * h * v;
      if (in_road(x + step)) {
        const Vec2 sx{step.x, 0.0}, sy{0.0, step.y};
        const bool ox = !in_road(x + sx), oy = !in_road(x + sy);
        ASSERT_TRUE(ox || oy);
        step = ox && oy ? (sample_distance(d, x + sx) < sample_distance(d, x + sy) ? sx : sy) : (ox ? sx : sy);
      }
      x += step;
      const double next = sample_distance(d, x);
      ASSERT_LT(next, t) << "walker stalled at " << x.x << ' ' << x.y;
      t = next;
    }
    EXPECT_LE(t, h);
  }
}

TEST(Eikonal, EnclosedPocketFallsBack) {
  std::vector<Box> ring{{0.3, 0.7, 0.3, 0.36}, {0.3, 0.7, 0.64, 0.7}, {0.3, 0.36, 0.3, 0.7}, {0.64, 0.7, 0.3, 0.7}};
  auto d = solve_eikonal(make_eikonal_grid(unit, 41, 41, ring, TargetSide::bottom));
  EXPECT_GT(d.unreachable, 0u);
  EXPECT_TRUE(std::isinf(sample_distance(d, {0.5, 0.5})));
  Mesh m = build_structured_tri_mesh(20, 20, unit);
  auto f = direction_field(d, m);
  EXPECT_GT(f.fallback_count, 0u);
  const int c = m.locate({0.5, 0.5});
  // nearest target node is straight below
  EXPECT_NEAR(f.dir[c].x, 0.0, 0.1);
  EXPECT_LT(f.dir[c].y, -0.99);
  for (const auto& v : f.dir) EXPECT_NEAR(norm(v), 1.0, 1e-12);
}

TEST(Eikonal, Errors) {
  EXPECT_THROW(make_eikonal_grid(unit, 1, 10, {}, TargetSide::top), ConfigError);
  EXPECT_THROW(target_side_from_string("north"), ConfigError);
  EXPECT_EQ(target_side_from_string("top"), TargetSide::top);
}
