#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "crowdflow/common.hpp"
#include "crowdflow/mesh.hpp"

namespace crowdflow {

/// Node grid for the eikonal solve: nodes at domain.xmin + i hx, i < nx.
struct EikonalGrid {
  Box domain;
  int nx = 0;
  int ny = 0;
  double hx = 0.0;
  double hy = 0.0;
  std::vector<std::uint8_t> walkable;
  std::vector<std::uint8_t> target;

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  Vec2 node(int i, int j) const { return {domain.xmin + i * hx, domain.ymin + j * hy}; }
};

enum class TargetSide { bottom, top, left, right };

inline TargetSide target_side_from_string(const std::string& s) {
  if (s == "bottom") return TargetSide::bottom;
  if (s == "top") return TargetSide::top;
  if (s == "left") return TargetSide::left;
  if (s == "right") return TargetSide::right;
  throw ConfigError("unknown target side '" + s + "'");
}

/// Walkable nodes are those outside the open interior of every obstacle;
/// an obstacle side on the domain boundary is closed, so no corridor of
/// boundary nodes leaks past it. Targets are the walkable nodes on one side.
inline EikonalGrid make_eikonal_grid(const Box& domain, int nodes_x, int nodes_y,
                                     const std::vector<Box>& obstacles, TargetSide side) {
  if (nodes_x < 2 || nodes_y < 2) throw ConfigError("eikonal grid needs at least 2 nodes per axis");
  EikonalGrid g;
  g.domain = domain;
  g.nx = nodes_x;
  g.ny = nodes_y;
  g.hx = domain.width() / (nodes_x - 1);
  g.hy = domain.height() / (nodes_y - 1);
  g.walkable.assign(static_cast<std::size_t>(nodes_x) * nodes_y, 1);
  g.target.assign(g.walkable.size(), 0);
  for (int j = 0; j < nodes_y; ++j)
    for (int i = 0; i < nodes_x; ++i) {
      Vec2 x = g.node(i, j);
      for (const auto& b : obstacles) {
        const bool in_x = (b.xmin <= domain.xmin ? x.x >= b.xmin : x.x > b.xmin) &&
                          (b.xmax >= domain.xmax ? x.x <= b.xmax : x.x < b.xmax);
        const bool in_y = (b.ymin <= domain.ymin ? x.y >= b.ymin : x.y > b.ymin) &&
                          (b.ymax >= domain.ymax ? x.y <= b.ymax : x.y < b.ymax);
        if (in_x && in_y) g.walkable[g.index(i, j)] = 0;
      }
      bool on_side = (side == TargetSide::bottom && j == 0) || (side == TargetSide::top && j == nodes_y - 1) ||
                     (side == TargetSide::left && i == 0) || (side == TargetSide::right && i == nodes_x - 1);
      if (on_side && g.walkable[g.index(i, j)]) g.target[g.index(i, j)] = 1;
    }
  return g;
}

struct DistanceField {
  EikonalGrid grid;
  /// Travel time to the target; +inf where unreachable or not walkable.
  std::vector<double> T;
  std::size_t unreachable = 0;
};

/// First-order fast marching for |grad T| = 1 with T = 0 on targets.
inline DistanceField solve_eikonal(const EikonalGrid& g) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  DistanceField d;
  d.grid = g;
  const std::size_t n = g.walkable.size();
  d.T.assign(n, inf);
  std::vector<std::uint8_t> known(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t k = 0; k < n; ++k)
    if (g.target[k] && g.walkable[k]) {
      d.T[k] = 0.0;
      heap.push({0.0, k});
    }
  auto known_value = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny) return inf;
    std::size_t k = g.index(i, j);
    return known[k] ? d.T[k] : inf;
  };
  auto solve_at = [&](int i, int j) {
    double a = std::min(known_value(i - 1, j), known_value(i + 1, j));
    double b = std::min(known_value(i, j - 1), known_value(i, j + 1));
    if (a == inf) return b + g.hy;
    if (b == inf) return a + g.hx;
    // (T - a)^2 / hx^2 + (T - b)^2 / hy^2 = 1
    const double ax = 1.0 / (g.hx * g.hx), by = 1.0 / (g.hy * g.hy);
    const double qa = ax + by;
    const double qb = -2.0 * (a * ax + b * by);
    const double qc = a * a * ax + b * b * by - 1.0;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
      if (t >= std::max(a, b)) return t;
    }
    return std::min(a + g.hx, b + g.hy);
  };
  while (!heap.empty()) {
    auto [t, k] = heap.top();
    heap.pop();
    if (known[k] || t > d.T[k]) continue;
    known[k] = 1;
    const int i = static_cast<int>(k % g.nx), j = static_cast<int>(k / g.nx);
    const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (const auto& q : nb) {
      if (q[0] < 0 || q[1] < 0 || q[0] >= g.nx || q[1] >= g.ny) continue;
      std::size_t m = g.index(q[0], q[1]);
      if (known[m] || !g.walkable[m]) continue;
      double cand = solve_at(q[0], q[1]);
      if (cand < d.T[m]) {
        d.T[m] = cand;
        heap.push({cand, m});
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (g.walkable[k] && d.T[k] == inf) ++d.unreachable;
  return d;
}

/// Unit vectors -grad T / |grad T| at cell centroids.
struct DirectionField {
  std::vector<Vec2> dir;
  /// Cells where the gradient was unusable and the fallback was taken.
  std::size_t fallback_count = 0;
};

namespace detail {

inline Vec2 node_gradient(const DistanceField& d, int i, int j) {
  const auto& g = d.grid;
  auto val = [&](int a, int b) {
    if (a < 0 || b < 0 || a >= g.nx || b >= g.ny) return std::numeric_limits<double>::infinity();
    return d.T[g.index(a, b)];
  };
  const double c = val(i, j);
  auto diff = [&](double m, double p, double h) {
    const bool fm = std::isfinite(m), fp = std::isfinite(p);
    if (fm && fp) return (p - m) / (2.0 * h);
    if (fp) return (p - c) / h;
    if (fm) return (c - m) / h;
    return 0.0;
  };
  return {diff(val(i - 1, j), val(i + 1, j), g.hx), diff(val(i, j - 1), val(i, j + 1), g.hy)};
}

}  // namespace detail

/// Samples the descent direction of T at point x, or returns false on a
/// plateau or where no finite data surround x.
inline bool sample_direction(const DistanceField& d, Vec2 x, Vec2& out) {
  const auto& g = d.grid;
  double fx = (x.x - g.domain.xmin) / g.hx, fy = (x.y - g.domain.ymin) / g.hy;
  int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.nx - 2);
  int j = std::clamp(static_cast<int>(std::floor(fy)), 0, g.ny - 2);
  double u = std::clamp(fx - i, 0.0, 1.0), v = std::clamp(fy - j, 0.0, 1.0);
  double t00 = d.T[g.index(i, j)], t10 = d.T[g.index(i + 1, j)];
  double t01 = d.T[g.index(i, j + 1)], t11 = d.T[g.index(i + 1, j + 1)];
  Vec2 grad;
  if (std::isfinite(t00) && std::isfinite(t10) && std::isfinite(t01) && std::isfinite(t11)) {
    grad = {((1 - v) * (t10 - t00) + v * (t11 - t01)) / g.hx, ((1 - u) * (t01 - t00) + u * (t11 - t10)) / g.hy};
  } else {
    const double w[4] = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
    const int ci[4][2] = {{i, j}, {i + 1, j}, {i, j + 1}, {i + 1, j + 1}};
    double ws = 0.0;
    for (int q = 0; q < 4; ++q) {
      if (!std::isfinite(d.T[g.index(ci[q][0], ci[q][1])])) continue;
      grad += w[q] * detail::node_gradient(d, ci[q][0], ci[q][1]);
      ws += w[q];
    }
    if (ws == 0.0) return false;
    grad = grad / ws;
  }
  const double gn = norm(grad);
  if (!(gn > 1e-12)) return false;
  out = -grad / gn;
  return true;
}

/// Direction field at cell centroids. Where sampling fails the cell points
/// at the nearest target node.
inline DirectionField direction_field(const DistanceField& d, const Mesh& mesh) {
  DirectionField f;
  f.dir.assign(mesh.num_cells(), Vec2{});
  const auto& g = d.grid;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    Vec2 x = mesh.cell_centroid[c];
    Vec2 v;
    if (sample_direction(d, x, v)) {
      f.dir[c] = v;
      continue;
    }
    ++f.fallback_count;
    double best = std::numeric_limits<double>::infinity();
    Vec2 to;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (g.target[g.index(i, j)]) {
          Vec2 dd = g.node(i, j) - x;
          if (norm2(dd) < best) {
            best = norm2(dd);
            to = dd;
          }
        }
    f.dir[c] = norm(to) > 0.0 ? to / norm(to) : Vec2{};
  }
  return f;
}

/// T sampled bilinearly over the finite corners; +inf if none.
inline double sample_distance(const DistanceField& d, Vec2 x) {
  const auto& g = d.grid;
  double fx = (x.x - g.domain.xmin) / g.hx, fy = (x.y - g.domain.ymin) / g.hy;
  int i = std::clamp(static_cast<int>(std::floor(fx)), 0, g.nx - 2);
  int j = std::clamp(static_cast<int>(std::floor(fy)), 0, g.ny - 2);
  double u = std::clamp(fx - i, 0.0, 1.0), v = std::clamp(fy - j, 0.0, 1.0);
  const double w[4] = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
  const std::size_t k[4] = {g.index(i, j), g.index(i + 1, j), g.index(i, j + 1), g.index(i + 1, j + 1)};
  double s = 0.0, ws = 0.0;
  for (int q = 0; q < 4; ++q)
    if (std::isfinite(d.T[k[q]])) {
      s += w[q] * d.T[k[q]];
      ws += w[q];
    }
  return ws > 0.0 ? s / ws : std::numeric_limits<double>::infinity();
}

}  // namespace crowdflow
