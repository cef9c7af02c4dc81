#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "crowdflow/common.hpp"

namespace crowdflow {

enum class BoundaryKind : std::uint8_t { interior, wall, outflow, periodic };

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::interior: return "interior";
    case BoundaryKind::wall: return "wall";
    case BoundaryKind::outflow: return "outflow";
    case BoundaryKind::periodic: return "periodic";
  }
  return "?";
}

inline BoundaryKind boundary_kind_from_string(const std::string& s) {
  if (s == "wall") return BoundaryKind::wall;
  if (s == "outflow") return BoundaryKind::outflow;
  if (s == "periodic") return BoundaryKind::periodic;
  throw ConfigError("unknown boundary kind '" + s + "' (expected wall, outflow or periodic)");
}

struct Box {
  double xmin = 0.0;
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool contains(Vec2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
};

struct Obstacle {
  std::string name;
  Box box;
};

/// Boundary condition on each side of the rectangular domain.
struct BoundarySpec {
  BoundaryKind left = BoundaryKind::wall;
  BoundaryKind right = BoundaryKind::wall;
  BoundaryKind bottom = BoundaryKind::wall;
  BoundaryKind top = BoundaryKind::wall;
};

struct Edge {
  std::array<int, 2> vertices{};
  int left = -1;
  /// -1 for boundary edges.
  int right = -1;
  BoundaryKind kind = BoundaryKind::interior;
  double length = 0.0;
  /// Unit normal pointing from the left cell into the right cell.
  Vec2 normal;
  Vec2 midpoint;

  bool is_boundary() const { return right < 0; }
};

/// A cell's view of one of its edges; sign is +1 when the edge normal is
/// outward for that cell.
struct CellEdge {
  int edge = -1;
  double sign = 1.0;
};

/// Lattice bookkeeping of the diagonal-split grid. Square (i, j) carries a
/// lower triangle (tri 0) below the SW-NE diagonal and an upper one (tri 1).
struct StructuredInfo {
  int nx = 0;
  int ny = 0;
  Box domain;
  double hx = 0.0;
  double hy = 0.0;
  std::vector<int> cell_of;

  int cell(int i, int j, int tri) const {
    if (i < 0 || j < 0 || i >= nx || j >= ny) return -1;
    return cell_of[(static_cast<std::size_t>(j) * nx + i) * 2 + tri];
  }
};

struct SnapReport {
  std::string name;
  Box requested;
  Box snapped;
  /// Largest coordinate shift, in domain length units.
  double distance = 0.0;
};

struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<Edge> edges;
  std::vector<double> cell_area;
  std::vector<Vec2> cell_centroid;
  std::vector<std::array<CellEdge, 3>> cell_edges;
  StructuredInfo grid;
  BoundarySpec boundary;
  std::vector<SnapReport> snaps;

  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  double total_area() const {
    double s = 0.0;
    for (double a : cell_area) s += a;
    return s;
  }

  double perimeter(int c) const {
    double p = 0.0;
    for (const auto& ce : cell_edges[c]) p += edges[ce.edge].length;
    return p;
  }

  /// Diameter of the inscribed circle, 4 A / P.
  double incircle_diameter(int c) const { return 4.0 * cell_area[c] / perimeter(c); }

  double min_inradius() const {
    double r = std::numeric_limits<double>::infinity();
    for (int c = 0; c < num_cells(); ++c) r = std::min(r, 0.5 * incircle_diameter(c));
    return r;
  }

  /// Largest cell diameter (longest edge).
  double max_diameter() const {
    double d = 0.0;
    for (const auto& e : edges) d = std::max(d, e.length);
    return d;
  }

  /// Cell whose closed triangle contains p, or -1.
  int locate(Vec2 p) const {
    const auto& g = grid;
    if (g.nx == 0 || !g.domain.contains(p)) return -1;
    int i = std::clamp(static_cast<int>(std::floor((p.x - g.domain.xmin) / g.hx)), 0, g.nx - 1);
    int j = std::clamp(static_cast<int>(std::floor((p.y - g.domain.ymin) / g.hy)), 0, g.ny - 1);
    double u = (p.x - g.domain.xmin) / g.hx - i;
    double v = (p.y - g.domain.ymin) / g.hy - j;
    return g.cell(i, j, v <= u ? 0 : 1);
  }
};

namespace detail {

inline int snap_index(double coord, double origin, double length, int n, double& dist_cells) {
  double f = (coord - origin) * n / length;
  double r = std::round(f);
  dist_cells = std::max(dist_cells, std::abs(f - r));
  return static_cast<int>(r);
}

inline std::string box_str(const Box& b) {
  std::ostringstream os;
  os << "[" << b.xmin << ", " << b.xmax << "] x [" << b.ymin << ", " << b.ymax << "]";
  return os.str();
}

}  // namespace detail

/// Builds the diagonal-split triangulation of `domain` with nx x ny squares,
/// removing squares covered by obstacles after snapping them to grid lines.
inline Mesh build_structured_tri_mesh(int nx, int ny, const Box& domain,
                                      std::span<const Obstacle> obstacles = {},
                                      const BoundarySpec& bc = {}) {
  if (nx < 1 || ny < 1) throw ConfigError("mesh resolution must be at least 1x1");
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
    throw ConfigError("mesh domain must have positive width and height");
  const bool px = bc.left == BoundaryKind::periodic || bc.right == BoundaryKind::periodic;
  const bool py = bc.bottom == BoundaryKind::periodic || bc.top == BoundaryKind::periodic;
  if (px && (bc.left != bc.right || nx < 2))
    throw ConfigError("periodic x boundary needs both left and right periodic and nx >= 2");
  if (py && (bc.bottom != bc.top || ny < 2))
    throw ConfigError("periodic y boundary needs both bottom and top periodic and ny >= 2");

  Mesh m;
  m.boundary = bc;
  auto& g = m.grid;
  g.nx = nx;
  g.ny = ny;
  g.domain = domain;
  g.hx = domain.width() / nx;
  g.hy = domain.height() / ny;

  std::vector<char> blocked(static_cast<std::size_t>(nx) * ny, 0);
  const double tol = 1e-12 * std::max(domain.width(), domain.height());
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    const auto& ob = obstacles[k];
    const std::string label = ob.name.empty() ? "obstacle #" + std::to_string(k) : "obstacle '" + ob.name + "'";
    const Box& b = ob.box;
    if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin))
      throw ConfigError(label + " " + detail::box_str(b) + " is empty");
    if (b.xmin < domain.xmin - tol || b.xmax > domain.xmax + tol || b.ymin < domain.ymin - tol ||
        b.ymax > domain.ymax + tol)
      throw ConfigError(label + " " + detail::box_str(b) + " leaves the domain");
    double dx = 0.0, dy = 0.0;
    int i0 = detail::snap_index(b.xmin, domain.xmin, domain.width(), nx, dx);
    int i1 = detail::snap_index(b.xmax, domain.xmin, domain.width(), nx, dx);
    int j0 = detail::snap_index(b.ymin, domain.ymin, domain.height(), ny, dy);
    int j1 = detail::snap_index(b.ymax, domain.ymin, domain.height(), ny, dy);
    if (dx > 0.5 + 1e-9 || dy > 0.5 + 1e-9)
      throw ConfigError(label + " " + detail::box_str(b) + " is not representable on the grid");
    if (i1 <= i0 || j1 <= j0)
      throw ConfigError(label + " " + detail::box_str(b) + " vanishes after snapping to the grid");
    for (int j = j0; j < j1; ++j)
      for (int i = i0; i < i1; ++i) blocked[static_cast<std::size_t>(j) * nx + i] = 1;
    Box snapped{domain.xmin + domain.width() * i0 / nx, domain.xmin + domain.width() * i1 / nx,
                domain.ymin + domain.height() * j0 / ny, domain.ymin + domain.height() * j1 / ny};
    m.snaps.push_back({ob.name, b, snapped, std::max(dx * g.hx, dy * g.hy)});
  }

  m.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    double y = j == ny ? domain.ymax : domain.ymin + domain.height() * j / ny;
    for (int i = 0; i <= nx; ++i) {
      double x = i == nx ? domain.xmax : domain.xmin + domain.width() * i / nx;
      m.vertices.push_back({x, y});
    }
  }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  auto key_of = [&](int v) {
    int i = v % (nx + 1);
    int j = v / (nx + 1);
    if (px && i == nx) i = 0;
    if (py && j == ny) j = 0;
    return vid(i, j);
  };

  g.cell_of.assign(static_cast<std::size_t>(nx) * ny * 2, -1);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (blocked[static_cast<std::size_t>(j) * nx + i]) continue;
      int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
      g.cell_of[(static_cast<std::size_t>(j) * nx + i) * 2 + 0] = m.num_cells();
      m.cells.push_back({v00, v10, v11});
      g.cell_of[(static_cast<std::size_t>(j) * nx + i) * 2 + 1] = m.num_cells();
      m.cells.push_back({v00, v11, v01});
    }
  }

  const int nc = m.num_cells();
  m.cell_area.resize(nc);
  m.cell_centroid.resize(nc);
  m.cell_edges.resize(nc);
  std::map<std::pair<int, int>, int> edge_of;
  for (int c = 0; c < nc; ++c) {
    const auto& t = m.cells[c];
    Vec2 a = m.vertices[t[0]], b = m.vertices[t[1]], d = m.vertices[t[2]];
    m.cell_area[c] = 0.5 * cross(b - a, d - a);
    if (!(m.cell_area[c] > 0.0)) throw ConfigError("degenerate triangle in mesh");
    m.cell_centroid[c] = (a + b + d) / 3.0;
    for (int k = 0; k < 3; ++k) {
      int va = t[k], vb = t[(k + 1) % 3];
      int ka = key_of(va), kb = key_of(vb);
      auto key = std::minmax(ka, kb);
      auto it = edge_of.find(key);
      if (it == edge_of.end()) {
        Edge e;
        e.vertices = {va, vb};
        e.left = c;
        Vec2 d_ab = m.vertices[vb] - m.vertices[va];
        e.length = norm(d_ab);
        e.normal = Vec2{d_ab.y, -d_ab.x} / e.length;
        e.midpoint = 0.5 * (m.vertices[va] + m.vertices[vb]);
        edge_of.emplace(key, m.num_edges());
        m.cell_edges[c][k] = {m.num_edges(), 1.0};
        m.edges.push_back(e);
      } else {
        Edge& e = m.edges[it->second];
        if (e.right >= 0) throw ConfigError("non-manifold edge in mesh");
        e.right = c;
        m.cell_edges[c][k] = {it->second, -1.0};
      }
    }
  }

  for (auto& e : m.edges) {
    if (e.right >= 0) {
      const auto& lt = m.cells[e.left];
      const auto& rt = m.cells[e.right];
      // A periodic seam joins two cells that share no physical edge.
      int shared = 0;
      for (int q = 0; q < 3; ++q)
        for (int r = 0; r < 3; ++r)
          if (lt[q] == rt[r]) ++shared;
      e.kind = shared >= 2 ? BoundaryKind::interior : BoundaryKind::periodic;
      continue;
    }
    Vec2 a = m.vertices[e.vertices[0]], b = m.vertices[e.vertices[1]];
    if (a.x == domain.xmin && b.x == domain.xmin) e.kind = bc.left;
    else if (a.x == domain.xmax && b.x == domain.xmax) e.kind = bc.right;
    else if (a.y == domain.ymin && b.y == domain.ymin) e.kind = bc.bottom;
    else if (a.y == domain.ymax && b.y == domain.ymax) e.kind = bc.top;
    else e.kind = BoundaryKind::wall;
    if (e.kind == BoundaryKind::periodic) e.kind = BoundaryKind::wall;  // only reachable next to obstacles
  }
  return m;
}

}  // namespace crowdflow
