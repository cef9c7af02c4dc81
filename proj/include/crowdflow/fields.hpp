#pragma once

#include <vector>

#include "crowdflow/common.hpp"
#include "crowdflow/mesh.hpp"

namespace crowdflow {

/// Cell averages of n populations, each in [0, capacity].
struct DensityField {
  double capacity = 1.0;
  std::vector<std::vector<double>> rho;

  DensityField() = default;
  DensityField(int populations, int cells, double cap = 1.0)
      : capacity(cap), rho(populations, std::vector<double>(cells, 0.0)) {}

  int populations() const { return static_cast<int>(rho.size()); }
  int cells() const { return rho.empty() ? 0 : static_cast<int>(rho[0].size()); }
};

/// Per-population velocity sampled at cell centroids.
struct VelocityField {
  double t = 0.0;
  std::vector<std::vector<Vec2>> v;
};

inline double population_mass(const Mesh& mesh, const std::vector<double>& rho) {
  double m = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) m += mesh.cell_area[c] * rho[c];
  return m;
}

inline std::vector<double> masses(const Mesh& mesh, const DensityField& d) {
  std::vector<double> out;
  for (const auto& r : d.rho) out.push_back(population_mass(mesh, r));
  return out;
}

/// Piecewise-constant field from boxes (xmin, xmax, ymin, ymax, value);
/// a cell takes the value of every box that holds its centroid.
struct BoxValue {
  Box box;
  double value = 0.0;
};

inline std::vector<double> rasterize_boxes(const Mesh& mesh, const std::vector<BoxValue>& boxes) {
  std::vector<double> f(mesh.num_cells(), 0.0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    for (const auto& b : boxes)
      if (b.box.contains(mesh.cell_centroid[c])) f[c] += b.value;
  }
  return f;
}

}  // namespace crowdflow
