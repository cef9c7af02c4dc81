#pragma once

#include <array>
#include <span>
#include <vector>

#include "crowdflow/common.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/kernels.hpp"
#include "crowdflow/mesh.hpp"

namespace crowdflow {

namespace detail {

/// Visits, in increasing id order, every cell whose centroid may lie in `ybox`.
template <class Fn>
void for_each_cell_in(const Mesh& mesh, const Box& ybox, Fn&& fn) {
  const auto& g = mesh.grid;
  if (g.nx == 0) {
    for (int c = 0; c < mesh.num_cells(); ++c) fn(c);
    return;
  }
  auto lo = [](double v, double o, double h, int n) {
    return std::clamp(static_cast<int>(std::floor((v - o) / h)) - 1, 0, n - 1);
  };
  auto hi = [](double v, double o, double h, int n) {
    return std::clamp(static_cast<int>(std::floor((v - o) / h)) + 1, 0, n - 1);
  };
  if (ybox.xmax < g.domain.xmin - g.hx || ybox.xmin > g.domain.xmax + g.hx ||
      ybox.ymax < g.domain.ymin - g.hy || ybox.ymin > g.domain.ymax + g.hy)
    return;
  int i0 = lo(ybox.xmin, g.domain.xmin, g.hx, g.nx), i1 = hi(ybox.xmax, g.domain.xmin, g.hx, g.nx);
  int j0 = lo(ybox.ymin, g.domain.ymin, g.hy, g.ny), j1 = hi(ybox.ymax, g.domain.ymin, g.hy, g.ny);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      for (int t = 0; t < 2; ++t) {
        int c = g.cell(i, j, t);
        if (c >= 0) fn(c);
      }
}

}  // namespace detail

/// Sum over cells of field * area * kfn(centroid), restricted to cells whose
/// centroid may lie in `ybox`. kfn must vanish outside that box.
template <class T, class KFn>
T gather_at(std::span<const double> field, const Mesh& mesh, const Box& ybox, KFn&& kfn) {
  T acc{};
  detail::for_each_cell_in(mesh, ybox, [&](int c) {
    acc += (field[c] * mesh.cell_area[c]) * kfn(mesh.cell_centroid[c]);
  });
  return acc;
}

inline Box convolution_window(const Kernel& k, Vec2 x) {
  Box s = k.support();
  return {x.x - s.xmax, x.x - s.xmin, x.y - s.ymax, x.y - s.ymin};
}

/// (field * eta)(x) by centroid quadrature at each point.
inline std::vector<double> convolve(std::span<const double> field, const Kernel& kernel,
                                    const Mesh& mesh, std::span<const Vec2> points) {
  std::vector<double> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    Vec2 x = points[p];
    out[p] = gather_at<double>(field, mesh, convolution_window(kernel, x),
                               [&](Vec2 y) { return kernel(x - y); });
  }
  return out;
}

/// grad (field * eta)(x) = (field * grad eta)(x).
inline std::vector<Vec2> convolve_grad(std::span<const double> field, const Kernel& kernel,
                                       const Mesh& mesh, std::span<const Vec2> points) {
  std::vector<Vec2> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    Vec2 x = points[p];
    out[p] = gather_at<Vec2>(field, mesh, convolution_window(kernel, x),
                             [&](Vec2 y) { return kernel.gradient(x - y); });
  }
  return out;
}

/// Integral of field(y) eta(y - x): the kernel looks from x towards y.
inline std::vector<double> correlate(std::span<const double> field, const Kernel& kernel,
                                     const Mesh& mesh, std::span<const Vec2> points) {
  std::vector<double> out(points.size());
  Box s = kernel.support();
  for (std::size_t p = 0; p < points.size(); ++p) {
    Vec2 x = points[p];
    Box win{x.x + s.xmin, x.x + s.xmax, x.y + s.ymin, x.y + s.ymax};
    out[p] = gather_at<double>(field, mesh, win, [&](Vec2 y) { return kernel(y - x); });
  }
  return out;
}

struct MollifiedField {
  std::vector<double> value;
  std::vector<Vec2> gradient;
};

/// Mollification at all cell centroids. On the structured lattice the sum
/// factorizes into an x pass and a y pass per pair of triangle sublattices.
class CentroidConvolver {
 public:
  CentroidConvolver(const Mesh& mesh, const Kernel& kernel) : mesh_(&mesh), kernel_(kernel) {
    const auto& g = mesh.grid;
    if (g.nx == 0) return;
    static constexpr double off[2][2] = {{2.0 / 3.0, 1.0 / 3.0}, {1.0 / 3.0, 2.0 / 3.0}};
    Box s = kernel.support();
    const double inv = 1.0 / kernel.normalization();
    for (int src = 0; src < 2; ++src)
      for (int dst = 0; dst < 2; ++dst) {
        double sx = off[dst][0] - off[src][0];
        double sy = off[dst][1] - off[src][1];
        int klo = static_cast<int>(std::floor(s.xmin / g.hx - sx)) - 1;
        int khi = static_cast<int>(std::ceil(s.xmax / g.hx - sx)) + 1;
        int mlo = static_cast<int>(std::floor(s.ymin / g.hy - sy)) - 1;
        int mhi = static_cast<int>(std::ceil(s.ymax / g.hy - sy)) + 1;
        auto& ax = ax_[src][dst];
        auto& dax = dax_[src][dst];
        auto& by = by_[src][dst];
        auto& dby = dby_[src][dst];
        ax.lo = dax.lo = klo;
        by.lo = dby.lo = mlo;
        for (int k = klo; k <= khi; ++k) {
          double d = (k + sx) * g.hx;
          ax.w.push_back(kernel.factor_x(d) * inv);
          dax.w.push_back(kernel.factor_x_derivative(d) * inv);
        }
        for (int m = mlo; m <= mhi; ++m) {
          double d = (m + sy) * g.hy;
          by.w.push_back(kernel.factor_y(d));
          dby.w.push_back(kernel.factor_y_derivative(d));
        }
      }
  }

  const Kernel& kernel() const { return kernel_; }
  const Mesh& mesh() const { return *mesh_; }

  MollifiedField apply(std::span<const double> field, bool want_value = true,
                       bool want_gradient = true) const {
    const Mesh& mesh = *mesh_;
    const int nc = mesh.num_cells();
    MollifiedField out;
    if (want_value) out.value.assign(nc, 0.0);
    if (want_gradient) out.gradient.assign(nc, Vec2{});
    const auto& g = mesh.grid;
    if (g.nx == 0) {
      std::vector<Vec2> pts(mesh.cell_centroid);
      if (want_value) out.value = convolve(field, kernel_, mesh, pts);
      if (want_gradient) out.gradient = convolve_grad(field, kernel_, mesh, pts);
      return out;
    }
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
    std::vector<double> src[2] = {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t q = 0; q < n; ++q)
      for (int t = 0; t < 2; ++t) {
        int c = g.cell_of[q * 2 + t];
        if (c >= 0) src[t][q] = field[c] * mesh.cell_area[c];
      }
    std::vector<double> val(n), gx(n), gy(n), xa(n), xd(n);
    for (int dst = 0; dst < 2; ++dst) {
      std::fill(val.begin(), val.end(), 0.0);
      std::fill(gx.begin(), gx.end(), 0.0);
      std::fill(gy.begin(), gy.end(), 0.0);
      for (int s = 0; s < 2; ++s) {
        x_pass(src[s], ax_[s][dst], xa);
        if (want_value) y_pass(xa, by_[s][dst], val);
        if (want_gradient) {
          y_pass(xa, dby_[s][dst], gy);
          x_pass(src[s], dax_[s][dst], xd);
          y_pass(xd, by_[s][dst], gx);
        }
      }
      for (std::size_t q = 0; q < n; ++q) {
        int c = g.cell_of[q * 2 + dst];
        if (c < 0) continue;
        if (want_value) out.value[c] = val[q];
        if (want_gradient) out.gradient[c] = {gx[q], gy[q]};
      }
    }
    return out;
  }

 private:
  struct Taps {
    int lo = 0;
    std::vector<double> w;
  };

  void x_pass(const std::vector<double>& f, const Taps& taps, std::vector<double>& out) const {
    const int nx = mesh_->grid.nx, ny = mesh_->grid.ny;
    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jb, std::size_t je) {
      for (std::size_t j = jb; j < je; ++j) {
        double* o = out.data() + j * nx;
        const double* in = f.data() + j * nx;
        std::fill(o, o + nx, 0.0);
        for (std::size_t q = 0; q < taps.w.size(); ++q) {
          const double w = taps.w[q];
          if (w == 0.0) continue;
          const int k = taps.lo + static_cast<int>(q);
          const int ib = std::max(0, k), ie = std::min(nx, nx + k);
          for (int i = ib; i < ie; ++i) o[i] += w * in[i - k];
        }
      }
    });
  }

  void y_pass(const std::vector<double>& f, const Taps& taps, std::vector<double>& out) const {
    const int nx = mesh_->grid.nx, ny = mesh_->grid.ny;
    parallel_for(static_cast<std::size_t>(ny), [&](std::size_t jb, std::size_t je) {
      for (std::size_t j = jb; j < je; ++j) {
        double* o = out.data() + j * nx;
        for (std::size_t q = 0; q < taps.w.size(); ++q) {
          const double w = taps.w[q];
          if (w == 0.0) continue;
          const long jj = static_cast<long>(j) - (taps.lo + static_cast<long>(q));
          if (jj < 0 || jj >= ny) continue;
          const double* in = f.data() + jj * nx;
          for (int i = 0; i < nx; ++i) o[i] += w * in[i];
        }
      }
    });
  }

  const Mesh* mesh_;
  Kernel kernel_;
  Taps ax_[2][2], dax_[2][2], by_[2][2], dby_[2][2];
};

/// eps[i][j] weights the effect of population j on population i.
using InteractionMatrix = std::vector<std::vector<double>>;

/// Crowd avoidance: A^i = sum_j eps_ij sat(grad(rho^j * eta)).
inline std::vector<std::vector<Vec2>> nonlocal_A_tourist(const DensityField& rho,
                                                         const InteractionMatrix& eps,
                                                         const CentroidConvolver& conv) {
  const int n = rho.populations();
  const int nc = rho.cells();
  std::vector<std::vector<Vec2>> grads(n);
  for (int j = 0; j < n; ++j) grads[j] = conv.apply(rho.rho[j], false, true).gradient;
  std::vector<std::vector<Vec2>> a(n, std::vector<Vec2>(nc));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c) {
      Vec2 s;
      for (int j = 0; j < n; ++j) s += eps[i][j] * saturate(grads[j][c]);
      a[i][c] = s;
    }
  return a;
}

struct HooliganInteraction {
  InteractionMatrix eps;
  double rho_bar = 0.5;
  /// Use rho^1 in the first denominator of A^2 as printed.
  bool literal_a2_denominator = false;
};

/// eta * 1 restricted to the mesh, needed for eta * (rho - rho_bar).
inline std::vector<double> mesh_indicator_mollified(const CentroidConvolver& conv) {
  std::vector<double> ones(conv.mesh().num_cells(), 1.0);
  return conv.apply(ones, true, false).value;
}

/// Two-group aggregation and attack terms. `indicator` is
/// mesh_indicator_mollified(conv).
inline std::vector<std::vector<Vec2>> nonlocal_A_hooligans(const DensityField& rho,
                                                           const HooliganInteraction& p,
                                                           const CentroidConvolver& conv,
                                                           const std::vector<double>& indicator) {
  if (rho.populations() != 2) throw ConfigError("hooligan interaction needs two populations");
  const int nc = rho.cells();
  MollifiedField m1 = conv.apply(rho.rho[0]);
  MollifiedField m2 = conv.apply(rho.rho[1]);
  const auto& e = p.eps;
  std::vector<std::vector<Vec2>> a(2, std::vector<Vec2>(nc));
  for (int c = 0; c < nc; ++c) {
    double s11 = m1.value[c] - p.rho_bar * indicator[c];
    double s22 = m2.value[c] - p.rho_bar * indicator[c];
    double s12 = m2.value[c] - m1.value[c];
    Vec2 g1 = m1.gradient[c], g2 = m2.gradient[c];
    a[0][c] = e[0][0] * saturate(s11 * g1) + e[0][1] * saturate(s12 * g2);
    Vec2 own = s22 * g2;
    double den = p.literal_a2_denominator ? std::sqrt(1.0 + norm2(s11 * g2)) : std::sqrt(1.0 + norm2(own));
    a[1][c] = e[1][1] * (own / den) + e[1][0] * saturate(-s12 * g1);
  }
  return a;
}

/// b_i = (eta_bar * rho^i)(p^i) for one guide per population.
inline std::vector<double> nonlocal_B_tourist(const DensityField& rho, const Kernel& eta_bar,
                                              const Mesh& mesh, std::span<const Vec2> guides) {
  std::vector<double> b(guides.size());
  for (std::size_t i = 0; i < guides.size(); ++i) {
    Vec2 p = guides[i];
    b[i] = convolve(rho.rho[i], eta_bar, mesh, std::span<const Vec2>(&p, 1))[0];
  }
  return b;
}

/// Crowd mass ahead of each car: integral of (rho^1 + rho^2)(x) eta(x - [p, x2bar]).
inline std::vector<double> nonlocal_B_crosswalk(const DensityField& rho, const Kernel& eta_car,
                                                const Mesh& mesh, std::span<const double> cars,
                                                double x2bar) {
  std::vector<double> total(rho.cells(), 0.0);
  for (const auto& r : rho.rho)
    for (int c = 0; c < rho.cells(); ++c) total[c] += r[c];
  std::vector<Vec2> pts;
  for (double p : cars) pts.push_back({p, x2bar});
  return correlate(total, eta_car, mesh, pts);
}

/// Officers are drawn towards where the populations overlap:
/// eps_bar1 / N sum_j sum_{l != j} sat(grad((eta*rho^l)(eta*rho^j)))(p^k).
inline std::vector<Vec2> nonlocal_B_police(const DensityField& rho, const Kernel& eta_bar,
                                           const Mesh& mesh, std::span<const Vec2> officers,
                                           double eps_bar1) {
  const int n = rho.populations();
  const double nn = static_cast<double>(officers.size());
  std::vector<Vec2> out(officers.size());
  for (std::size_t k = 0; k < officers.size(); ++k) {
    std::span<const Vec2> pk(&officers[k], 1);
    std::vector<double> m(n);
    std::vector<Vec2> gm(n);
    for (int j = 0; j < n; ++j) {
      m[j] = convolve(rho.rho[j], eta_bar, mesh, pk)[0];
      gm[j] = convolve_grad(rho.rho[j], eta_bar, mesh, pk)[0];
    }
    Vec2 s;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        if (l != j) s += saturate(m[l] * gm[j] + m[j] * gm[l]);
    out[k] = (eps_bar1 / nn) * s;
  }
  return out;
}

}  // namespace crowdflow
