#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "crowdflow/common.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/mesh.hpp"

namespace crowdflow {

/// Scalar flux q(rho) with q(0) = q(R) = 0 for the logistic family. The
/// optional perturbation adds delta * rho (1 - u) (1/2 - u), u = rho / R,
/// which keeps both zeros.
struct FluxFunction {
  enum class Kind { logistic, linear };
  Kind kind = Kind::logistic;
  double scale = 1.0;
  double capacity = 1.0;
  double perturbation = 0.0;

  double operator()(double rho) const {
    if (kind == Kind::linear) return scale * rho;
    const double u = rho / capacity;
    return scale * rho * (1.0 - u) + perturbation * rho * (1.0 - u) * (0.5 - u);
  }

  double derivative(double rho) const {
    if (kind == Kind::linear) return scale;
    const double u = rho / capacity;
    return scale * (1.0 - 2.0 * u) + perturbation * (0.5 - 3.0 * u + 3.0 * u * u);
  }

  /// Bound on |q'| over [0, R].
  double max_slope() const {
    if (kind == Kind::linear) return std::abs(scale);
    return std::abs(scale) + 0.5 * std::abs(perturbation);
  }
};

inline double flux_q(const FluxFunction& q, double rho) {
  if (!std::isfinite(rho) || rho < -1e-12 || rho > q.capacity + 1e-12) {
    std::ostringstream os;
    os << "density " << rho << " outside [0, " << q.capacity << "]";
    throw StateCorruptionError(os.str());
  }
  return q(rho);
}

/// FORCE flux across an edge with normal speed vn: mean of the
/// Lax-Friedrichs and two-step Lax-Wendroff fluxes of f(rho) = q(rho) vn.
inline double force_edge_flux(double rho_l, double rho_r, double vn, double dt, double dx,
                              const FluxFunction& q) {
  if (!std::isfinite(rho_l) || !std::isfinite(rho_r) || !std::isfinite(vn))
    throw StateCorruptionError("non-finite input to edge flux");
  if (!(dt > 0.0) || !(dx > 0.0)) throw StateCorruptionError("edge flux needs dt > 0 and dx > 0");
  const double fl = q(rho_l) * vn;
  const double fr = q(rho_r) * vn;
  const double lf = 0.5 * (fl + fr) - 0.5 * dx / dt * (rho_r - rho_l);
  const double rho_lw = 0.5 * (rho_l + rho_r) - 0.5 * dt / dx * (fr - fl);
  return 0.5 * (lf + q(rho_lw) * vn);
}

struct CflOptions {
  double cfl = 0.9;
  double dt_max = 1e-2;
  double lambda_min = 1e-12;
};

/// Largest characteristic speed max_i max|q_i'| max_c |v_i(c)|.
inline double max_wave_speed(const VelocityField& v, std::span<const FluxFunction> q) {
  double lam = 0.0;
  for (std::size_t i = 0; i < v.v.size(); ++i) {
    double vmax = 0.0;
    for (const auto& w : v.v[i]) vmax = std::max(vmax, norm(w));
    lam = std::max(lam, q[i].max_slope() * vmax);
  }
  return lam;
}

/// dt = cfl * (min inradius) / lambda, capped by dt_max.
inline double cfl_timestep(const VelocityField& v, const Mesh& mesh, std::span<const FluxFunction> q,
                           const CflOptions& opt = {}) {
  const double lam = std::max(max_wave_speed(v, q), opt.lambda_min);
  return std::min(opt.cfl * mesh.min_inradius() / lam, opt.dt_max);
}

struct StepReport {
  /// Mass removed or added by clamping to [0, R], per population.
  std::vector<double> clamped_mass;
  double min_before_clamp = std::numeric_limits<double>::infinity();
  double max_before_clamp = -std::numeric_limits<double>::infinity();
};

/// Length scale of an edge for the numerical viscosity: (A_L + A_R) / (2 l).
inline double edge_length_scale(const Mesh& mesh, const Edge& e) {
  const double al = mesh.cell_area[e.left];
  const double ar = e.right >= 0 ? mesh.cell_area[e.right] : al;
  return (al + ar) / (2.0 * e.length);
}

/// One explicit FORCE step for every population.
inline DensityField fv_step(const DensityField& state, const VelocityField& vel, const Mesh& mesh,
                            std::span<const FluxFunction> q, double dt, StepReport* report = nullptr) {
  const int n = state.populations();
  const int nc = mesh.num_cells();
  const int ne = mesh.num_edges();
  const double cap = state.capacity;
  DensityField next = state;
  StepReport rep;
  rep.clamped_mass.assign(n, 0.0);
  std::vector<double> flux(ne);
  for (int i = 0; i < n; ++i) {
    const auto& rho = state.rho[i];
    const auto& v = vel.v[i];
    parallel_for(static_cast<std::size_t>(ne), [&](std::size_t b, std::size_t e_end) {
      for (std::size_t k = b; k < e_end; ++k) {
        const Edge& e = mesh.edges[k];
        if (e.right >= 0) {
          const double vn = dot(0.5 * (v[e.left] + v[e.right]), e.normal);
          flux[k] = force_edge_flux(rho[e.left], rho[e.right], vn, dt, edge_length_scale(mesh, e), q[i]);
        } else if (e.kind == BoundaryKind::outflow) {
          const double vn = dot(v[e.left], e.normal);
          flux[k] = vn > 0.0 ? q[i](rho[e.left]) * vn : 0.0;
        } else {
          flux[k] = 0.0;
        }
      }
    });
    auto& out = next.rho[i];
    parallel_for(static_cast<std::size_t>(nc), [&](std::size_t b, std::size_t e_end) {
      for (std::size_t c = b; c < e_end; ++c) {
        double s = 0.0;
        for (const auto& ce : mesh.cell_edges[c]) s += ce.sign * mesh.edges[ce.edge].length * flux[ce.edge];
        out[c] = rho[c] - dt / mesh.cell_area[c] * s;
      }
    });
    for (int c = 0; c < nc; ++c) {
      const double r = out[c];
      if (!std::isfinite(r) || r < -1e-10 || r > cap + 1e-10) {
        std::ostringstream os;
        os << "population " << i + 1 << " cell " << c << " left [0, " << cap << "]: " << r
           << " (dt = " << dt << "); reduce the CFL number";
        throw CflViolationError(os.str());
      }
      rep.min_before_clamp = std::min(rep.min_before_clamp, r);
      rep.max_before_clamp = std::max(rep.max_before_clamp, r);
      const double cl = std::clamp(r, 0.0, cap);
      rep.clamped_mass[i] += mesh.cell_area[c] * std::abs(cl - r);
      out[c] = cl;
    }
  }
  if (report) *report = std::move(rep);
  return next;
}

}  // namespace crowdflow
