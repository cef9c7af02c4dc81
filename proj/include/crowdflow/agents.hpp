#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crowdflow/common.hpp"
#include "crowdflow/kernels.hpp"

namespace crowdflow {

enum class AgentSchema { none, guides, cars, officers };

inline const char* to_string(AgentSchema s) {
  switch (s) {
    case AgentSchema::none: return "none";
    case AgentSchema::guides: return "guides";
    case AgentSchema::cars: return "cars";
    case AgentSchema::officers: return "officers";
  }
  return "?";
}

/// Guides and officers store (x1, y1, x2, y2, ...); cars store abscissae in
/// increasing order, the last one being the leader.
struct AgentState {
  AgentSchema schema = AgentSchema::none;
  double t = 0.0;
  std::vector<double> p;

  std::vector<Vec2> points() const {
    std::vector<Vec2> out;
    for (std::size_t k = 0; k + 1 < p.size(); k += 2) out.push_back({p[k], p[k + 1]});
    return out;
  }
};

/// Two guides circling the centres c1, c2 with signs d1, d2, each slowed
/// by the mollified density of its own group.
struct GuideParams {
  Vec2 c1{2.0, 2.0};
  Vec2 c2{2.0, 3.0};
  double d1 = 1.0;
  double d2 = -1.0;
};

inline std::vector<double> rhs_guides(double /*t*/, std::span<const double> p, std::span<const double> b,
                                      const GuideParams& g) {
  if (p.size() != 4 || b.size() != 2) throw StateCorruptionError("guides need 4 coordinates and 2 densities");
  const Vec2 c[2] = {g.c1, g.c2};
  const double d[2] = {g.d1, g.d2};
  std::vector<double> f(4);
  for (int i = 0; i < 2; ++i) {
    const double x1 = p[2 * i] - c[i].x, x2 = p[2 * i + 1] - c[i].y;
    f[2 * i] = d[i] * x2 * b[i];
    f[2 * i + 1] = -d[i] * x1 * b[i];
  }
  return f;
}

/// Follow-the-leader traffic; followers slow down for the crowd ahead, the
/// leader drives at v_L(t).
struct CarParams {
  std::function<double(double)> leader_speed = [](double) { return 1.0; };
  CutoffBeta g{0.125, 0.5};
  CutoffBeta headway{0.167, 1.67};
  double exponent = 50.0;

  /// u(xi) = 1 - beta_{H,10H}(xi)^K.
  double u(double xi) const { return 1.0 - std::pow(headway(xi), exponent); }
};

inline std::vector<double> rhs_cars(double t, std::span<const double> p, std::span<const double> b,
                                    const CarParams& c) {
  const std::size_t n = p.size();
  if (b.size() != n) throw StateCorruptionError("one crowd value per car expected");
  std::vector<double> f(n);
  for (std::size_t k = 0; k < n; ++k)
    f[k] = k + 1 == n ? c.leader_speed(t) : c.g(b[k]) * c.u(p[k + 1] - p[k]);
  return f;
}

/// I_k = (eps_bar2 / N) sum_j sat(grad eta_tilde(p^j - p^k)): officers keep apart.
inline std::vector<Vec2> officer_spreading(std::span<const Vec2> p, const Kernel& eta_tilde,
                                           double eps_bar2) {
  const double nn = static_cast<double>(p.size());
  std::vector<Vec2> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    Vec2 s;
    for (std::size_t j = 0; j < p.size(); ++j) s += saturate(eta_tilde.gradient(p[j] - p[k]));
    out[k] = (eps_bar2 / nn) * s;
  }
  return out;
}

struct OfficerParams {
  Kernel eta_tilde = Kernel::poly_bump(0.2);
  double eps_bar2 = 0.2;
};

inline std::vector<double> rhs_officers(double /*t*/, std::span<const double> p, std::span<const Vec2> b,
                                        const OfficerParams& o) {
  if (p.size() != 2 * b.size()) throw StateCorruptionError("one crowd vector per officer expected");
  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < b.size(); ++k) pts.push_back({p[2 * k], p[2 * k + 1]});
  auto spread = officer_spreading(pts, o.eta_tilde, o.eps_bar2);
  std::vector<double> f(p.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    f[2 * k] = spread[k].x + b[k].x;
    f[2 * k + 1] = spread[k].y + b[k].y;
  }
  return f;
}

/// p + dt * rhs. Cars must stay ordered.
inline AgentState euler_step(const AgentState& s, std::span<const double> rhs, double dt) {
  if (rhs.size() != s.p.size()) throw StateCorruptionError("agent right-hand side has wrong size");
  AgentState out = s;
  out.t = s.t + dt;
  for (std::size_t k = 0; k < s.p.size(); ++k) {
    out.p[k] = s.p[k] + dt * rhs[k];
    if (!std::isfinite(out.p[k])) throw StateCorruptionError("agent coordinate became non-finite");
  }
  if (s.schema == AgentSchema::cars)
    for (std::size_t k = 0; k + 1 < out.p.size(); ++k)
      if (out.p[k + 1] < out.p[k])
        throw StateCorruptionError("car " + std::to_string(k + 1) + " overtook the car ahead");
  return out;
}

}  // namespace crowdflow
