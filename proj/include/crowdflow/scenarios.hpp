#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crowdflow/agents.hpp"
#include "crowdflow/config.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/fv.hpp"
#include "crowdflow/geodesic.hpp"
#include "crowdflow/kernels.hpp"
#include "crowdflow/mesh.hpp"
#include "crowdflow/nonlocal.hpp"

namespace crowdflow {

// ---------------------------------------------------------------------------
// Pointwise velocity laws

/// Attraction towards the guide: eps xi / sqrt(1 + |xi|^4).
inline Vec2 tourist_preference(double eps, Vec2 xi) {
  const double s2 = norm2(xi);
  return (eps / std::sqrt(1.0 + s2 * s2)) * xi;
}

inline Vec2 velocity_tourists(Vec2 x, Vec2 a, Vec2 guide, double eps) {
  return tourist_preference(eps, guide - x) - a;
}

struct CrosswalkGeometry {
  double x2bar = 0.5;
  double half_width = 0.05;
  double eps_gamma = 0.001;
  double r_i = 0.1;
  double r_a = 0.8;
  double r_v = 0.15;
  double r_vb = 0.0015;
};

/// Sensitivity of a pedestrian at x walking along V to a car at `car`:
/// far reach r_v ahead, almost none behind.
inline double crosswalk_eta_hat(Vec2 x, Vec2 car, Vec2 dir, const CrosswalkGeometry& g) {
  const Vec2 d = car - x;
  const double along = dot(d, dir);
  const double across = dot(d, perp(dir));
  return eval_eta3(along, along > 0.0 ? g.r_v : g.r_vb) * eval_eta3(across, g.r_v);
}

/// w = 1 - (1 - beta(|x2 - x2bar|)) (1 - prod_l beta(eta_hat)). Equals 1 on
/// the road; off the road pedestrians stop for cars in front of them.
inline double crosswalk_weight(Vec2 x, Vec2 dir, std::span<const double> cars, const CrosswalkGeometry& g) {
  const CutoffBeta road(g.half_width, g.half_width + g.eps_gamma);
  const CutoffBeta sens(g.r_i, g.r_a);
  const double off_road = 1.0 - road(std::abs(x.y - g.x2bar));
  if (off_road == 0.0) return 1.0;
  double prod = 1.0;
  for (double p : cars) prod *= sens(crosswalk_eta_hat(x, {p, g.x2bar}, dir, g));
  return 1.0 - off_road * (1.0 - prod);
}

inline Vec2 velocity_crosswalk(double w, Vec2 dir, Vec2 a) { return w * (dir - a); }

/// (eps / N) sum_j eta_hat(x - p^j) dir.
inline Vec2 hooligan_push(Vec2 x, std::span<const Vec2> officers, const Kernel& eta_hat, double eps, Vec2 dir) {
  if (officers.empty()) return {};
  double s = 0.0;
  for (Vec2 p : officers) s += eta_hat(x - p);
  return (eps / static_cast<double>(officers.size()) * s) * dir;
}

/// v = -sign * w + A; sign = 1 is the printed model.
inline Vec2 velocity_hooligans(Vec2 w, Vec2 a, double sign = 1.0) { return -sign * w + a; }

// ---------------------------------------------------------------------------
// Configuration

namespace detail {

inline void declare_common(ScenarioConfig& c, std::vector<double> domain, int n, double t_final) {
  c.declare("domain", std::move(domain));
  c.declare("mesh.nx", n);
  c.declare("mesh.ny", n);
  c.declare("boundary.left", "wall");
  c.declare("boundary.right", "wall");
  c.declare("boundary.bottom", "wall");
  c.declare("boundary.top", "wall");
  c.declare("capacity", 1.0);
  c.declare("cfl", 0.9);
  c.declare("dt_max", 1e-2);
  c.declare("lambda_min", 1e-12);
  c.declare("ode.lipschitz", 50.0);
  c.declare("t_final", t_final);
  c.declare("frames", 0.5);
  c.declare("splitting", "pde_first");
  c.declare("deterministic", true);
  c.declare("flux.scale", 1.0);
  c.declare("flux.perturbation", 0.0);
}

inline void declare_kernel(ScenarioConfig& c, const std::string& slot, const char* family, double radius,
                           double radius_back = 0.0, double sharpness = 5.0) {
  c.declare("kernel." + slot + ".family", family);
  c.declare("kernel." + slot + ".radius", radius);
  c.declare("kernel." + slot + ".radius_back", radius_back);
  c.declare("kernel." + slot + ".sharpness", sharpness);
}

inline void declare_eps(ScenarioConfig& c, double e11, double e12, double e21, double e22) {
  c.declare("eps.11", e11);
  c.declare("eps.12", e12);
  c.declare("eps.21", e21);
  c.declare("eps.22", e22);
}

}  // namespace detail

inline const std::vector<std::string>& scenario_tags() {
  static const std::vector<std::string> tags = {"tourists", "crosswalk", "hooligans"};
  return tags;
}

/// Published parameter blocks as shipped defaults.
inline ScenarioConfig default_config(const std::string& tag) {
  ScenarioConfig c;
  c.tag = tag;
  if (tag == "tourists") {
    detail::declare_common(c, {0.0, 4.0, 0.0, 4.0}, 160, 40.0);
    detail::declare_eps(c, 0.2, 0.8, 0.8, 0.2);
    c.declare("eps.1", 0.4);
    c.declare("eps.2", 0.4);
    c.declare("guides.c1", std::vector<double>{2.0, 2.0});
    c.declare("guides.c2", std::vector<double>{2.0, 3.0});
    c.declare("guides.r1", 1.0);
    c.declare("guides.r2", 1.0);
    c.declare("guides.d1", 1.0);
    c.declare("guides.d2", -1.0);
    detail::declare_kernel(c, "eta", "gauss_bump", 0.5);
    detail::declare_kernel(c, "eta_bar", "poly_bump", 0.4);
    c.declare_boxes("rho1.boxes", {{0.5, 1.5, 0.5, 1.5, 0.75}});
    c.declare_boxes("rho2.boxes", {{2.5, 3.5, 0.5, 1.5, 1.0}});
    c.declare("agents.p0", std::vector<double>{2.0, 3.0, 2.0, 2.0});
  } else if (tag == "crosswalk") {
    detail::declare_common(c, {0.0, 1.0, 0.0, 1.0}, 80, 1.2);
    c.declare("frames", 0.05);
    c.declare("flux.scale", 2.0);
    detail::declare_eps(c, 0.1, 0.7, 0.7, 0.1);
    c.declare("road.center", 0.5);
    c.declare("road.half_width", 0.05);
    c.declare("crosswalk.xmin", 0.4);
    c.declare("crosswalk.xmax", 0.6);
    c.declare("w.eps_gamma", 0.001);
    c.declare("w.r_i", 0.1);
    c.declare("w.r_a", 0.8);
    c.declare("w.r_v", 0.15);
    c.declare("w.r_vb", 0.0015);
    c.declare("cars.leader_speed", 1.0);
    c.declare("cars.r_j", 0.125);
    c.declare("cars.r_b", 0.5);
    c.declare("cars.H", 0.167);
    c.declare("cars.K", 50.0);
    c.declare("targets.1", "bottom");
    c.declare("targets.2", "top");
    c.declare("eikonal.nodes", 256);
    detail::declare_kernel(c, "eta", "gauss_bump", 0.05);
    detail::declare_kernel(c, "car", "asymmetric_car", 0.045, 0.0045);
    c.declare_boxes("rho1.boxes", {{0.1, 0.9, 0.7, 0.9, 1.0}});
    c.declare_boxes("rho2.boxes", {{0.1, 0.9, 0.1, 0.3, 0.5}});
    c.declare("agents.p0", std::vector<double>{0.0, 0.333, 0.667});
  } else if (tag == "hooligans") {
    detail::declare_common(c, {0.0, 1.0, 0.0, 1.0}, 80, 12.0);
    c.declare("frames", 0.1);
    detail::declare_eps(c, 0.5, 0.5, 0.5, 0.5);
    c.declare("eps_bar.1", 0.4);
    c.declare("eps_bar.2", 0.2);
    c.declare("rho_bar", 0.5);
    c.declare("eps.3", 0.1);
    c.declare("eps.4", 0.1);
    c.declare("police.sign", 1.0);
    c.declare("police.clamp_to_domain", false);
    c.declare("compat.literal_a2_denominator", false);
    detail::declare_kernel(c, "eta", "gauss_bump", 0.1);
    detail::declare_kernel(c, "eta_hat", "gauss_bump", 0.15);
    detail::declare_kernel(c, "eta_bar", "poly_bump", 0.1);
    detail::declare_kernel(c, "eta_tilde", "poly_bump", 0.2);
    c.declare_boxes("rho1.boxes", {{0.25, 0.75, 0.2, 0.5, 0.9}});
    c.declare_boxes("rho2.boxes", {{0.25, 0.75, 0.5, 0.8, 0.7}});
    c.declare("agents.p0", std::vector<double>{0.1, 0.7, 0.9, 0.3, 0.1, 0.4, 0.9, 0.7});
  } else {
    throw ConfigError("unknown scenario '" + tag + "' (expected tourists, crosswalk or hooligans)");
  }
  c.overridden.clear();
  return c;
}

inline Kernel kernel_from_config(const ScenarioConfig& c, const std::string& slot) {
  const std::string k = "kernel." + slot + ".";
  return Kernel::make(kernel_family_from_string(c.text(k + "family")), c.number(k + "radius"),
                      c.number(k + "radius_back"), c.number(k + "sharpness"));
}

inline std::vector<BoxValue> boxes_from_config(const ScenarioConfig& c, const std::string& key) {
  std::vector<BoxValue> out;
  for (const auto& b : c.boxes(key)) {
    if (b.size() != 5) throw ConfigError("'" + key + "' entries need 5 numbers [xmin, xmax, ymin, ymax, value]");
    if (!(b[0] < b[1]) || !(b[2] < b[3])) throw ConfigError("'" + key + "' has an empty box");
    out.push_back({{b[0], b[1], b[2], b[3]}, b[4]});
  }
  return out;
}

/// Invariant checks independent of mesh construction.
inline void validate(const ScenarioConfig& c) {
  auto positive = [&](const std::string& k) {
    if (!(c.number(k) > 0.0) || !std::isfinite(c.number(k)))
      throw InvariantViolation("invariant violation: '" + k + "' must be positive");
  };
  auto nonneg = [&](const std::string& k) {
    if (!(c.number(k) >= 0.0) || !std::isfinite(c.number(k)))
      throw InvariantViolation("invariant violation: '" + k + "' must be non-negative");
  };
  const double cfl = c.number("cfl");
  if (!(cfl > 0.0 && cfl <= 1.0)) throw InvariantViolation("invariant violation: 'cfl' must lie in (0, 1]");
  positive("dt_max");
  positive("lambda_min");
  positive("ode.lipschitz");
  positive("frames");
  positive("capacity");
  positive("flux.scale");
  nonneg("t_final");
  if (c.integer("mesh.nx") < 1 || c.integer("mesh.ny") < 1)
    throw InvariantViolation("invariant violation: mesh resolution must be at least 1");
  if (c.list("domain").size() != 4) throw InvariantViolation("invariant violation: 'domain' needs [xmin, xmax, ymin, ymax]");
  const auto& s = c.text("splitting");
  if (s != "pde_first" && s != "ode_first")
    throw InvariantViolation("invariant violation: 'splitting' must be pde_first or ode_first");
  for (const char* side : {"boundary.left", "boundary.right", "boundary.bottom", "boundary.top"})
    boundary_kind_from_string(c.text(side));
  if (std::abs(c.number("flux.perturbation")) > 2.0 * c.number("flux.scale"))
    throw InvariantViolation("invariant violation: 'flux.perturbation' too large, q would leave its sign");
  for (const auto& [key, p] : c.params()) {
    if (key.rfind("eps", 0) == 0) nonneg(key);
    if (key.rfind("kernel.", 0) == 0 && key.size() > 7) {
      const auto dot = key.rfind('.');
      const std::string slot = key.substr(7, dot - 7);
      if (key.substr(dot + 1) == "family") kernel_from_config(c, slot);
    }
  }
  const double cap = c.number("capacity");
  for (const char* key : {"rho1.boxes", "rho2.boxes"})
    for (const auto& b : boxes_from_config(c, key))
      if (b.value < 0.0 || b.value > cap)
        throw InvariantViolation(std::string("invariant violation: '") + key + "' value outside [0, capacity]");
  const auto& p0 = c.list("agents.p0");
  if (c.tag == "tourists" && p0.size() != 4)
    throw InvariantViolation("invariant violation: tourists need two guide positions in 'agents.p0'");
  if (c.tag == "hooligans") {
    if (p0.size() % 2 != 0 || p0.empty())
      throw InvariantViolation("invariant violation: officers need (x, y) pairs in 'agents.p0'");
    const double sg = c.number("police.sign");
    if (sg != 1.0 && sg != -1.0) throw InvariantViolation("invariant violation: 'police.sign' must be 1 or -1");
    nonneg("rho_bar");
  }
  if (c.tag == "crosswalk") {
    for (std::size_t k = 1; k < p0.size(); ++k)
      if (p0[k] < p0[k - 1]) throw InvariantViolation("invariant violation: car abscissae must be increasing");
    positive("road.half_width");
    positive("w.eps_gamma");
    positive("w.r_v");
    positive("w.r_vb");
    if (!(c.number("w.r_i") < c.number("w.r_a"))) throw InvariantViolation("invariant violation: need w.r_i < w.r_a");
    if (!(c.number("cars.r_j") < c.number("cars.r_b")))
      throw InvariantViolation("invariant violation: need cars.r_j < cars.r_b");
    positive("cars.H");
    positive("cars.K");
    if (c.integer("eikonal.nodes") < 2) throw InvariantViolation("invariant violation: 'eikonal.nodes' must be >= 2");
    target_side_from_string(c.text("targets.1"));
    target_side_from_string(c.text("targets.2"));
  }
}

// ---------------------------------------------------------------------------
// Assembled models

using CrowdInteraction = std::vector<std::vector<Vec2>>;

/// A scenario with its mesh and nonlocal operators built once.
class Model {
 public:
  explicit Model(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    const auto& d = cfg_.list("domain");
    domain_ = {d[0], d[1], d[2], d[3]};
    cfl_.cfl = cfg_.number("cfl");
    cfl_.dt_max = cfg_.number("dt_max");
    cfl_.lambda_min = cfg_.number("lambda_min");
    ode_cap_ = 0.5 / cfg_.number("ode.lipschitz");
    pde_first_ = cfg_.text("splitting") == "pde_first";
    FluxFunction q;
    q.scale = cfg_.number("flux.scale");
    q.capacity = cfg_.number("capacity");
    q.perturbation = cfg_.number("flux.perturbation");
    fluxes_ = {q, q};
  }
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ScenarioConfig& config() const { return cfg_; }
  const Mesh& mesh() const { return mesh_; }
  std::span<const FluxFunction> fluxes() const { return fluxes_; }
  const CflOptions& cfl_options() const { return cfl_; }
  double ode_dt_cap() const { return ode_cap_; }
  bool pde_first() const { return pde_first_; }
  double capacity() const { return cfg_.number("capacity"); }

  DensityField initial_density() const {
    DensityField d(2, mesh_.num_cells(), capacity());
    d.rho[0] = rasterize_boxes(mesh_, boxes_from_config(cfg_, "rho1.boxes"));
    d.rho[1] = rasterize_boxes(mesh_, boxes_from_config(cfg_, "rho2.boxes"));
    for (const auto& r : d.rho)
      for (double v : r)
        if (v < 0.0 || v > d.capacity) throw InvariantViolation("invariant violation: overlapping boxes exceed capacity");
    return d;
  }

  AgentState initial_agents() const {
    AgentState a;
    a.schema = schema();
    a.p = cfg_.list("agents.p0");
    return a;
  }

  virtual AgentSchema schema() const = 0;
  /// A^i at centroids; the only place the crowd convolutions run.
  virtual CrowdInteraction interaction(const DensityField& rho) const = 0;
  virtual VelocityField velocity(double t, const CrowdInteraction& a, const AgentState& agents) const = 0;
  virtual std::vector<double> agent_rhs(double t, const DensityField& rho, const AgentState& agents) const = 0;
  /// Positions for output, one point per agent.
  virtual std::vector<Vec2> agent_points(const AgentState& agents) const { return agents.points(); }
  virtual void constrain(AgentState&) const {}

 protected:
  void build_mesh(const std::vector<Obstacle>& obstacles = {}) {
    BoundarySpec bc{boundary_kind_from_string(cfg_.text("boundary.left")),
                    boundary_kind_from_string(cfg_.text("boundary.right")),
                    boundary_kind_from_string(cfg_.text("boundary.bottom")),
                    boundary_kind_from_string(cfg_.text("boundary.top"))};
    mesh_ = build_structured_tri_mesh(cfg_.integer("mesh.nx"), cfg_.integer("mesh.ny"), domain_, obstacles, bc);
  }

  InteractionMatrix eps_matrix() const {
    return {{cfg_.number("eps.11"), cfg_.number("eps.12")}, {cfg_.number("eps.21"), cfg_.number("eps.22")}};
  }

  ScenarioConfig cfg_;
  Box domain_;
  Mesh mesh_;
  std::vector<FluxFunction> fluxes_;
  CflOptions cfl_;
  double ode_cap_ = 1e-2;
  bool pde_first_ = true;
};

class TouristsModel : public Model {
 public:
  explicit TouristsModel(ScenarioConfig cfg) : Model(std::move(cfg)) {
    build_mesh();
    conv_ = std::make_unique<CentroidConvolver>(mesh_, kernel_from_config(cfg_, "eta"));
    eta_bar_ = std::make_unique<Kernel>(kernel_from_config(cfg_, "eta_bar"));
    eps_ = eps_matrix();
    pref_ = {cfg_.number("eps.1"), cfg_.number("eps.2")};
    const auto& c1 = cfg_.list("guides.c1");
    const auto& c2 = cfg_.list("guides.c2");
    guides_ = {{c1.at(0), c1.at(1)}, {c2.at(0), c2.at(1)}, cfg_.number("guides.d1"), cfg_.number("guides.d2")};
  }

  AgentSchema schema() const override { return AgentSchema::guides; }
  const GuideParams& guides() const { return guides_; }

  CrowdInteraction interaction(const DensityField& rho) const override {
    return nonlocal_A_tourist(rho, eps_, *conv_);
  }

  VelocityField velocity(double t, const CrowdInteraction& a, const AgentState& agents) const override {
    VelocityField v;
    v.t = t;
    const auto p = agents.points();
    v.v.assign(2, std::vector<Vec2>(mesh_.num_cells()));
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < mesh_.num_cells(); ++c)
        v.v[i][c] = velocity_tourists(mesh_.cell_centroid[c], a[i][c], p[i], pref_[i]);
    return v;
  }

  std::vector<double> agent_rhs(double t, const DensityField& rho, const AgentState& agents) const override {
    const auto p = agents.points();
    auto b = nonlocal_B_tourist(rho, *eta_bar_, mesh_, p);
    return rhs_guides(t, agents.p, b, guides_);
  }

 private:
  std::unique_ptr<CentroidConvolver> conv_;
  std::unique_ptr<Kernel> eta_bar_;
  InteractionMatrix eps_;
  std::array<double, 2> pref_{};
  GuideParams guides_;
};

class CrosswalkModel : public Model {
 public:
  explicit CrosswalkModel(ScenarioConfig cfg) : Model(std::move(cfg)) {
    geo_.x2bar = cfg_.number("road.center");
    geo_.half_width = cfg_.number("road.half_width");
    geo_.eps_gamma = cfg_.number("w.eps_gamma");
    geo_.r_i = cfg_.number("w.r_i");
    geo_.r_a = cfg_.number("w.r_a");
    geo_.r_v = cfg_.number("w.r_v");
    geo_.r_vb = cfg_.number("w.r_vb");
    const double y0 = geo_.x2bar - geo_.half_width, y1 = geo_.x2bar + geo_.half_width;
    const double cx0 = cfg_.number("crosswalk.xmin"), cx1 = cfg_.number("crosswalk.xmax");
    std::vector<Obstacle> obs;
    if (cx0 > domain_.xmin) obs.push_back({"road west of crosswalk", {domain_.xmin, cx0, y0, y1}});
    if (cx1 < domain_.xmax) obs.push_back({"road east of crosswalk", {cx1, domain_.xmax, y0, y1}});
    build_mesh(obs);
    std::vector<Box> blocked;
    for (const auto& s : mesh_.snaps) blocked.push_back(s.snapped);
    const int nodes = cfg_.integer("eikonal.nodes");
    for (int i = 0; i < 2; ++i) {
      auto side = target_side_from_string(cfg_.text(i == 0 ? "targets.1" : "targets.2"));
      distance_[i] = solve_eikonal(make_eikonal_grid(domain_, nodes, nodes, blocked, side));
      dir_[i] = direction_field(distance_[i], mesh_);
    }
    conv_ = std::make_unique<CentroidConvolver>(mesh_, kernel_from_config(cfg_, "eta"));
    car_kernel_ = std::make_unique<Kernel>(kernel_from_config(cfg_, "car"));
    eps_ = eps_matrix();
    const double vl = cfg_.number("cars.leader_speed");
    cars_.leader_speed = [vl](double) { return vl; };
    cars_.g = CutoffBeta(cfg_.number("cars.r_j"), cfg_.number("cars.r_b"));
    const double h = cfg_.number("cars.H");
    cars_.headway = CutoffBeta(h, 10.0 * h);
    cars_.exponent = cfg_.number("cars.K");
  }

  AgentSchema schema() const override { return AgentSchema::cars; }
  const CrosswalkGeometry& geometry() const { return geo_; }
  const DirectionField& directions(int i) const { return dir_[i]; }
  const DistanceField& distance(int i) const { return distance_[i]; }
  const CarParams& cars() const { return cars_; }

  CrowdInteraction interaction(const DensityField& rho) const override {
    return nonlocal_A_tourist(rho, eps_, *conv_);
  }

  VelocityField velocity(double t, const CrowdInteraction& a, const AgentState& agents) const override {
    VelocityField v;
    v.t = t;
    const int nc = mesh_.num_cells();
    v.v.assign(2, std::vector<Vec2>(nc));
    for (int i = 0; i < 2; ++i)
      parallel_for(static_cast<std::size_t>(nc), [&](std::size_t b, std::size_t e) {
        for (std::size_t c = b; c < e; ++c) {
          const Vec2 dir = dir_[i].dir[c];
          const double w = crosswalk_weight(mesh_.cell_centroid[c], dir, agents.p, geo_);
          v.v[i][c] = velocity_crosswalk(w, dir, a[i][c]);
        }
      });
    return v;
  }

  std::vector<double> agent_rhs(double t, const DensityField& rho, const AgentState& agents) const override {
    auto b = nonlocal_B_crosswalk(rho, *car_kernel_, mesh_, agents.p, geo_.x2bar);
    return rhs_cars(t, agents.p, b, cars_);
  }

  std::vector<double> crowd_ahead(const DensityField& rho, const AgentState& agents) const {
    return nonlocal_B_crosswalk(rho, *car_kernel_, mesh_, agents.p, geo_.x2bar);
  }

  std::vector<Vec2> agent_points(const AgentState& agents) const override {
    std::vector<Vec2> out;
    for (double p : agents.p) out.push_back({p, geo_.x2bar});
    return out;
  }

  /// Pedestrian mass on the road strip |x2 - x2bar| <= half width.
  double road_mass(const DensityField& rho) const {
    double m = 0.0;
    for (int c = 0; c < mesh_.num_cells(); ++c)
      if (std::abs(mesh_.cell_centroid[c].y - geo_.x2bar) <= geo_.half_width)
        m += mesh_.cell_area[c] * (rho.rho[0][c] + rho.rho[1][c]);
    return m;
  }

 private:
  CrosswalkGeometry geo_;
  DistanceField distance_[2];
  DirectionField dir_[2];
  std::unique_ptr<CentroidConvolver> conv_;
  std::unique_ptr<Kernel> car_kernel_;
  InteractionMatrix eps_;
  CarParams cars_;
};

class HooligansModel : public Model {
 public:
  explicit HooligansModel(ScenarioConfig cfg) : Model(std::move(cfg)) {
    build_mesh();
    conv_ = std::make_unique<CentroidConvolver>(mesh_, kernel_from_config(cfg_, "eta"));
    indicator_ = mesh_indicator_mollified(*conv_);
    eta_hat_ = std::make_unique<Kernel>(kernel_from_config(cfg_, "eta_hat"));
    eta_bar_ = std::make_unique<Kernel>(kernel_from_config(cfg_, "eta_bar"));
    officers_.eta_tilde = kernel_from_config(cfg_, "eta_tilde");
    officers_.eps_bar2 = cfg_.number("eps_bar.2");
    inter_.eps = eps_matrix();
    inter_.rho_bar = cfg_.number("rho_bar");
    inter_.literal_a2_denominator = cfg_.flag("compat.literal_a2_denominator");
    sign_ = cfg_.number("police.sign");
    push_ = {cfg_.number("eps.3"), cfg_.number("eps.4")};
  }

  AgentSchema schema() const override { return AgentSchema::officers; }
  const Kernel& eta_bar() const { return *eta_bar_; }

  CrowdInteraction interaction(const DensityField& rho) const override {
    return nonlocal_A_hooligans(rho, inter_, *conv_, indicator_);
  }

  VelocityField velocity(double t, const CrowdInteraction& a, const AgentState& agents) const override {
    VelocityField v;
    v.t = t;
    const int nc = mesh_.num_cells();
    const auto p = agents.points();
    const Vec2 dirs[2] = {{0.0, -1.0}, {0.0, 1.0}};
    v.v.assign(2, std::vector<Vec2>(nc));
    for (int i = 0; i < 2; ++i)
      for (int c = 0; c < nc; ++c) {
        const Vec2 w = hooligan_push(mesh_.cell_centroid[c], p, *eta_hat_, push_[i], dirs[i]);
        v.v[i][c] = velocity_hooligans(w, a[i][c], sign_);
      }
    return v;
  }

  std::vector<double> agent_rhs(double t, const DensityField& rho, const AgentState& agents) const override {
    const auto p = agents.points();
    auto b = nonlocal_B_police(rho, *eta_bar_, mesh_, p, cfg_.number("eps_bar.1"));
    return rhs_officers(t, agents.p, b, officers_);
  }

  void constrain(AgentState& a) const override {
    if (!cfg_.flag("police.clamp_to_domain")) return;
    for (std::size_t k = 0; k + 1 < a.p.size(); k += 2) {
      a.p[k] = std::clamp(a.p[k], domain_.xmin, domain_.xmax);
      a.p[k + 1] = std::clamp(a.p[k + 1], domain_.ymin, domain_.ymax);
    }
  }

  /// Integral of (eta_bar * rho^1)(eta_bar * rho^2): overlap of the two groups.
  double mixing(const DensityField& rho) const {
    CentroidConvolver c(mesh_, *eta_bar_);
    auto m1 = c.apply(rho.rho[0], true, false).value;
    auto m2 = c.apply(rho.rho[1], true, false).value;
    double s = 0.0;
    for (int k = 0; k < mesh_.num_cells(); ++k) s += mesh_.cell_area[k] * m1[k] * m2[k];
    return s;
  }

 private:
  std::unique_ptr<CentroidConvolver> conv_;
  std::vector<double> indicator_;
  std::unique_ptr<Kernel> eta_hat_;
  std::unique_ptr<Kernel> eta_bar_;
  OfficerParams officers_;
  HooliganInteraction inter_;
  double sign_ = 1.0;
  std::array<double, 2> push_{};
};

inline std::unique_ptr<Model> build_model(const ScenarioConfig& cfg) {
  if (cfg.tag == "tourists") return std::make_unique<TouristsModel>(cfg);
  if (cfg.tag == "crosswalk") return std::make_unique<CrosswalkModel>(cfg);
  if (cfg.tag == "hooligans") return std::make_unique<HooligansModel>(cfg);
  throw ConfigError("unknown scenario '" + cfg.tag + "'");
}

/// Integral of min(rho^1, rho^2).
inline double overlap(const Mesh& mesh, const DensityField& rho) {
  double s = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) s += mesh.cell_area[c] * std::min(rho.rho[0][c], rho.rho[1][c]);
  return s;
}

}  // namespace crowdflow
