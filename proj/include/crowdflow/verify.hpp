#pragma once

#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "crowdflow/coupling.hpp"
#include "crowdflow/io.hpp"
#include "crowdflow/scenarios.hpp"

namespace crowdflow {

/// Outcome of one witness check: named metrics plus a verdict.
struct CheckReport {
  std::string name;
  bool pass = false;
  bool skipped = false;
  std::vector<std::pair<std::string, double>> metrics;
  std::string note;

  double metric(const std::string& key) const {
    for (const auto& [k, v] : metrics)
      if (k == key) return v;
    throw Error("report '" + name + "' has no metric '" + key + "'");
  }

  std::string text() const {
    std::ostringstream os;
    os << (skipped ? "[SKIP] " : pass ? "[PASS] " : "[FAIL] ") << name;
    for (const auto& [k, v] : metrics) os << ' ' << k << '=' << fmt17(v);
    if (!note.empty()) os << " (" << note << ')';
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["pass"] = pass;
    j["skipped"] = skipped;
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : metrics) m[k] = v;
    j["metrics"] = m;
    j["note"] = note;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Discrete measures

/// sum_i int |a^i - b^i|.
inline double l1_distance(const Mesh& mesh, const DensityField& a, const DensityField& b) {
  double s = 0.0;
  for (int i = 0; i < a.populations(); ++i)
    for (int c = 0; c < mesh.num_cells(); ++c) s += mesh.cell_area[c] * std::abs(a.rho[i][c] - b.rho[i][c]);
  return s;
}

inline double agent_distance(const AgentState& a, const AgentState& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.p.size(); ++k) s += (a.p[k] - b.p[k]) * (a.p[k] - b.p[k]);
  return std::sqrt(s);
}

/// L1 density distance plus Euclidean agent distance.
inline double state_distance(const Mesh& mesh, const SimState& a, const SimState& b) {
  return l1_distance(mesh, a.density, b.density) + agent_distance(a.agents, b.agents);
}

/// Edge-weighted jumps over interior and periodic edges.
inline double total_variation(const Mesh& mesh, std::span<const double> rho) {
  double tv = 0.0;
  for (const auto& e : mesh.edges)
    if (e.right >= 0) tv += std::abs(rho[e.left] - rho[e.right]) * e.length;
  return tv;
}

inline double total_variation(const Mesh& mesh, const DensityField& d) {
  double tv = 0.0;
  for (const auto& r : d.rho) tv += total_variation(mesh, r);
  return tv;
}

// ---------------------------------------------------------------------------
// Checks

/// Largest relative mass drift per population. With an outflow side the
/// check is that mass never increases.
inline CheckReport check_conservation(const Model& model, SimState s, std::int64_t steps) {
  CheckReport r;
  r.name = "conservation/" + model.config().tag;
  const auto m0 = masses(model.mesh(), s.density);
  bool outflow = false;
  for (BoundaryKind k : {model.mesh().boundary.left, model.mesh().boundary.right, model.mesh().boundary.bottom,
                         model.mesh().boundary.top})
    outflow = outflow || k == BoundaryKind::outflow;
  double drift = 0.0, increase = 0.0;
  std::vector<double> prev = m0;
  s = advance(model, std::move(s), steps, [&](const SimState& st) {
    const auto& d = st.diagnostics;
    const std::size_t k = d.size() - 1;
    for (int i = 0; i < d.populations; ++i) {
      const double m = d.mass_at(k, i);
      const double scale = m0[i] > 0.0 ? m0[i] : 1.0;
      drift = std::max(drift, std::abs(m - m0[i]) / scale);
      increase = std::max(increase, (m - prev[i]) / scale);
      prev[i] = m;
    }
  });
  r.metrics = {{"steps", static_cast<double>(steps)}, {"t", s.t}, {"max_relative_drift", drift}};
  if (outflow) {
    r.metrics.emplace_back("max_relative_increase", increase);
    r.pass = increase <= 1e-14;
    r.note = "outflow boundary: mass must be non-increasing";
  } else {
    r.pass = drift < 1e-8;
  }
  return r;
}

/// Pre-clamp extrema over every step and the total clamped mass.
inline CheckReport check_bounds(const Model& model, SimState s, std::int64_t steps) {
  CheckReport r;
  r.name = "bounds/" + model.config().tag;
  double m0 = 0.0;
  for (double m : masses(model.mesh(), s.density)) m0 += m;
  const std::size_t first = s.diagnostics.size();
  s = advance(model, std::move(s), steps);
  const auto& d = s.diagnostics;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, clamped = 0.0;
  for (std::size_t k = first; k < d.size(); ++k) {
    lo = std::min(lo, d.min_density[k]);
    hi = std::max(hi, d.max_density[k]);
    clamped += d.clamped_mass[k];
  }
  const double cap = s.density.capacity;
  const double rel = m0 > 0.0 ? clamped / m0 : clamped;
  r.metrics = {{"steps", static_cast<double>(steps)}, {"min", lo}, {"max", hi}, {"clamped_relative", rel}};
  r.pass = lo >= -1e-10 && hi <= cap + 1e-10 && rel < 1e-8;
  return r;
}

inline CheckReport check_conservation(const ScenarioConfig& cfg, std::int64_t steps) {
  auto m = build_model(cfg);
  return check_conservation(*m, initial_state(*m), steps);
}

inline CheckReport check_bounds(const ScenarioConfig& cfg, std::int64_t steps) {
  auto m = build_model(cfg);
  return check_bounds(*m, initial_state(*m), steps);
}

/// Same scenario with cfl, dt_max and the ODE step cap all halved.
inline ScenarioConfig halved_dt(ScenarioConfig cfg) {
  cfg.set("cfl", cfg.number("cfl") / 2.0);
  cfg.set("dt_max", cfg.number("dt_max") / 2.0);
  cfg.set("ode.lipschitz", cfg.number("ode.lipschitz") * 2.0);
  return cfg;
}

struct TvFit {
  double tv0 = 0.0;
  double kappa = 0.0;
  double c = 0.0;
  double tv_max = 0.0;
};

/// Fits TV(t) <= TV0 e^{kt} + C t e^{kt}: k from the log-slope (clamped at 0),
/// then the smallest C making the envelope hold at every sample.
inline TvFit fit_tv_envelope(const std::vector<double>& t, const std::vector<double>& tv) {
  TvFit f;
  f.tv0 = tv.front();
  for (double v : tv) f.tv_max = std::max(f.tv_max, v);
  if (f.tv0 > 0.0) {
    double stt = 0.0, sty = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (!(tv[k] > 0.0)) continue;
      stt += t[k] * t[k];
      sty += t[k] * std::log(tv[k] / f.tv0);
    }
    f.kappa = stt > 0.0 ? std::max(0.0, sty / stt) : 0.0;
  }
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] > 0.0) f.c = std::max(f.c, (tv[k] * std::exp(-f.kappa * t[k]) - f.tv0) / t[k]);
  return f;
}

inline std::pair<std::vector<double>, std::vector<double>> tv_history(const ScenarioConfig& cfg, double t_final) {
  auto m = build_model(cfg);
  SimState s = initial_state(*m);
  std::vector<double> t{0.0}, tv{total_variation(m->mesh(), s.density)};
  advance_to(*m, std::move(s), t_final, [&](const SimState& st) {
    t.push_back(st.t);
    tv.push_back(total_variation(m->mesh(), st.density));
  });
  return {t, tv};
}

/// Growth-shape witness: the fitted envelope constants agree within 50%
/// between a run and the same run with dt halved.
inline CheckReport check_tv_growth(const ScenarioConfig& cfg, double t_final) {
  CheckReport r;
  r.name = "tv_growth/" + cfg.tag;
  auto fut = std::async(std::launch::async, [&] { return tv_history(halved_dt(cfg), t_final); });
  const auto [t1, tv1] = tv_history(cfg, t_final);
  const auto [t2, tv2] = fut.get();
  const TvFit a = fit_tv_envelope(t1, tv1), b = fit_tv_envelope(t2, tv2);
  auto stable = [](double x, double y, double floor) {
    return std::abs(x - y) <= 0.5 * std::max(std::abs(x), std::abs(y)) + floor;
  };
  const double T = std::max(t_final, 1e-12);
  r.metrics = {{"t", t_final},         {"tv0", a.tv0},     {"tv_max", a.tv_max}, {"kappa", a.kappa},
               {"C", a.c},             {"kappa_half", b.kappa}, {"C_half", b.c}};
  if (a.tv0 == 0.0) {
    r.pass = a.tv_max <= 1e-12 && b.tv_max <= 1e-12;
    r.note = "constant data: TV must stay zero";
    return r;
  }
  r.pass = stable(a.kappa, b.kappa, 1e-3 / T) && stable(a.c, b.c, 1e-3 * a.tv0 / T);
  return r;
}

namespace detail {

/// Samples of a run at t_k = k T / n, each landed on exactly.
inline std::vector<SimState> sampled_run(const Model& model, SimState s, double t_final, int samples) {
  std::vector<SimState> out;
  out.push_back(s);
  for (int k = 1; k <= samples; ++k) {
    s = advance_to(model, std::move(s), t_final * k / samples);
    out.push_back(s);
  }
  return out;
}

/// Adds an L1 mass `delta_rho` to population 1, spread evenly over the cells
/// of its first initial box, and shifts the first agent coordinate by `delta_p`.
inline SimState perturbed_initial(const Model& model, double delta_rho, double delta_p) {
  SimState s = initial_state(model);
  const auto boxes = boxes_from_config(model.config(), "rho1.boxes");
  if (delta_rho != 0.0) {
    if (boxes.empty()) throw ConfigError("density perturbation needs a box in 'rho1.boxes'");
    const Mesh& mesh = model.mesh();
    double area = 0.0;
    std::vector<int> cells;
    for (int c = 0; c < mesh.num_cells(); ++c)
      if (boxes[0].box.contains(mesh.cell_centroid[c])) {
        cells.push_back(c);
        area += mesh.cell_area[c];
      }
    if (cells.empty()) throw ConfigError("first box of 'rho1.boxes' covers no cell");
    for (int c : cells) s.density.rho[0][c] += delta_rho / area;
  }
  if (delta_p != 0.0) {
    if (s.agents.p.empty()) throw ConfigError("agent perturbation needs at least one agent");
    s.agents.p[0] += delta_p;
  }
  return s;
}

}  // namespace detail

/// Paired runs from unperturbed, delta and delta/2 data. Passes when the
/// distance ratio stays below 100 and halving the perturbation halves the
/// final distance within 25%.
inline CheckReport check_continuous_dependence(const ScenarioConfig& cfg, double delta_rho, double delta_p,
                                               double t_final, int samples = 20) {
  CheckReport r;
  r.name = "continuous_dependence/" + cfg.tag;
  if (delta_rho == 0.0 && delta_p == 0.0) {
    r.pass = true;
    r.skipped = true;
    r.note = "zero perturbation: ratio undefined";
    return r;
  }
  auto m = build_model(cfg);
  const Mesh& mesh = m->mesh();
  auto job = [&](double scale) {
    return detail::sampled_run(*m, detail::perturbed_initial(*m, scale * delta_rho, scale * delta_p), t_final,
                               samples);
  };
  auto f_full = std::async(std::launch::async, job, 1.0);
  auto f_half = std::async(std::launch::async, job, 0.5);
  const auto base = job(0.0);
  const auto full = f_full.get();
  const auto half = f_half.get();
  const double d0 = state_distance(mesh, base[0], full[0]);
  double worst = 0.0;
  for (int k = 0; k <= samples; ++k) worst = std::max(worst, state_distance(mesh, base[k], full[k]) / d0);
  const double df = state_distance(mesh, base.back(), full.back());
  const double dh = state_distance(mesh, base.back(), half.back());
  const double ratio = df / dh;
  r.metrics = {{"t", t_final},           {"initial_distance", d0}, {"final_distance", df},
               {"final_distance_half", dh}, {"halving_ratio", ratio}, {"max_growth", worst}};
  r.pass = worst <= 100.0 && ratio >= 1.5 && ratio <= 2.5;
  return r;
}

enum class ModelPart { q, v, F };

inline ModelPart model_part_from_string(const std::string& s) {
  if (s == "q") return ModelPart::q;
  if (s == "v") return ModelPart::v;
  if (s == "F") return ModelPart::F;
  throw ConfigError("unknown model part '" + s + "' (expected q, v or F)");
}

/// Config key whose shift by delta perturbs the named model function.
inline std::string model_part_key(const ScenarioConfig& cfg, ModelPart part) {
  switch (part) {
    case ModelPart::q: return "flux.perturbation";
    case ModelPart::v:
      if (cfg.has("eps.1")) return "eps.1";
      if (cfg.has("eps.3")) return "eps.3";
      return "eps.11";
    case ModelPart::F:
      if (cfg.has("cars.leader_speed")) return "cars.leader_speed";
      if (cfg.has("guides.d1")) return "guides.d1";
      return "eps_bar.1";
  }
  return "";
}

/// Final distance between the base run and runs with one model function
/// shifted by delta and delta/2; the ratio must lie in [1.5, 2.5].
inline CheckReport check_model_stability(const ScenarioConfig& cfg, ModelPart part, double delta, double t_final) {
  const std::string key = model_part_key(cfg, part);
  CheckReport r;
  r.name = "model_stability/" + cfg.tag + "/" + key;
  auto final_state = [&](double shift) {
    ScenarioConfig c = cfg;
    if (shift != 0.0) c.set(key, c.number(key) + shift);
    auto m = build_model(c);
    return advance_to(*m, initial_state(*m), t_final);
  };
  auto f_full = std::async(std::launch::async, final_state, delta);
  auto f_half = std::async(std::launch::async, final_state, delta / 2.0);
  auto m = build_model(cfg);
  const SimState base = advance_to(*m, initial_state(*m), t_final);
  const SimState full = f_full.get();
  const SimState half = f_half.get();
  const double df = state_distance(m->mesh(), base, full);
  const double dh = state_distance(m->mesh(), base, half);
  r.metrics = {{"t", t_final}, {"delta", delta}, {"final_distance", df}, {"final_distance_half", dh}};
  if (delta == 0.0) {
    r.pass = df == 0.0;
    r.skipped = true;
    r.note = "zero perturbation: runs must coincide";
    return r;
  }
  const double ratio = df / dh;
  r.metrics.emplace_back("halving_ratio", ratio);
  r.pass = ratio >= 1.5 && ratio <= 2.5;
  return r;
}

namespace detail {

inline std::vector<std::vector<int>> cell_neighbours(const Mesh& mesh) {
  std::vector<std::vector<int>> nb(mesh.num_cells());
  for (const auto& e : mesh.edges)
    if (e.right >= 0) {
      nb[e.left].push_back(e.right);
      nb[e.right].push_back(e.left);
    }
  return nb;
}

/// Distance from every centroid to the nearest centroid of `support`.
inline std::vector<double> distance_to_support(const Mesh& mesh, const std::vector<std::uint8_t>& support,
                                               const std::vector<std::vector<int>>& nb) {
  std::vector<Vec2> rim;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    if (!support[c]) continue;
    bool edge_of_support = nb[c].size() < 3;
    for (int n : nb[c]) edge_of_support = edge_of_support || !support[n];
    if (edge_of_support) rim.push_back(mesh.cell_centroid[c]);
  }
  std::vector<double> d(mesh.num_cells(), std::numeric_limits<double>::infinity());
  parallel_for(d.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t c = b; c < e; ++c) {
      if (support[c]) {
        d[c] = 0.0;
        continue;
      }
      for (const Vec2& p : rim) d[c] = std::min(d[c], norm2(mesh.cell_centroid[c] - p));
      d[c] = std::sqrt(d[c]);
    }
  });
  return d;
}

}  // namespace detail

/// Finite propagation witness. A first-order scheme spreads an exponentially
/// small tail one ring of cells per step, so two things are checked:
///  - the discrete support (rho != 0) grows by at most one ring of edge
///    neighbours per step, which is exact for an edge-flux scheme;
///  - the mass outside the cone of radius lambda t + 2 diameters + sqrt(n)
///    diameters around the initial support, n the step count, stays below
///    1e-6 of the total. The sqrt(n) term is the diffusion length of the
///    scheme's one-ring-per-step random walk; a transport error grows like n
///    and still breaks the cone.
inline CheckReport check_support(const Model& model, SimState s, std::int64_t steps) {
  CheckReport r;
  r.name = "support/" + model.config().tag;
  const Mesh& mesh = model.mesh();
  const auto nb = detail::cell_neighbours(mesh);
  const int pops = s.density.populations();
  std::vector<std::vector<std::uint8_t>> supp(pops, std::vector<std::uint8_t>(mesh.num_cells(), 0));
  std::vector<std::vector<double>> dist(pops);
  double total = 0.0;
  for (int i = 0; i < pops; ++i) {
    for (int c = 0; c < mesh.num_cells(); ++c) supp[i][c] = s.density.rho[i][c] != 0.0;
    dist[i] = detail::distance_to_support(mesh, supp[i], nb);
    total += population_mass(mesh, s.density.rho[i]);
  }
  const double t0 = s.t;
  const double d = mesh.max_diameter();
  double lambda = 0.0, worst_outside = 0.0;
  std::int64_t ring_violations = 0, empty_violations = 0, n = 0;
  s = advance(model, std::move(s), steps, [&](const SimState& st) {
    ++n;
    lambda = std::max(lambda, st.diagnostics.wave_speed.back());
    const double radius = lambda * (st.t - t0) + (2.0 + std::sqrt(static_cast<double>(n))) * d;
    double outside = 0.0;
    for (int i = 0; i < pops; ++i) {
      const auto& rho = st.density.rho[i];
      std::vector<std::uint8_t> next(mesh.num_cells(), 0);
      for (int c = 0; c < mesh.num_cells(); ++c) {
        if (rho[c] == 0.0) continue;
        next[c] = 1;
        bool reached = supp[i][c];
        for (int k : nb[c]) reached = reached || supp[i][k];
        if (!reached) ++ring_violations;
        if (!std::isfinite(dist[i][c])) ++empty_violations;
        else if (dist[i][c] > radius) outside += mesh.cell_area[c] * rho[c];
      }
      supp[i] = std::move(next);
    }
    worst_outside = std::max(worst_outside, total > 0.0 ? outside / total : outside);
  });
  r.metrics = {{"steps", static_cast<double>(steps)},
               {"max_wave_speed", lambda},
               {"ring_violations", static_cast<double>(ring_violations)},
               {"empty_violations", static_cast<double>(empty_violations)},
               {"max_relative_mass_outside_cone", worst_outside}};
  r.pass = ring_violations == 0 && empty_violations == 0 && worst_outside < 1e-6;
  return r;
}

inline CheckReport check_support(const ScenarioConfig& cfg, std::int64_t steps) {
  auto m = build_model(cfg);
  return check_support(*m, initial_state(*m), steps);
}

// ---------------------------------------------------------------------------
// Suites

struct SuiteOptions {
  /// Scenarios to cover; empty means all three.
  std::vector<std::string> scenarios;
  std::vector<std::string> overrides;
  std::int64_t steps = 200;
  double t_final = 1.0;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"conservation", "bounds",    "tv",     "dependence",
                                                 "stability",    "support",   "all"};
  return names;
}

/// Runs one named suite over the requested scenarios.
inline std::vector<CheckReport> run_suite(const std::string& suite, const SuiteOptions& opt = {}) {
  bool known = false;
  for (const auto& n : suite_names()) known = known || n == suite;
  if (!known) throw ConfigError("unknown suite '" + suite + "'");
  const auto& tags = opt.scenarios.empty() ? scenario_tags() : opt.scenarios;
  auto want = [&](const char* s) { return suite == s || suite == "all"; };
  std::vector<CheckReport> out;
  for (const auto& tag : tags) {
    ScenarioConfig cfg = default_config(tag);
    for (const auto& o : opt.overrides) apply_override(cfg, o);
    validate(cfg);
    if (want("conservation")) out.push_back(check_conservation(cfg, opt.steps));
    if (want("bounds")) out.push_back(check_bounds(cfg, opt.steps));
    if (want("support")) out.push_back(check_support(cfg, opt.steps));
    if (want("tv")) out.push_back(check_tv_growth(cfg, opt.t_final));
    if (want("dependence")) out.push_back(check_continuous_dependence(cfg, 1e-3, 0.0, opt.t_final));
    if (want("stability"))
      for (ModelPart p : {ModelPart::q, ModelPart::v, ModelPart::F})
        out.push_back(check_model_stability(cfg, p, 1e-3, opt.t_final));
  }
  return out;
}

inline bool all_pass(const std::vector<CheckReport>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

}  // namespace crowdflow
