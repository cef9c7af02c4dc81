#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "crowdflow/agents.hpp"
#include "crowdflow/fields.hpp"
#include "crowdflow/fv.hpp"
#include "crowdflow/scenarios.hpp"

namespace crowdflow {

/// Per-step history; entry k describes step k + 1.
struct Diagnostics {
  int populations = 0;
  /// Population masses after each step, row-major (step, population).
  std::vector<double> mass;
  std::vector<double> clamped_mass;
  std::vector<double> min_density;
  std::vector<double> max_density;
  std::vector<double> dt;
  /// max_i max|q_i'| max|v_i| used for the step's CFL bound.
  std::vector<double> wave_speed;

  std::size_t size() const { return dt.size(); }
  double mass_at(std::size_t step, int pop) const { return mass[step * populations + pop]; }
};

struct SimState {
  double t = 0.0;
  DensityField density;
  AgentState agents;
  std::int64_t step = 0;
  Diagnostics diagnostics;
};

inline SimState initial_state(const Model& model) {
  SimState s;
  s.density = model.initial_density();
  s.agents = model.initial_agents();
  s.diagnostics.populations = s.density.populations();
  return s;
}

namespace detail {

struct StepOutcome {
  DensityField density;
  AgentState agents;
  double dt = 0.0;
  double wave_speed = 0.0;
  double t_end = 0.0;
  StepReport report;
};

inline StepOutcome compute_step(const SimState& s, const Model& model, double t_stop) {
  const Mesh& mesh = model.mesh();
  StepOutcome o;
  const auto a = model.interaction(s.density);
  VelocityField vel = model.velocity(s.t, a, s.agents);
  o.wave_speed = max_wave_speed(vel, model.fluxes());
  o.dt = std::min(cfl_timestep(vel, mesh, model.fluxes(), model.cfl_options()), model.ode_dt_cap());
  o.t_end = s.t + o.dt;
  if (t_stop > s.t && t_stop - s.t <= o.dt) {
    o.dt = t_stop - s.t;
    o.t_end = t_stop;
  }
  if (model.pde_first()) {
    o.density = fv_step(s.density, vel, mesh, model.fluxes(), o.dt, &o.report);
    const auto rhs = model.agent_rhs(s.t, o.density, s.agents);
    o.agents = euler_step(s.agents, rhs, o.dt);
  } else {
    const auto rhs = model.agent_rhs(s.t, s.density, s.agents);
    o.agents = euler_step(s.agents, rhs, o.dt);
    model.constrain(o.agents);
    vel = model.velocity(s.t, a, o.agents);
    o.density = fv_step(s.density, vel, mesh, model.fluxes(), o.dt, &o.report);
  }
  model.constrain(o.agents);
  return o;
}

template <class E>
[[noreturn]] inline void rethrow_with_context(const SimState& s, const E& e) {
  std::ostringstream os;
  os << "step " << s.step + 1 << " from t = " << s.t << ": " << e.what();
  throw E(os.str());
}

inline StepOutcome guarded_step(const SimState& s, const Model& model, double t_stop) {
  try {
    return compute_step(s, model, t_stop);
  } catch (const CflViolationError& e) {
    rethrow_with_context(s, e);
  } catch (const StateCorruptionError& e) {
    rethrow_with_context(s, e);
  }
}

inline SimState finish_step(const SimState& s, StepOutcome&& o, Diagnostics&& diag, const Mesh& mesh) {
  SimState next;
  next.step = s.step + 1;
  next.t = o.t_end;
  next.density = std::move(o.density);
  next.agents = std::move(o.agents);
  next.agents.t = next.t;
  next.diagnostics = std::move(diag);
  auto& d = next.diagnostics;
  d.populations = next.density.populations();
  for (double m : masses(mesh, next.density)) d.mass.push_back(m);
  double clamped = 0.0;
  for (double c : o.report.clamped_mass) clamped += c;
  d.clamped_mass.push_back(clamped);
  d.min_density.push_back(o.report.min_before_clamp);
  d.max_density.push_back(o.report.max_before_clamp);
  d.dt.push_back(o.dt);
  d.wave_speed.push_back(o.wave_speed);
  return next;
}

}  // namespace detail

constexpr double no_stop = std::numeric_limits<double>::infinity();

/// One Lie splitting step sharing a single dt between the PDE and the ODE.
/// Default order: freeze p(t), advance rho, then advance p with B(rho_new).
/// The step is shortened to end exactly on `t_stop` when it would pass it.
inline SimState coupled_step(const SimState& s, const Model& model, double t_stop = no_stop) {
  auto o = detail::guarded_step(s, model, t_stop);
  return detail::finish_step(s, std::move(o), Diagnostics(s.diagnostics), model.mesh());
}

/// As above but reuses the history of `s`; `s` is left intact if the step throws.
inline SimState coupled_step(SimState&& s, const Model& model, double t_stop = no_stop) {
  auto o = detail::guarded_step(s, model, t_stop);
  return detail::finish_step(s, std::move(o), std::move(s.diagnostics), model.mesh());
}

struct Frame {
  int index = 0;
  double time = 0.0;
  std::int64_t step = 0;
  const SimState* state = nullptr;
  const Model* model = nullptr;
};

using FrameSink = std::function<void(const Frame&)>;

struct RunResult {
  SimState final_state;
  int frames = 0;
};

/// Steps to t_final, emitting frame k at t = k * cadence; steps are shortened
/// to land on frame times and on t_final. On a solver error the last good
/// state is flushed as one more frame before the error propagates.
inline RunResult run(const Model& model, SimState state, double t_final, double cadence,
                     const std::vector<FrameSink>& sinks,
                     const std::function<void(const SimState&)>& on_step = {}) {
  if (!(t_final >= 0.0)) throw ConfigError("t_final must be non-negative");
  if (!(cadence > 0.0)) throw ConfigError("frame cadence must be positive");
  const int last_frame = static_cast<int>(std::floor(t_final / cadence * (1.0 + 1e-12)));
  int next_frame = 0;
  RunResult out;
  auto emit = [&](const SimState& s) {
    Frame f{next_frame, s.t, s.step, &s, &model};
    for (const auto& sink : sinks) sink(f);
    ++next_frame;
    ++out.frames;
  };
  auto due = [&](double t) { return next_frame <= last_frame && t >= next_frame * cadence * (1.0 - 1e-12); };
  while (due(state.t)) emit(state);
  while (next_frame <= last_frame || state.t < t_final * (1.0 - 1e-12)) {
    try {
      const double stop = next_frame <= last_frame ? std::min(next_frame * cadence, t_final) : t_final;
      state = coupled_step(std::move(state), model, stop);
    } catch (...) {
      emit(state);
      throw;
    }
    if (on_step) on_step(state);
    // A long step may cover several frame times; they all show this state.
    while (due(state.t)) emit(state);
  }
  out.final_state = std::move(state);
  return out;
}

/// Runs exactly `steps` coupled steps.
inline SimState advance(const Model& model, SimState s, std::int64_t steps,
                        const std::function<void(const SimState&)>& on_step = {}) {
  for (std::int64_t k = 0; k < steps; ++k) {
    s = coupled_step(std::move(s), model);
    if (on_step) on_step(s);
  }
  return s;
}

/// Runs until t = t_final, the last step landing on it exactly.
inline SimState advance_to(const Model& model, SimState s, double t_final,
                           const std::function<void(const SimState&)>& on_step = {}) {
  while (s.t < t_final) {
    s = coupled_step(std::move(s), model, t_final);
    if (on_step) on_step(s);
  }
  return s;
}

}  // namespace crowdflow
