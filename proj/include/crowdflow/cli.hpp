#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowdflow/coupling.hpp"
#include "crowdflow/io.hpp"
#include "crowdflow/scenarios.hpp"
#include "crowdflow/verify.hpp"

namespace crowdflow {

namespace exit_code {
constexpr int ok = 0;
constexpr int config = 1;
constexpr int runtime = 2;
}  // namespace exit_code

namespace detail {

struct RunArgs {
  std::string scenario;
  std::string config_file;
  std::vector<std::string> sets;
  double tfinal = -1.0;
  std::string out;
  double frames = -1.0;
  std::string format = "csv";
  bool deterministic = false;
  std::string resume;
  bool save_state = false;
};

struct VerifyArgs {
  std::string suite;
  std::vector<std::string> scenarios;
  std::vector<std::string> sets;
  std::int64_t steps = 200;
  double tfinal = 1.0;
  std::string out;
};

struct MeshArgs {
  std::string scenario;
  std::vector<std::string> sets;
  std::string out;
};

inline ScenarioConfig load_config(const std::string& tag, const std::string& file, const std::vector<std::string>& sets) {
  ScenarioConfig cfg = file.empty() ? default_config(tag) : parse_config(read_text_file(file), tag);
  for (const auto& s : sets) apply_override(cfg, s);
  validate(cfg);
  return cfg;
}

inline int do_run(const RunArgs& a, int threads, std::ostream& out) {
  ScenarioConfig cfg = load_config(a.scenario, a.config_file, a.sets);
  const double t_final = a.tfinal >= 0.0 ? a.tfinal : cfg.number("t_final");
  const double cadence = a.frames > 0.0 ? a.frames : cfg.number("frames");
  const FrameFormat fmt = frame_format_from_string(a.format);
  if (!(cadence > 0.0)) throw InvariantViolation("invariant violation: frame cadence must be positive");
  const std::filesystem::path dir(a.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  auto model = build_model(cfg);
  SimState s = a.resume.empty() ? initial_state(*model) : load_state(a.resume);
  if (s.density.cells() != model->mesh().num_cells())
    throw IoError("state in '" + a.resume + "' does not match the scenario mesh");

  nlohmann::json extra;
  extra["run"] = {{"t_final", t_final},         {"frame_cadence", cadence}, {"format", a.format},
                  {"deterministic", a.deterministic}, {"threads", threads},  {"cells", model->mesh().num_cells()},
                  {"resumed_from", a.resume}};
  write_text_file(dir / "manifest.json", manifest(cfg, extra).dump(2) + "\n");

  std::vector<FrameSink> sinks{frame_writer(dir, fmt), [&out](const Frame& f) {
                                 out << "frame " << f.index << " t=" << f.time << " step=" << f.step << '\n';
                               }};
  RunResult res;
  try {
    res = run(*model, std::move(s), t_final, cadence, sinks);
  } catch (...) {
    out << "run aborted; last good state written as the final frame\n";
    throw;
  }
  write_text_file(dir / "diagnostics.csv", diagnostics_csv(res.final_state.diagnostics));
  if (a.save_state) save_state(res.final_state, dir / "state.json");
  out << "done: " << res.frames << " frames, " << res.final_state.step << " steps, t=" << res.final_state.t << '\n';
  return exit_code::ok;
}

inline int do_verify(const VerifyArgs& a, std::ostream& out) {
  SuiteOptions opt;
  opt.scenarios = a.scenarios;
  opt.overrides = a.sets;
  opt.steps = a.steps;
  opt.t_final = a.tfinal;
  const auto reports = run_suite(a.suite, opt);
  nlohmann::json j = nlohmann::json::array();
  std::string text;
  for (const auto& r : reports) {
    text += r.text() + '\n';
    j.push_back(r.to_json());
  }
  const bool ok = all_pass(reports);
  text += std::string(ok ? "suite " : "suite ") + a.suite + (ok ? ": pass\n" : ": FAIL\n");
  out << text;
  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    write_text_file(std::filesystem::path(a.out) / "report.txt", text);
    write_text_file(std::filesystem::path(a.out) / "report.json", j.dump(2) + "\n");
  }
  return ok ? exit_code::ok : exit_code::runtime;
}

inline int do_mesh(const MeshArgs& a, std::ostream& out) {
  ScenarioConfig cfg = load_config(a.scenario, "", a.sets);
  auto model = build_model(cfg);
  write_mesh_vtk(model->mesh(), a.out);
  for (const auto& s : model->mesh().snaps)
    out << "snapped '" << s.name << "' by up to " << s.distance << '\n';
  out << model->mesh().num_cells() << " cells written to " << a.out << '\n';
  return exit_code::ok;
}

}  // namespace detail

/// Command line front end. Exit codes: 0 success, 1 config or usage error,
/// 2 runtime or solver error (or a failing verify suite).
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"crowdflow: nonlocal crowd dynamics with moving agents"};
  app.require_subcommand(1);
  int threads = thread_count();
  app.add_option("--threads", threads, "worker threads (default from CROWDFLOW_THREADS)")
      ->check(CLI::PositiveNumber);

  detail::RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and write frames");
  run_cmd->add_option("--scenario", ra.scenario, "tourists, crosswalk or hooligans")->required();
  run_cmd->add_option("--config", ra.config_file, "JSON config file");
  run_cmd->add_option("--set", ra.sets, "override key=value (repeatable)");
  run_cmd->add_option("--tfinal", ra.tfinal, "final time (default: t_final from the config)");
  run_cmd->add_option("--out", ra.out, "output directory")->required();
  run_cmd->add_option("--frames", ra.frames, "frame cadence in time units");
  run_cmd->add_option("--format", ra.format, "csv, vtk or both")->check(CLI::IsMember({"csv", "vtk", "both"}));
  run_cmd->add_flag("--deterministic", ra.deterministic, "fixed-order reductions (always on; recorded)");
  run_cmd->add_option("--resume", ra.resume, "start from a saved state file");
  run_cmd->add_flag("--save-state", ra.save_state, "write the final state to <out>/state.json");
  run_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  detail::VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "run a witness suite");
  verify_cmd->add_option("--suite", va.suite, "conservation, bounds, tv, dependence, stability, support or all")
      ->required();
  verify_cmd->add_option("--scenario", va.scenarios, "restrict to scenarios (repeatable)");
  verify_cmd->add_option("--set", va.sets, "override key=value (repeatable)");
  verify_cmd->add_option("--steps", va.steps, "steps for step-count checks");
  verify_cmd->add_option("--tfinal", va.tfinal, "horizon for paired-run checks");
  verify_cmd->add_option("--out", va.out, "directory for report.txt and report.json");
  verify_cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  detail::MeshArgs ma;
  auto* mesh_cmd = app.add_subcommand("mesh", "write a scenario mesh as VTK");
  mesh_cmd->add_option("--scenario", ma.scenario)->required();
  mesh_cmd->add_option("--set", ma.sets, "override key=value (repeatable)");
  mesh_cmd->add_option("--out", ma.out, "VTK file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return exit_code::config;
  }

  try {
    set_thread_count(threads);
    if (*run_cmd) return detail::do_run(ra, threads, out);
    if (*verify_cmd) return detail::do_verify(va, out);
    if (*mesh_cmd) return detail::do_mesh(ma, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << '\n';
    return exit_code::runtime;
  }
  return exit_code::config;
}

}  // namespace crowdflow
