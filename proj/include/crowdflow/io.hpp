#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "crowdflow/config.hpp"
#include "crowdflow/coupling.hpp"
#include "crowdflow/scenarios.hpp"

namespace crowdflow {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config text
//
// A config file is one JSON object. "scenario" names the tag; every other
// member is a parameter, either as a flat dotted key ("mesh.nx": 40) or as a
// nested object ({"mesh": {"nx": 40}}). Both spellings may be mixed.

namespace detail {

inline void line_column(const std::string& text, std::size_t byte, int& line, int& column) {
  line = 1;
  column = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

/// Last `"key":` before `byte`, used to name the member that failed to parse.
inline std::string key_before(const std::string& text, std::size_t byte) {
  static const std::regex key_re("\"([^\"\\\\]*)\"\\s*:");
  const std::string prefix = text.substr(0, std::min(byte, text.size()));
  std::string last;
  for (auto it = std::sregex_iterator(prefix.begin(), prefix.end(), key_re); it != std::sregex_iterator(); ++it)
    last = (*it)[1].str();
  return last;
}

inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

inline std::vector<double> to_numbers(const json& j, const std::string& key) {
  if (!j.is_array()) throw TypeMismatchError("type mismatch for '" + key + "': expected a list of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw TypeMismatchError("type mismatch for '" + key + "': expected a list of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace detail

/// Converts a JSON value to the declared type of `key`.
inline ParamValue param_from_json(const ScenarioConfig& cfg, const std::string& key, const json& j) {
  const Param& p = cfg.param(key);
  auto mismatch = [&]() {
    return TypeMismatchError("type mismatch for '" + key + "': expected " + to_string(p.type) + ", got " +
                             j.type_name());
  };
  switch (p.type) {
    case ParamType::boolean:
      if (!j.is_boolean()) throw mismatch();
      return j.get<bool>();
    case ParamType::integer:
      if (!j.is_number_integer()) throw mismatch();
      return j.get<std::int64_t>();
    case ParamType::number:
      if (!j.is_number()) throw mismatch();
      return j.get<double>();
    case ParamType::text:
      if (!j.is_string()) throw mismatch();
      return j.get<std::string>();
    case ParamType::number_list:
      return detail::to_numbers(j, key);
    case ParamType::box_list: {
      if (!j.is_array()) throw mismatch();
      std::vector<std::vector<double>> v;
      for (const auto& b : j) v.push_back(detail::to_numbers(b, key));
      return v;
    }
  }
  throw mismatch();
}

inline json param_to_json(const Param& p) {
  return std::visit([](const auto& v) { return json(v); }, p.value);
}

/// Parses config text onto the defaults of its scenario. `tag` is used when
/// the text carries no "scenario" member; if both are given they must agree.
inline ScenarioConfig parse_config(const std::string& text, const std::string& tag = "") {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, column = 0;
    detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1, line, column);
    const std::string key = detail::key_before(text, e.byte);
    std::ostringstream os;
    os << "parse error at line " << line << ", column " << column;
    if (!key.empty()) os << " in value of '" << key << "'";
    throw ConfigParseError(os.str(), line, column);
  }
  if (!j.is_object()) throw ConfigParseError("parse error at line 1, column 1: config must be a JSON object", 1, 1);
  std::string scenario = tag;
  if (j.contains("scenario")) {
    if (!j["scenario"].is_string()) throw TypeMismatchError("type mismatch for 'scenario': expected string");
    scenario = j["scenario"].get<std::string>();
    if (!tag.empty() && tag != scenario)
      throw ConfigError("config is for scenario '" + scenario + "' but '" + tag + "' was requested");
    j.erase("scenario");
  }
  if (scenario.empty()) throw ConfigError("no scenario given");
  ScenarioConfig cfg = default_config(scenario);
  std::vector<std::pair<std::string, json>> flat;
  detail::flatten(j, "", flat);
  for (const auto& [key, value] : flat) cfg.set(key, param_from_json(cfg, key, value));
  validate(cfg);
  return cfg;
}

/// Applies one `key=value` override. The value is read as JSON; a bare word
/// that is not valid JSON is taken as a string (`splitting=ode_first`).
inline void apply_override(ScenarioConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigParseError("override '" + assignment + "' is not of the form key=value", 1, 1);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  const Param& p = cfg.param(key);
  json j;
  try {
    j = json::parse(raw);
  } catch (const json::parse_error& e) {
    if (p.type != ParamType::text)
      throw ConfigParseError("parse error at column " + std::to_string(e.byte) + " in value of '" + key + "'", 1,
                             static_cast<int>(eq + 1 + e.byte));
    j = raw;
  }
  cfg.set(key, param_from_json(cfg, key, j));
}

/// Every effective parameter once, plus the list of overridden keys and any
/// run-level extras.
inline json manifest(const ScenarioConfig& cfg, const json& extra = json::object()) {
  json m;
  m["scenario"] = cfg.tag;
  json params = json::object();
  for (const auto& [key, p] : cfg.params()) params[key] = param_to_json(p);
  m["parameters"] = params;
  m["overridden"] = cfg.overridden;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = *it;
  return m;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Frames

/// 17 significant digits: enough for any binary64 to round-trip.
inline std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string frame_csv(const Mesh& mesh, const DensityField& rho) {
  std::string s = "cell_id,cx,cy";
  for (int i = 0; i < rho.populations(); ++i) s += ",rho" + std::to_string(i + 1);
  s += '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) {
    s += std::to_string(c) + ',' + fmt17(mesh.cell_centroid[c].x) + ',' + fmt17(mesh.cell_centroid[c].y);
    for (const auto& r : rho.rho) s += ',' + fmt17(r[c]);
    s += '\n';
  }
  return s;
}

inline std::string agents_csv(const AgentState& a) {
  std::string s = "t,component_index,value\n";
  for (std::size_t k = 0; k < a.p.size(); ++k) s += fmt17(a.t) + ',' + std::to_string(k) + ',' + fmt17(a.p[k]) + '\n';
  return s;
}

inline void write_frame_csv(const Mesh& mesh, const DensityField& rho, const std::filesystem::path& path) {
  write_text_file(path, frame_csv(mesh, rho));
}

inline void write_agents_csv(const AgentState& a, const std::filesystem::path& path) {
  write_text_file(path, agents_csv(a));
}

/// Densities from a frame CSV, one vector per population.
inline std::vector<std::vector<double>> read_frame_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path.string() + "' is empty");
  int pops = 0;
  for (std::size_t pos = 0; (pos = line.find(",rho", pos)) != std::string::npos; ++pos) ++pops;
  std::vector<std::vector<double>> rho(pops);
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) cols.push_back(f);
    if (static_cast<int>(cols.size()) != 3 + pops)
      throw IoError("'" + path.string() + "' row " + std::to_string(row + 1) + " has the wrong column count");
    for (int i = 0; i < pops; ++i) rho[i].push_back(std::strtod(cols[3 + i].c_str(), nullptr));
    ++row;
  }
  return rho;
}

inline std::string frame_vtk(const Mesh& mesh, const DensityField& rho, const std::string& title) {
  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.vertices.size() << " double\n";
  for (const auto& v : mesh.vertices) os << fmt17(v.x) << ' ' << fmt17(v.y) << " 0\n";
  os << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells) os << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  os << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) os << "5\n";
  if (rho.populations() > 0) {
    os << "CELL_DATA " << mesh.num_cells() << '\n';
    for (int i = 0; i < rho.populations(); ++i) {
      os << "SCALARS rho" << i + 1 << " double 1\nLOOKUP_TABLE default\n";
      for (double v : rho.rho[i]) os << fmt17(v) << '\n';
    }
  }
  return os.str();
}

/// Agents as a single poly-vertex cell.
inline std::string agents_vtk(const std::vector<Vec2>& pts, double t) {
  std::ostringstream os;
  os << "# vtk DataFile Version 3.0\nagents t=" << fmt17(t) << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << pts.size() << " double\n";
  for (const auto& p : pts) os << fmt17(p.x) << ' ' << fmt17(p.y) << " 0\n";
  if (pts.empty()) {
    os << "CELLS 0 0\nCELL_TYPES 0\n";
  } else {
    os << "CELLS 1 " << pts.size() + 1 << '\n' << pts.size();
    for (std::size_t k = 0; k < pts.size(); ++k) os << ' ' << k;
    os << "\nCELL_TYPES 1\n2\n";
  }
  return os.str();
}

inline void write_frame_vtk(const Mesh& mesh, const DensityField& rho, const std::filesystem::path& path,
                            double t = 0.0) {
  write_text_file(path, frame_vtk(mesh, rho, "crowdflow t=" + fmt17(t)));
}

inline void write_mesh_vtk(const Mesh& mesh, const std::filesystem::path& path) {
  write_text_file(path, frame_vtk(mesh, DensityField{}, "crowdflow mesh"));
}

enum class FrameFormat { csv, vtk, both };

inline FrameFormat frame_format_from_string(const std::string& s) {
  if (s == "csv") return FrameFormat::csv;
  if (s == "vtk") return FrameFormat::vtk;
  if (s == "both") return FrameFormat::both;
  throw ConfigError("unknown frame format '" + s + "' (expected csv, vtk or both)");
}

inline std::string frame_stem(const char* kind, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d", kind, index);
  return buf;
}

/// Sink writing frame_<idx> and agents_<idx> files into a directory.
inline FrameSink frame_writer(std::filesystem::path dir, FrameFormat fmt) {
  return [dir = std::move(dir), fmt](const Frame& f) {
    const Mesh& mesh = f.model->mesh();
    const SimState& s = *f.state;
    if (fmt != FrameFormat::vtk) {
      write_frame_csv(mesh, s.density, dir / (frame_stem("frame", f.index) + ".csv"));
      write_agents_csv(s.agents, dir / (frame_stem("agents", f.index) + ".csv"));
    }
    if (fmt != FrameFormat::csv) {
      write_frame_vtk(mesh, s.density, dir / (frame_stem("frame", f.index) + ".vtk"), s.t);
      write_text_file(dir / (frame_stem("agents", f.index) + ".vtk"),
                      agents_vtk(f.model->agent_points(s.agents), s.t));
    }
  };
}

/// Per-step history as CSV: step, t, dt, masses, clamped mass, extrema.
inline std::string diagnostics_csv(const Diagnostics& d) {
  std::string s = "step,t,dt";
  for (int i = 0; i < d.populations; ++i) s += ",mass" + std::to_string(i + 1);
  s += ",clamped_mass,min_density,max_density,wave_speed\n";
  double t = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    t += d.dt[k];
    s += std::to_string(k + 1) + ',' + fmt17(t) + ',' + fmt17(d.dt[k]);
    for (int i = 0; i < d.populations; ++i) s += ',' + fmt17(d.mass_at(k, i));
    s += ',' + fmt17(d.clamped_mass[k]) + ',' + fmt17(d.min_density[k]) + ',' + fmt17(d.max_density[k]) + ',' +
         fmt17(d.wave_speed[k]) + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// State serialization

inline json state_to_json(const SimState& s) {
  json j;
  j["t"] = s.t;
  j["step"] = s.step;
  j["capacity"] = s.density.capacity;
  j["density"] = s.density.rho;
  j["agents"] = {{"schema", to_string(s.agents.schema)}, {"t", s.agents.t}, {"p", s.agents.p}};
  const auto& d = s.diagnostics;
  j["diagnostics"] = {{"populations", d.populations}, {"mass", d.mass},           {"clamped_mass", d.clamped_mass},
                      {"min_density", d.min_density}, {"max_density", d.max_density}, {"dt", d.dt},
                      {"wave_speed", d.wave_speed}};
  return j;
}

inline AgentSchema agent_schema_from_string(const std::string& s) {
  for (auto a : {AgentSchema::none, AgentSchema::guides, AgentSchema::cars, AgentSchema::officers})
    if (s == to_string(a)) return a;
  throw IoError("unknown agent schema '" + s + "'");
}

inline SimState state_from_json(const json& j) {
  try {
    SimState s;
    s.t = j.at("t").get<double>();
    s.step = j.at("step").get<std::int64_t>();
    s.density.capacity = j.at("capacity").get<double>();
    s.density.rho = j.at("density").get<std::vector<std::vector<double>>>();
    const auto& a = j.at("agents");
    s.agents.schema = agent_schema_from_string(a.at("schema").get<std::string>());
    s.agents.t = a.at("t").get<double>();
    s.agents.p = a.at("p").get<std::vector<double>>();
    const auto& d = j.at("diagnostics");
    s.diagnostics.populations = d.at("populations").get<int>();
    s.diagnostics.mass = d.at("mass").get<std::vector<double>>();
    s.diagnostics.clamped_mass = d.at("clamped_mass").get<std::vector<double>>();
    s.diagnostics.min_density = d.at("min_density").get<std::vector<double>>();
    s.diagnostics.max_density = d.at("max_density").get<std::vector<double>>();
    s.diagnostics.dt = d.at("dt").get<std::vector<double>>();
    s.diagnostics.wave_speed = d.at("wave_speed").get<std::vector<double>>();
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed state: ") + e.what());
  }
}

/// JSON doubles are printed shortest-round-trip, so a restored state is
/// bit-identical to the saved one.
inline void save_state(const SimState& s, const std::filesystem::path& path) {
  write_text_file(path, state_to_json(s).dump());
}

inline SimState load_state(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return state_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace crowdflow
