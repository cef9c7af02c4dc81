#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "crowdflow/common.hpp"

namespace crowdflow {

/// Malformed config text; carries 1-based line and column.
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& msg, int line, int column)
      : ConfigError(msg), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class UnknownKeyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TypeMismatchError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InvariantViolation : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class ParamType { boolean, integer, number, text, number_list, box_list };

inline const char* to_string(ParamType t) {
  switch (t) {
    case ParamType::boolean: return "boolean";
    case ParamType::integer: return "integer";
    case ParamType::number: return "number";
    case ParamType::text: return "string";
    case ParamType::number_list: return "list of numbers";
    case ParamType::box_list: return "list of [xmin, xmax, ymin, ymax, value] boxes";
  }
  return "?";
}

using ParamValue =
    std::variant<bool, std::int64_t, double, std::string, std::vector<double>, std::vector<std::vector<double>>>;

struct Param {
  ParamType type = ParamType::number;
  ParamValue value;
};

/// Flat dotted-key parameter set for one scenario. The key set and types are
/// fixed by the scenario defaults; overrides may only change values.
class ScenarioConfig {
 public:
  std::string tag;
  /// Keys changed from their defaults, in application order.
  std::vector<std::string> overridden;

  void declare(const std::string& key, bool v) { params_[key] = {ParamType::boolean, v}; }
  void declare(const std::string& key, int v) { params_[key] = {ParamType::integer, std::int64_t{v}}; }
  void declare(const std::string& key, double v) { params_[key] = {ParamType::number, v}; }
  void declare(const std::string& key, const char* v) { params_[key] = {ParamType::text, std::string(v)}; }
  void declare(const std::string& key, std::vector<double> v) {
    params_[key] = {ParamType::number_list, std::move(v)};
  }
  void declare_boxes(const std::string& key, std::vector<std::vector<double>> v) {
    params_[key] = {ParamType::box_list, std::move(v)};
  }

  bool has(const std::string& key) const { return params_.count(key) != 0; }
  const std::map<std::string, Param>& params() const { return params_; }

  const Param& param(const std::string& key) const {
    auto it = params_.find(key);
    if (it == params_.end()) throw UnknownKeyError("unknown key '" + key + "' for scenario '" + tag + "'");
    return it->second;
  }

  /// Replaces a value; the caller has already converted it to the declared type.
  void set(const std::string& key, ParamValue v) {
    auto it = params_.find(key);
    if (it == params_.end()) throw UnknownKeyError("unknown key '" + key + "' for scenario '" + tag + "'");
    if (v.index() != it->second.value.index())
      throw TypeMismatchError("type mismatch for '" + key + "': expected " + to_string(it->second.type));
    it->second.value = std::move(v);
    overridden.push_back(key);
  }

  bool flag(const std::string& key) const { return get<bool>(key); }
  int integer(const std::string& key) const { return static_cast<int>(get<std::int64_t>(key)); }
  double number(const std::string& key) const { return get<double>(key); }
  const std::string& text(const std::string& key) const { return get<std::string>(key); }
  const std::vector<double>& list(const std::string& key) const { return get<std::vector<double>>(key); }
  const std::vector<std::vector<double>>& boxes(const std::string& key) const {
    return get<std::vector<std::vector<double>>>(key);
  }

 private:
  template <class T>
  const T& get(const std::string& key) const {
    const Param& p = param(key);
    if (const T* v = std::get_if<T>(&p.value)) return *v;
    throw TypeMismatchError("type mismatch for '" + key + "'");
  }

  std::map<std::string, Param> params_;
};

}  // namespace crowdflow
