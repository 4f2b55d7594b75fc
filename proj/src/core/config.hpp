#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/gate.hpp"
#include "core/sim.hpp"

namespace omnitrack {

/// Flat key-value configuration with dotted section keys. Every tunable in
/// the project has a default here; files and explicit set() calls override.
/// Unknown keys are rejected so typos fail fast.
class Config {
 public:
  static Config defaults();
  static Config load(const std::string& path);        // defaults + file
  static Config from_string(const std::string& text);  // defaults + text

  void set(const std::string& key, const std::string& value);
  void apply_text(const std::string& text);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  RobotParams robot_params() const;
  NoiseConfig noise_config() const;
  GateConfig gate_config() const;
  double frame_period() const;

 private:
  Config() = default;
  std::map<std::string, std::string> values_;
};

}  // namespace omnitrack
