#include "core/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace omnitrack {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::defaults() {
  Config cfg;
  auto& v = cfg.values_;
  v["frame_period"] = "0.03333333333333333";

  v["robot.mass"] = "2.0";
  v["robot.body_inertia"] = "0.02";
  v["robot.wheel_radius"] = "0.027";
  v["robot.body_radius"] = "0.08";
  v["robot.gear_ratio"] = "3.0";
  v["robot.wheel_inertia"] = "5e-06";
  v["robot.torque_const"] = "0.009";
  v["robot.emf_const"] = "0.009";
  v["robot.armature_resistance"] = "8.0";
  v["robot.armature_inductance"] = "0.0011";
  v["robot.viscous_friction"] = "1.195e-04";
  v["robot.supply_voltage"] = "12.0";
  v["robot.input_delay"] = "4";

  v["noise.process_sigma_vel_xy"] = "0.067";
  v["noise.process_sigma_vel_theta"] = "0.2";
  v["noise.process_sigma_acc_xy"] = "2.0";
  v["noise.process_sigma_acc_theta"] = "2.0";
  v["noise.meas_sigma_pos"] = "0.005";
  v["noise.meas_sigma_heading"] = "0.020";
  v["noise.outlier_prob"] = "0.02";
  v["noise.court_half_x"] = "2.45";
  v["noise.court_half_y"] = "1.70";
  v["noise.heading_range"] = "3.141592653589793";
  v["noise.process_noise_in_truth"] = "0";

  v["gate.threshold"] = "11.345";
  v["gate.mode"] = "mahalanobis";

  v["ut.alpha"] = "1.0";
  v["ut.beta"] = "2.0";
  v["ut.kappa"] = "auto";
  v["cd.step"] = "auto";

  v["pf.particles"] = "600";
  v["pf.resample"] = "always";
  v["pf.ess_fraction"] = "0.5";
  v["sppf.particles"] = "600";
  v["sppf.proposal"] = "srukf";
  v["gmsppf.components"] = "3";
  v["gmsppf.particles"] = "600";
  v["gmsppf.em_iters"] = "10";
  v["gmsppf.cov_floor"] = "1e-09";
  v["gmsppf.proposal"] = "srcdkf";

  v["bench.filters"] = "ekf,dd1,dd2,ukf,cdkf,srukf,srcdkf,pf,gmsppf,sppf";
  v["bench.trajectories"] = "1,2,3,4,5,6";
  v["bench.seeds"] = "20";
  v["bench.seed_base"] = "1";
  v["bench.horizons"] = "1,4,8";
  v["bench.jobs"] = "1";
  v["bench.formats"] = "csv,json";
  v["bench.out"] = "out";
  v["bench.hold_last_input"] = "0";

  v["sweep.thresholds"] = "2,4,6.25,9,11.345,16,25";
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg = defaults();
  cfg.apply_text(text);
  return cfg;
}

void Config::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("unknown config key: " + key);
  }
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::invalid_argument("unknown config key: " + key);
  }
  return it->second;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

double Config::get_double(const std::string& key) const {
  const std::string& s = get(key);
  std::size_t used = 0;
  const double value = std::stod(s, &used);
  if (trim(s.substr(used)).size() > 0) {
    throw std::invalid_argument("config key " + key + ": not a number: " + s);
  }
  return value;
}

int Config::get_int(const std::string& key) const {
  const double d = get_double(key);
  const int i = static_cast<int>(std::llround(d));
  if (std::abs(d - i) > 1e-9) {
    throw std::invalid_argument("config key " + key + ": not an integer");
  }
  return i;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& s = get(key);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + s);
}

std::vector<std::string> Config::get_string_list(const std::string& key) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const std::string& s : get_string_list(key)) {
    out.push_back(std::stod(s));
  }
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (double d : get_double_list(key)) {
    out.push_back(static_cast<int>(std::llround(d)));
  }
  return out;
}

RobotParams Config::robot_params() const {
  RobotParams p;
  p.mass = get_double("robot.mass");
  p.body_inertia = get_double("robot.body_inertia");
  p.wheel_radius = get_double("robot.wheel_radius");
  p.body_radius = get_double("robot.body_radius");
  p.gear_ratio = get_double("robot.gear_ratio");
  p.wheel_inertia = get_double("robot.wheel_inertia");
  p.torque_constant = get_double("robot.torque_const");
  p.emf_constant = get_double("robot.emf_const");
  p.armature_resistance = get_double("robot.armature_resistance");
  p.armature_inductance = get_double("robot.armature_inductance");
  p.viscous_friction = get_double("robot.viscous_friction");
  p.supply_voltage = get_double("robot.supply_voltage");
  p.input_delay_frames = get_int("robot.input_delay");
  p.validate();
  return p;
}

NoiseConfig Config::noise_config() const {
  NoiseConfig n = NoiseConfig::defaults();
  Eigen::VectorXd q_sigma(kStateDim);
  const double sv = get_double("noise.process_sigma_vel_xy");
  const double st = get_double("noise.process_sigma_vel_theta");
  const double sa = get_double("noise.process_sigma_acc_xy");
  const double sat = get_double("noise.process_sigma_acc_theta");
  q_sigma << sv, sv, st, sa, sa, sat;
  n.process_cov = q_sigma.array().square().matrix().asDiagonal();
  Eigen::Vector3d r_sigma;
  const double sp = get_double("noise.meas_sigma_pos");
  r_sigma << sp, sp, get_double("noise.meas_sigma_heading");
  n.meas_cov = r_sigma.array().square().matrix().asDiagonal();
  n.outlier_prob = get_double("noise.outlier_prob");
  n.court_half_x = get_double("noise.court_half_x");
  n.court_half_y = get_double("noise.court_half_y");
  n.heading_range = get_double("noise.heading_range");
  n.process_noise_in_truth = get_bool("noise.process_noise_in_truth");
  n.validate();
  return n;
}

GateConfig Config::gate_config() const {
  GateConfig g;
  g.threshold = get_double("gate.threshold");
  const std::string mode = get("gate.mode");
  if (mode == "mahalanobis") {
    g.mode = GateConfig::Mode::kMahalanobis;
  } else if (mode == "likelihood") {
    g.mode = GateConfig::Mode::kLikelihood;
  } else {
    throw std::invalid_argument("gate.mode must be mahalanobis or likelihood");
  }
  return g;
}

double Config::frame_period() const {
  const double t = get_double("frame_period");
  if (!(t > 0.0)) {
    throw std::invalid_argument("frame_period must be positive");
  }
  return t;
}

}  // namespace omnitrack
