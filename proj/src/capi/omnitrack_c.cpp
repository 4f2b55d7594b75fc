#include "omnitrack/omnitrack.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "core/bench.hpp"
#include "core/config.hpp"
#include "core/model.hpp"
#include "core/sim.hpp"

namespace {

thread_local std::string g_last_error;

ot_status fail(ot_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
ot_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const omnitrack::NotPositiveDefinite& e) {
    return fail(OT_ERR_NOT_POSITIVE_DEFINITE, e.what());
  } catch (const omnitrack::DimensionMismatch& e) {
    return fail(OT_ERR_DIMENSION_MISMATCH, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(OT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(OT_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(OT_ERR_RUNTIME, "unknown error");
  }
}

}  // namespace

struct ot_config {
  omnitrack::Config cfg = omnitrack::Config::defaults();
};

struct ot_sim_run {
  omnitrack::SimRun run;
};

struct ot_filter {
  std::unique_ptr<omnitrack::TrackingFilter> filter;
  std::shared_ptr<const omnitrack::RobotModel> model;
  Eigen::MatrixXd q, r, p0;
  std::vector<Eigen::VectorXd> schedule;
  bool initialized = false;
};

extern "C" {

const char* ot_version(void) { return "0.1.0"; }

const char* ot_status_name(ot_status status) {
  switch (status) {
    case OT_OK: return "ok";
    case OT_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case OT_ERR_NOT_POSITIVE_DEFINITE: return "not_positive_definite";
    case OT_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case OT_ERR_IO: return "io_error";
    case OT_ERR_RUNTIME: return "runtime_error";
    case OT_ERR_PARTIAL_FAILURE: return "partial_failure";
  }
  return "unknown";
}

const char* ot_last_error(void) { return g_last_error.c_str(); }

ot_status ot_config_create(ot_config** out) {
  if (out == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "out must not be null");
  }
  return guarded([&] {
    *out = new ot_config();
    return OT_OK;
  });
}

ot_status ot_config_load(const char* path, ot_config** out) {
  if (path == nullptr || out == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "path and out must not be null");
  }
  return guarded([&] {
    auto cfg = std::make_unique<ot_config>();
    cfg->cfg = omnitrack::Config::load(path);
    *out = cfg.release();
    return OT_OK;
  });
}

ot_status ot_config_set(ot_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    cfg->cfg.set(key, value);
    return OT_OK;
  });
}

ot_status ot_config_get(const ot_config* cfg, const char* key, char* buffer, size_t capacity) {
  if (cfg == nullptr || key == nullptr || buffer == nullptr || capacity == 0) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const std::string& value = cfg->cfg.get(key);
    if (value.size() + 1 > capacity) {
      return fail(OT_ERR_INVALID_ARGUMENT, "buffer too small");
    }
    std::memcpy(buffer, value.c_str(), value.size() + 1);
    return OT_OK;
  });
}

void ot_config_free(ot_config* cfg) { delete cfg; }

ot_status ot_sim_run_create(const ot_config* cfg, int trajectory_id, uint64_t seed,
                            ot_sim_run** out) {
  if (cfg == nullptr || out == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto traj = omnitrack::reference_trajectory(trajectory_id, cfg->cfg.robot_params(),
                                                      cfg->cfg.frame_period());
    auto run = std::make_unique<ot_sim_run>();
    run->run = omnitrack::simulate_run(traj, cfg->cfg.noise_config(), seed);
    *out = run.release();
    return OT_OK;
  });
}

size_t ot_sim_run_length(const ot_sim_run* run) {
  return run == nullptr ? 0 : run->run.ideal.size();
}

ot_status ot_sim_run_ideal_state(const ot_sim_run* run, size_t frame, double state[6]) {
  if (run == nullptr || state == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (frame >= run->run.ideal.size()) {
    return fail(OT_ERR_INVALID_ARGUMENT, "frame out of range");
  }
  Eigen::Map<Eigen::Matrix<double, 6, 1>> out_map(state);
  out_map = run->run.ideal[frame];
  return OT_OK;
}

ot_status ot_sim_run_measurement(const ot_sim_run* run, size_t frame, double pose[3],
                                 int* outlier) {
  if (run == nullptr || pose == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (frame >= run->run.measurements.size()) {
    return fail(OT_ERR_INVALID_ARGUMENT, "frame out of range");
  }
  Eigen::Map<Eigen::Vector3d> pose_map(pose);
  pose_map = run->run.measurements[frame];
  if (outlier != nullptr) {
    *outlier = run->run.outlier_flags[frame];
  }
  return OT_OK;
}

ot_status ot_sim_run_input(const ot_sim_run* run, size_t frame, double volts[3]) {
  if (run == nullptr || volts == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (frame >= run->run.inputs.size()) {
    return fail(OT_ERR_INVALID_ARGUMENT, "frame out of range");
  }
  Eigen::Map<Eigen::Vector3d> volts_map(volts);
  volts_map = run->run.inputs[frame];
  return OT_OK;
}

ot_status ot_sim_run_write_csv(const ot_sim_run* run, const char* path) {
  if (run == nullptr || path == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    try {
      omnitrack::write_sim_run_csv(run->run, path);
    } catch (const std::runtime_error& e) {
      return fail(OT_ERR_IO, e.what());
    }
    return OT_OK;
  });
}

void ot_sim_run_free(ot_sim_run* run) { delete run; }

ot_status ot_filter_create(const ot_config* cfg, const char* name, int gated,
                           uint64_t rng_seed, ot_filter** out) {
  if (cfg == nullptr || name == nullptr || out == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const omnitrack::BenchConfig bench = omnitrack::BenchConfig::from_config(cfg->cfg);
    omnitrack::FilterSetup setup;
    setup.kind = omnitrack::parse_filter_kind(name);
    setup.gated = gated != 0;
    auto handle = std::make_unique<ot_filter>();
    handle->model = std::make_shared<omnitrack::RobotModel>(bench.robot, bench.dt);
    handle->q = bench.noise.step_process_cov(bench.dt);
    handle->r = bench.noise.meas_cov;
    handle->p0 = handle->q;
    handle->filter =
        omnitrack::make_filter(bench, setup, handle->model, omnitrack::RandomStream(rng_seed));
    *out = handle.release();
    return OT_OK;
  });
}

ot_status ot_filter_init(ot_filter* filter, const double pose[3]) {
  if (filter == nullptr || pose == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(omnitrack::kStateDim);
    x0.head<3>() = Eigen::Map<const Eigen::Vector3d>(pose);
    filter->filter->init(x0, filter->p0, filter->q, filter->r);
    filter->initialized = true;
    return OT_OK;
  });
}

ot_status ot_filter_step(ot_filter* filter, const double volts[3], const double pose[3]) {
  if (filter == nullptr || volts == nullptr || pose == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (!filter->initialized) {
    return fail(OT_ERR_RUNTIME, "filter not initialized");
  }
  return guarded([&] {
    const Eigen::VectorXd u = Eigen::Map<const Eigen::Vector3d>(volts);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::Vector3d>(pose);
    filter->filter->step(u, y);
    return OT_OK;
  });
}

ot_status ot_filter_estimate(const ot_filter* filter, double state[6]) {
  if (filter == nullptr || state == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (!filter->initialized) {
    return fail(OT_ERR_RUNTIME, "filter not initialized");
  }
  Eigen::Map<Eigen::Matrix<double, 6, 1>> state_map(state);
  state_map = filter->filter->estimate();
  return OT_OK;
}

ot_status ot_filter_predict_pose(ot_filter* filter, const double* volts, size_t n,
                                 double pose[3]) {
  if (filter == nullptr || volts == nullptr || pose == nullptr || n == 0) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument or empty schedule");
  }
  if (!filter->initialized) {
    return fail(OT_ERR_RUNTIME, "filter not initialized");
  }
  return guarded([&] {
    filter->schedule.resize(n);
    for (size_t i = 0; i < n; ++i) {
      filter->schedule[i] = Eigen::Map<const Eigen::Vector3d>(volts + 3 * i);
    }
    const Eigen::Vector3d predicted = filter->filter->predict_pose_ahead(
        std::span<const Eigen::VectorXd>(filter->schedule.data(), n));
    Eigen::Map<Eigen::Vector3d> pose_map(pose);
    pose_map = predicted;
    return OT_OK;
  });
}

ot_status ot_filter_counters(const ot_filter* filter, uint64_t* resets, uint64_t* rejections) {
  if (filter == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (resets != nullptr) {
    *resets = filter->filter->reset_events();
  }
  if (rejections != nullptr) {
    *rejections = filter->filter->rejected_measurements();
  }
  return OT_OK;
}

void ot_filter_free(ot_filter* filter) { delete filter; }

ot_status ot_bench_run(const ot_config* cfg, const char* out_dir) {
  if (cfg == nullptr || out_dir == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&]() -> ot_status {
    omnitrack::BenchConfig bench = omnitrack::BenchConfig::from_config(cfg->cfg);
    bench.out_dir = out_dir;
    std::filesystem::create_directories(bench.out_dir);
    const omnitrack::BenchReport report = omnitrack::run_benchmark(bench);
    for (const std::string& format : bench.formats) {
      if (format == "csv") {
        omnitrack::write_report_csv(report, bench.out_dir + "/bench.csv");
      } else if (format == "json") {
        omnitrack::write_report_json(report, bench.out_dir + "/bench.json");
      } else {
        return fail(OT_ERR_INVALID_ARGUMENT, "unknown report format: " + format);
      }
    }
    if (report.failed_runs > 0) {
      return fail(OT_ERR_PARTIAL_FAILURE,
                  std::to_string(report.failed_runs) + " runs failed and were excluded");
    }
    return OT_OK;
  });
}

ot_status ot_threshold_sweep(const ot_config* cfg, const double* thresholds, size_t count,
                             const char* csv_path) {
  if (cfg == nullptr || thresholds == nullptr || count == 0 || csv_path == nullptr) {
    return fail(OT_ERR_INVALID_ARGUMENT, "null argument or empty threshold list");
  }
  return guarded([&] {
    const omnitrack::BenchConfig bench = omnitrack::BenchConfig::from_config(cfg->cfg);
    const std::vector<double> list(thresholds, thresholds + count);
    const auto rows = omnitrack::run_threshold_sweep(bench, list);
    omnitrack::write_threshold_sweep_csv(rows, csv_path);
    return OT_OK;
  });
}

}  // extern "C"
