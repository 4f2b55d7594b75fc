// Command-line front end for the omnitrack shared library.
//
//   omnitrack simulate --trajectory 4 --seed 7 --out run.csv
//   omnitrack bench --config bench.cfg --out results/
//   omnitrack sweep-threshold --thresholds 4,9,11.345,25 --out sweep.csv

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omnitrack/omnitrack.h"

namespace {

struct ConfigHandle {
  ot_config* cfg = nullptr;
  ~ConfigHandle() { ot_config_free(cfg); }
};

int die(ot_status status, const std::string& context) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", context.c_str(), ot_last_error(),
               ot_status_name(status));
  return status == OT_ERR_PARTIAL_FAILURE ? 2 : 1;
}

ot_status load_config(const std::string& path, const std::vector<std::string>& overrides,
                      ConfigHandle& handle) {
  ot_status status =
      path.empty() ? ot_config_create(&handle.cfg) : ot_config_load(path.c_str(), &handle.cfg);
  if (status != OT_OK) {
    return status;
  }
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: override '%s' is not key=value\n", entry.c_str());
      return OT_ERR_INVALID_ARGUMENT;
    }
    status = ot_config_set(handle.cfg, entry.substr(0, eq).c_str(),
                           entry.substr(eq + 1).c_str());
    if (status != OT_OK) {
      return status;
    }
  }
  return OT_OK;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) {
      out += ",";
    }
    out += items[i];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian trajectory tracking and prediction benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Configuration file (key = value lines)");
  app.add_option("--set", overrides, "Inline config override, key=value (repeatable)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Write one noisy simulation run as CSV");
  int trajectory = 1;
  std::uint64_t seed = 1;
  std::string sim_out = "sim_run.csv";
  simulate->add_option("--trajectory", trajectory, "Reference trajectory id (1..6)");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--out", sim_out, "Output CSV path");

  // bench
  auto* bench = app.add_subcommand("bench", "Run the full benchmark sweep");
  std::string bench_out = "out";
  std::vector<std::string> filters, formats;
  std::vector<std::string> trajectories, horizons;
  int seeds = -1;
  int jobs = -1;
  bench->add_option("--out", bench_out, "Output directory");
  bench->add_option("--filters", filters, "Comma-separated filter list")->delimiter(',');
  bench->add_option("--trajectories", trajectories, "Trajectory ids")->delimiter(',');
  bench->add_option("--seeds", seeds, "Number of seeded runs per trajectory");
  bench->add_option("--horizons", horizons, "Prediction horizons in frames")->delimiter(',');
  bench->add_option("--jobs", jobs, "Worker threads");
  bench->add_option("--format", formats, "Report formats: csv,json")->delimiter(',');

  // sweep-threshold
  auto* sweep = app.add_subcommand("sweep-threshold", "Scan the outlier-gate threshold");
  std::vector<double> thresholds;
  std::string sweep_out = "threshold_sweep.csv";
  sweep->add_option("--thresholds", thresholds, "Gate thresholds to scan")->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output CSV path");

  CLI11_PARSE(app, argc, argv);

  ConfigHandle handle;
  ot_status status = load_config(config_path, overrides, handle);
  if (status != OT_OK) {
    return die(status, "loading configuration");
  }

  if (simulate->parsed()) {
    ot_sim_run* run = nullptr;
    status = ot_sim_run_create(handle.cfg, trajectory, seed, &run);
    if (status != OT_OK) {
      return die(status, "building simulation run");
    }
    status = ot_sim_run_write_csv(run, sim_out.c_str());
    ot_sim_run_free(run);
    if (status != OT_OK) {
      return die(status, "writing " + sim_out);
    }
    std::printf("wrote %s\n", sim_out.c_str());
    return 0;
  }

  if (bench->parsed()) {
    if (!filters.empty()) {
      ot_config_set(handle.cfg, "bench.filters", join(filters).c_str());
    }
    if (!trajectories.empty()) {
      ot_config_set(handle.cfg, "bench.trajectories", join(trajectories).c_str());
    }
    if (!horizons.empty()) {
      ot_config_set(handle.cfg, "bench.horizons", join(horizons).c_str());
    }
    if (!formats.empty()) {
      ot_config_set(handle.cfg, "bench.formats", join(formats).c_str());
    }
    if (seeds > 0) {
      ot_config_set(handle.cfg, "bench.seeds", std::to_string(seeds).c_str());
    }
    if (jobs > 0) {
      ot_config_set(handle.cfg, "bench.jobs", std::to_string(jobs).c_str());
    }
    status = ot_bench_run(handle.cfg, bench_out.c_str());
    if (status == OT_ERR_PARTIAL_FAILURE) {
      std::fprintf(stderr, "warning: %s\n", ot_last_error());
      std::printf("wrote reports to %s (partial)\n", bench_out.c_str());
      return 2;
    }
    if (status != OT_OK) {
      return die(status, "running benchmark");
    }
    std::printf("wrote reports to %s\n", bench_out.c_str());
    return 0;
  }

  if (sweep->parsed()) {
    if (thresholds.empty()) {
      char buffer[256];
      if (ot_config_get(handle.cfg, "sweep.thresholds", buffer, sizeof buffer) == OT_OK) {
        std::string item;
        for (const char* p = buffer;; ++p) {
          if (*p == ',' || *p == '\0') {
            if (!item.empty()) {
              thresholds.push_back(std::stod(item));
            }
            item.clear();
            if (*p == '\0') {
              break;
            }
          } else {
            item += *p;
          }
        }
      }
    }
    status = ot_threshold_sweep(handle.cfg, thresholds.data(), thresholds.size(),
                                sweep_out.c_str());
    if (status != OT_OK) {
      return die(status, "running threshold sweep");
    }
    std::printf("wrote %s\n", sweep_out.c_str());
    return 0;
  }

  return 1;
}
