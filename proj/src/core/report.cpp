#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "core/bench.hpp"

namespace omnitrack {

namespace {

std::FILE* open_or_throw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  return f;
}

}  // namespace

void write_report_csv(const BenchReport& report, const std::string& path) {
  std::FILE* f = open_or_throw(path);
  std::fputs(
      "filter,gated,trajectory,horizon,pos_rmse_m,heading_rmse_rad,"
      "wall_ms_mean,tc_ratio,resets,rejections,seeds\n",
      f);
  for (const ReportCell& cell : report.cells) {
    const FilterSetup& setup = report.cfg.filters[cell.filter_index];
    std::fprintf(f, "%s,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%llu,%llu,%d\n",
                 filter_kind_name(setup.kind).c_str(), setup.gated ? 1 : 0, cell.trajectory,
                 cell.horizon, cell.pos_rmse, cell.heading_rmse, cell.wall_ms, cell.tc_ratio,
                 static_cast<unsigned long long>(cell.resets),
                 static_cast<unsigned long long>(cell.rejections), cell.seeds);
  }
  std::fclose(f);
}

void write_report_json(const BenchReport& report, const std::string& path) {
  nlohmann::json root;

  nlohmann::json config = nlohmann::json::object();
  for (const auto& [key, value] : report.cfg.raw.entries()) {
    config[key] = value;
  }
  root["config"] = config;
  root["seed_manifest"] = report.cfg.seeds;
  root["failed_runs"] = report.failed_runs;

  nlohmann::json names = nlohmann::json::object();
  for (std::size_t t = 0; t < report.trajectory_names.size(); ++t) {
    names[std::to_string(report.cfg.trajectories[t])] = report.trajectory_names[t];
  }
  root["trajectories"] = names;

  nlohmann::json cells = nlohmann::json::array();
  const auto& horizons = report.cfg.horizons;
  for (const ReportCell& cell : report.cells) {
    const FilterSetup& setup = report.cfg.filters[cell.filter_index];
    nlohmann::json item;
    item["filter"] = filter_kind_name(setup.kind);
    item["gated"] = setup.gated;
    item["trajectory"] = cell.trajectory;
    item["horizon"] = cell.horizon;
    item["pos_rmse_m"] = cell.pos_rmse;
    item["heading_rmse_rad"] = cell.heading_rmse;
    item["wall_ms_mean"] = cell.wall_ms;
    item["tc_ratio"] = cell.tc_ratio;
    item["resets"] = cell.resets;
    item["rejections"] = cell.rejections;
    item["seeds"] = cell.seeds;

    // Per-seed breakdown for this cell's horizon.
    std::size_t hi = 0;
    while (hi < horizons.size() && horizons[hi] != cell.horizon) {
      ++hi;
    }
    std::size_t ti = 0;
    while (ti < report.cfg.trajectories.size() &&
           report.cfg.trajectories[ti] != cell.trajectory) {
      ++ti;
    }
    nlohmann::json per_seed = nlohmann::json::array();
    for (const SeedOutcome& run : report.runs[cell.filter_index][ti]) {
      nlohmann::json s;
      s["seed"] = run.seed;
      s["failed"] = run.failed;
      if (run.failed) {
        s["error"] = run.error;
      } else {
        s["pos_rmse_m"] = run.pos_rmse[hi];
        s["heading_rmse_rad"] = run.heading_rmse[hi];
        s["wall_ms"] = run.wall_ms[hi];
        s["max_pos_err_m"] = run.max_pos_err[hi];
        s["resets"] = run.resets;
        s["rejections"] = run.rejections;
      }
      per_seed.push_back(s);
    }
    item["per_seed"] = per_seed;
    cells.push_back(item);
  }
  root["cells"] = cells;

  std::FILE* f = open_or_throw(path);
  const std::string text = root.dump(2);
  std::fwrite(text.data(), 1, text.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

void write_threshold_sweep_csv(const std::vector<ThresholdSweepRow>& rows,
                               const std::string& path) {
  std::FILE* f = open_or_throw(path);
  std::fputs("threshold,filter,trajectory,horizon,pos_rmse_m,heading_rmse_rad,rejection_rate\n",
             f);
  for (const ThresholdSweepRow& row : rows) {
    std::fprintf(f, "%.17g,%s,%d,%d,%.17g,%.17g,%.17g\n", row.threshold, row.filter.c_str(),
                 row.trajectory, row.horizon, row.pos_rmse, row.heading_rmse,
                 row.rejection_rate);
  }
  std::fclose(f);
}

}  // namespace omnitrack
