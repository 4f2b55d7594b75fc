#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/smc_filters.hpp"

namespace omnitrack {

enum class FilterKind { kEkf, kDd1, kDd2, kUkf, kCdkf, kSrukf, kSrcdkf, kPf, kGmsppf, kSppf };

FilterKind parse_filter_kind(const std::string& name);
std::string filter_kind_name(FilterKind kind);

/// True for the Kalman family the improbability gate can wrap; the PF is the
/// one method that never runs gated.
bool filter_supports_gate(FilterKind kind);

struct FilterSetup {
  FilterKind kind = FilterKind::kEkf;
  bool gated = false;
};

/// Fully resolved benchmark plan.
struct BenchConfig {
  Config raw = Config::defaults();
  RobotParams robot;
  NoiseConfig noise;
  GateConfig gate;
  double dt = 1.0 / 30.0;
  std::vector<FilterSetup> filters;
  std::vector<int> trajectories;
  std::vector<std::uint64_t> seeds;
  std::vector<int> horizons;
  int jobs = 1;
  bool hold_last_input = false;
  std::string out_dir = "out";
  std::vector<std::string> formats;

  UtParams ut;
  CdParams cd;
  PfOptions pf;
  SppfOptions sppf;
  GmsppfOptions gmsppf;

  static BenchConfig from_config(const Config& cfg);
};

/// Filter instance for one benchmark run. The stream seeds any Monte Carlo
/// internals; Gaussian filters ignore it.
std::unique_ptr<TrackingFilter> make_filter(const BenchConfig& cfg, const FilterSetup& setup,
                                            std::shared_ptr<const StateModel> model,
                                            RandomStream stream);

/// Euclidean position RMSE between pose sequences of equal length.
double rmse_position(std::span<const Eigen::Vector3d> reference,
                     std::span<const Eigen::Vector3d> predicted);

/// Heading RMSE over wrapped angle differences.
double rmse_heading(std::span<const double> reference, std::span<const double> predicted);

/// Divides every entry by the minimum; the fastest entry becomes exactly 1.
std::vector<double> relative_time(const std::vector<double>& times);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<double> pos_rmse;      // one entry per horizon
  std::vector<double> heading_rmse;
  std::vector<double> wall_ms;       // per-cycle wall time, step + h-chain
  std::vector<double> max_pos_err;
  std::uint64_t resets = 0;
  std::uint64_t rejections = 0;
};

struct ReportCell {
  int filter_index = 0;
  int trajectory = 0;
  int horizon = 0;
  double pos_rmse = 0.0;
  double heading_rmse = 0.0;
  double wall_ms = 0.0;
  double tc_ratio = 0.0;
  std::uint64_t resets = 0;
  std::uint64_t rejections = 0;
  int seeds = 0;
};

struct BenchReport {
  BenchConfig cfg;
  /// runs[filter][trajectory][seed]
  std::vector<std::vector<std::vector<SeedOutcome>>> runs;
  std::vector<ReportCell> cells;
  std::vector<std::string> trajectory_names;
  int failed_runs = 0;
};

/// Executes the full sweep: every configured (filter, trajectory, seed)
/// triple, horizons scored per frame against the reference h frames later.
/// Per-run failures are recorded and excluded, never fatal.
BenchReport run_benchmark(const BenchConfig& cfg);

void write_report_csv(const BenchReport& report, const std::string& path);
void write_report_json(const BenchReport& report, const std::string& path);

struct ThresholdSweepRow {
  double threshold = 0.0;
  std::string filter;
  int trajectory = 0;
  int horizon = 0;
  double pos_rmse = 0.0;
  double heading_rmse = 0.0;
  double rejection_rate = 0.0;
};

/// Re-runs the gated subset of the configured filters across a list of gate
/// thresholds.
std::vector<ThresholdSweepRow> run_threshold_sweep(const BenchConfig& cfg,
                                                   const std::vector<double>& thresholds);
void write_threshold_sweep_csv(const std::vector<ThresholdSweepRow>& rows,
                               const std::string& path);

}  // namespace omnitrack
