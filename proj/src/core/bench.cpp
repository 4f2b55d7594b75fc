#include "core/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

namespace omnitrack {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Stream tags for per-run filter randomness.
constexpr std::uint64_t kFilterStreamTag = 0xF117E5ULL;

std::uint64_t run_stream_seed(int trajectory, std::uint64_t seed, int filter_index) {
  return mix64(mix64(static_cast<std::uint64_t>(trajectory) + 1, seed),
               kFilterStreamTag + static_cast<std::uint64_t>(filter_index));
}

}  // namespace

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "ekf") return FilterKind::kEkf;
  if (name == "dd1") return FilterKind::kDd1;
  if (name == "dd2") return FilterKind::kDd2;
  if (name == "ukf") return FilterKind::kUkf;
  if (name == "cdkf") return FilterKind::kCdkf;
  if (name == "srukf") return FilterKind::kSrukf;
  if (name == "srcdkf") return FilterKind::kSrcdkf;
  if (name == "pf") return FilterKind::kPf;
  if (name == "gmsppf") return FilterKind::kGmsppf;
  if (name == "sppf") return FilterKind::kSppf;
  throw std::invalid_argument("unknown filter name: " + name);
}

std::string filter_kind_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::kEkf: return "ekf";
    case FilterKind::kDd1: return "dd1";
    case FilterKind::kDd2: return "dd2";
    case FilterKind::kUkf: return "ukf";
    case FilterKind::kCdkf: return "cdkf";
    case FilterKind::kSrukf: return "srukf";
    case FilterKind::kSrcdkf: return "srcdkf";
    case FilterKind::kPf: return "pf";
    case FilterKind::kGmsppf: return "gmsppf";
    case FilterKind::kSppf: return "sppf";
  }
  return "?";
}

bool filter_supports_gate(FilterKind kind) { return kind != FilterKind::kPf; }

BenchConfig BenchConfig::from_config(const Config& cfg) {
  BenchConfig b;
  b.raw = cfg;
  b.robot = cfg.robot_params();
  b.noise = cfg.noise_config();
  b.gate = cfg.gate_config();
  b.dt = cfg.frame_period();

  for (const std::string& name : cfg.get_string_list("bench.filters")) {
    const FilterKind kind = parse_filter_kind(name);
    b.filters.push_back({kind, false});
    if (filter_supports_gate(kind)) {
      b.filters.push_back({kind, true});
    }
  }
  b.trajectories = cfg.get_int_list("bench.trajectories");
  for (int id : b.trajectories) {
    if (id < 1 || id > kTrajectoryCount) {
      throw InvalidTrajectoryId("bench.trajectories: id out of range");
    }
  }
  const int seed_count = cfg.get_int("bench.seeds");
  const int seed_base = cfg.get_int("bench.seed_base");
  if (seed_count < 1) {
    throw std::invalid_argument("bench.seeds must be positive");
  }
  for (int i = 0; i < seed_count; ++i) {
    b.seeds.push_back(static_cast<std::uint64_t>(seed_base + i));
  }
  b.horizons = cfg.get_int_list("bench.horizons");
  if (b.horizons.empty()) {
    throw std::invalid_argument("bench.horizons must be nonempty");
  }
  for (int h : b.horizons) {
    if (h < 1) {
      throw std::invalid_argument("bench.horizons entries must be >= 1");
    }
  }
  b.jobs = std::max(1, cfg.get_int("bench.jobs"));
  b.hold_last_input = cfg.get_bool("bench.hold_last_input");
  b.out_dir = cfg.get("bench.out");
  b.formats = cfg.get_string_list("bench.formats");

  if (cfg.get("ut.kappa") != "auto") {
    b.ut.kappa = cfg.get_double("ut.kappa");
  }
  b.ut.alpha = cfg.get_double("ut.alpha");
  b.ut.beta = cfg.get_double("ut.beta");
  if (cfg.get("cd.step") != "auto") {
    b.cd.step = cfg.get_double("cd.step");
  }

  b.pf.particle_count = cfg.get_int("pf.particles");
  b.pf.ess_resampling = cfg.get("pf.resample") == "ess";
  b.pf.ess_fraction = cfg.get_double("pf.ess_fraction");

  b.sppf.particle_count = cfg.get_int("sppf.particles");
  b.sppf.proposal = cfg.get("sppf.proposal") == "srcdkf" ? SppfOptions::Proposal::kSrcdkf
                                                         : SppfOptions::Proposal::kSrukf;
  b.sppf.gate = b.gate;

  b.gmsppf.components = cfg.get_int("gmsppf.components");
  b.gmsppf.particle_count = cfg.get_int("gmsppf.particles");
  b.gmsppf.em_max_iters = cfg.get_int("gmsppf.em_iters");
  b.gmsppf.cov_floor = cfg.get_double("gmsppf.cov_floor");
  b.gmsppf.proposal = cfg.get("gmsppf.proposal") == "srukf" ? SppfOptions::Proposal::kSrukf
                                                            : SppfOptions::Proposal::kSrcdkf;
  b.gmsppf.gate = b.gate;
  return b;
}

std::unique_ptr<TrackingFilter> make_filter(const BenchConfig& cfg, const FilterSetup& setup,
                                            std::shared_ptr<const StateModel> model,
                                            RandomStream stream) {
  if (setup.gated && !filter_supports_gate(setup.kind)) {
    throw std::invalid_argument("the particle filter never runs behind the gate");
  }
  std::unique_ptr<GaussianFilterBase> gaussian;
  switch (setup.kind) {
    case FilterKind::kEkf:
      gaussian = std::make_unique<ExtendedKalmanFilter>(model);
      break;
    case FilterKind::kDd1:
      gaussian = std::make_unique<DividedDifferenceFilter>(model, 1, cfg.cd);
      break;
    case FilterKind::kDd2:
      gaussian = std::make_unique<DividedDifferenceFilter>(model, 2, cfg.cd);
      break;
    case FilterKind::kUkf:
      gaussian = std::make_unique<UnscentedKalmanFilter>(model, cfg.ut);
      break;
    case FilterKind::kCdkf:
      gaussian = std::make_unique<CentralDifferenceKalmanFilter>(model, cfg.cd);
      break;
    case FilterKind::kSrukf:
      gaussian = std::make_unique<SquareRootUnscentedKalmanFilter>(model, cfg.ut);
      break;
    case FilterKind::kSrcdkf:
      gaussian = std::make_unique<SquareRootCentralDifferenceKalmanFilter>(model, cfg.cd);
      break;
    case FilterKind::kPf:
      return std::make_unique<ParticleFilter>(model, cfg.pf, stream);
    case FilterKind::kGmsppf: {
      GmsppfOptions opts = cfg.gmsppf;
      opts.gated = setup.gated;
      return std::make_unique<GaussianMixtureSppf>(model, opts, stream);
    }
    case FilterKind::kSppf: {
      SppfOptions opts = cfg.sppf;
      opts.gated = setup.gated;
      return std::make_unique<SigmaPointParticleFilter>(model, opts, stream);
    }
  }
  if (setup.gated) {
    return std::make_unique<GatedFilter>(std::move(gaussian), cfg.gate);
  }
  return gaussian;
}

double rmse_position(std::span<const Eigen::Vector3d> reference,
                     std::span<const Eigen::Vector3d> predicted) {
  if (reference.size() != predicted.size()) {
    throw DimensionMismatch("rmse_position: length mismatch");
  }
  if (reference.empty()) {
    throw DimensionMismatch("rmse_position: empty sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double dx = reference[i](0) - predicted[i](0);
    const double dy = reference[i](1) - predicted[i](1);
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(reference.size()));
}

double rmse_heading(std::span<const double> reference, std::span<const double> predicted) {
  if (reference.size() != predicted.size()) {
    throw DimensionMismatch("rmse_heading: length mismatch");
  }
  if (reference.empty()) {
    throw DimensionMismatch("rmse_heading: empty sequences");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = wrap_angle(reference[i] - predicted[i]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(reference.size()));
}

std::vector<double> relative_time(const std::vector<double>& times) {
  std::vector<double> out(times.size(), 0.0);
  if (times.empty()) {
    return out;
  }
  double min = times.front();
  for (double t : times) {
    if (!(t > 0.0)) {
      throw std::invalid_argument("relative_time: all entries must be positive");
    }
    min = std::min(min, t);
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    out[i] = times[i] / min;
  }
  return out;
}

namespace {

SeedOutcome run_single(const BenchConfig& cfg, const FilterSetup& setup, int filter_index,
                       const ReferenceTrajectory& traj,
                       const std::shared_ptr<const StateModel>& model, std::uint64_t seed) {
  const std::size_t horizon_count = cfg.horizons.size();
  SeedOutcome out;
  out.seed = seed;
  out.pos_rmse.assign(horizon_count, 0.0);
  out.heading_rmse.assign(horizon_count, 0.0);
  out.wall_ms.assign(horizon_count, 0.0);
  out.max_pos_err.assign(horizon_count, 0.0);

  const SimRun run = simulate_run(traj, cfg.noise, seed);
  const std::size_t frames = run.ideal.size();

  // Generic-interface views of the schedule.
  std::vector<Eigen::VectorXd> inputs(run.inputs.size());
  for (std::size_t k = 0; k < run.inputs.size(); ++k) {
    inputs[k] = run.inputs[k];
  }
  std::vector<Eigen::VectorXd> hold(horizon_count == 0 ? 0 : *std::max_element(
                                        cfg.horizons.begin(), cfg.horizons.end()));

  auto filter = make_filter(cfg, setup, model,
                            RandomStream(run_stream_seed(traj.id, seed, filter_index)));

  // Bootstrap: measured pose, zero velocities. The per-step process noise
  // and the initial covariance are both Q T^2.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kStateDim);
  x0.head<3>() = run.measurements[0];
  const Eigen::MatrixXd step_q = cfg.noise.step_process_cov(cfg.dt);
  filter->init(x0, step_q, step_q, cfg.noise.meas_cov);

  std::vector<double> sq_sum(horizon_count, 0.0);
  std::vector<double> heading_sq_sum(horizon_count, 0.0);
  std::vector<std::size_t> counts(horizon_count, 0);
  std::vector<double> step_ms_total(1, 0.0);
  std::vector<double> chain_ms_total(horizon_count, 0.0);

  for (std::size_t k = 0; k < frames; ++k) {
    if (k > 0) {
      const auto t0 = Clock::now();
      filter->step(inputs[k - 1], run.measurements[k]);
      step_ms_total[0] += ms_since(t0);
    }
    for (std::size_t hi = 0; hi < horizon_count; ++hi) {
      const std::size_t h = static_cast<std::size_t>(cfg.horizons[hi]);
      if (k + h >= frames) {
        continue;
      }
      std::span<const Eigen::VectorXd> sched;
      if (cfg.hold_last_input) {
        const Eigen::VectorXd& last = inputs[k > 0 ? k - 1 : 0];
        for (std::size_t j = 0; j < h; ++j) {
          hold[j] = last;
        }
        sched = std::span<const Eigen::VectorXd>(hold.data(), h);
      } else {
        sched = std::span<const Eigen::VectorXd>(inputs.data() + k, h);
      }
      const auto t0 = Clock::now();
      const Eigen::Vector3d pose = filter->predict_pose_ahead(sched);
      chain_ms_total[hi] += ms_since(t0);

      const Eigen::VectorXd& ref = run.ideal[k + h];
      const double dx = ref(kWorldX) - pose(0);
      const double dy = ref(kWorldY) - pose(1);
      const double dth = wrap_angle(ref(kHeading) - pose(2));
      sq_sum[hi] += dx * dx + dy * dy;
      heading_sq_sum[hi] += dth * dth;
      out.max_pos_err[hi] = std::max(out.max_pos_err[hi], std::sqrt(dx * dx + dy * dy));
      ++counts[hi];
    }
  }

  for (std::size_t hi = 0; hi < horizon_count; ++hi) {
    if (counts[hi] == 0) {
      throw std::runtime_error("horizon longer than the run");
    }
    out.pos_rmse[hi] = std::sqrt(sq_sum[hi] / static_cast<double>(counts[hi]));
    out.heading_rmse[hi] = std::sqrt(heading_sq_sum[hi] / static_cast<double>(counts[hi]));
    out.wall_ms[hi] =
        (step_ms_total[0] + chain_ms_total[hi]) / static_cast<double>(frames);
  }
  out.resets = filter->reset_events();
  out.rejections = filter->rejected_measurements();
  return out;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& cfg) {
  BenchReport report;
  report.cfg = cfg;

  // Trajectories are shared read-only across runs.
  std::vector<ReferenceTrajectory> trajs;
  trajs.reserve(cfg.trajectories.size());
  for (int id : cfg.trajectories) {
    trajs.push_back(reference_trajectory(id, cfg.robot, cfg.dt));
    report.trajectory_names.push_back(trajs.back().name);
  }
  auto model = std::make_shared<RobotModel>(cfg.robot, cfg.dt);

  const std::size_t fcount = cfg.filters.size();
  const std::size_t tcount = cfg.trajectories.size();
  const std::size_t scount = cfg.seeds.size();
  report.runs.assign(fcount, std::vector<std::vector<SeedOutcome>>(
                                 tcount, std::vector<SeedOutcome>(scount)));

  struct WorkItem {
    std::size_t f, t, s;
  };
  std::vector<WorkItem> items;
  items.reserve(fcount * tcount * scount);
  for (std::size_t f = 0; f < fcount; ++f) {
    for (std::size_t t = 0; t < tcount; ++t) {
      for (std::size_t s = 0; s < scount; ++s) {
        items.push_back({f, t, s});
      }
    }
  }

  std::atomic<std::size_t> cursor{0};
  std::atomic<int> failures{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= items.size()) {
        return;
      }
      const WorkItem& item = items[i];
      SeedOutcome& slot = report.runs[item.f][item.t][item.s];
      try {
        slot = run_single(cfg, cfg.filters[item.f], static_cast<int>(item.f), trajs[item.t],
                          model, cfg.seeds[item.s]);
      } catch (const std::exception& e) {
        slot.seed = cfg.seeds[item.s];
        slot.failed = true;
        slot.error = e.what();
        failures.fetch_add(1);
        std::fprintf(stderr, "warning: run failed (filter=%s%s trajectory=%d seed=%llu): %s\n",
                     filter_kind_name(cfg.filters[item.f].kind).c_str(),
                     cfg.filters[item.f].gated ? "+if" : "", cfg.trajectories[item.t],
                     static_cast<unsigned long long>(cfg.seeds[item.s]), e.what());
      }
    }
  };

  const int extra = std::max(0, cfg.jobs - 1);
  std::vector<std::thread> pool;
  pool.reserve(extra);
  for (int i = 0; i < extra; ++i) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) {
    th.join();
  }
  report.failed_runs = failures.load();

  // Aggregate cells in deterministic (filter, trajectory, horizon) order.
  for (std::size_t f = 0; f < fcount; ++f) {
    for (std::size_t t = 0; t < tcount; ++t) {
      for (std::size_t hi = 0; hi < cfg.horizons.size(); ++hi) {
        ReportCell cell;
        cell.filter_index = static_cast<int>(f);
        cell.trajectory = cfg.trajectories[t];
        cell.horizon = cfg.horizons[hi];
        double pos = 0.0, heading = 0.0, wall = 0.0;
        for (const SeedOutcome& run : report.runs[f][t]) {
          if (run.failed) {
            continue;
          }
          pos += run.pos_rmse[hi];
          heading += run.heading_rmse[hi];
          wall += run.wall_ms[hi];
          cell.resets += run.resets;
          cell.rejections += run.rejections;
          ++cell.seeds;
        }
        if (cell.seeds > 0) {
          cell.pos_rmse = pos / cell.seeds;
          cell.heading_rmse = heading / cell.seeds;
          cell.wall_ms = wall / cell.seeds;
        }
        report.cells.push_back(cell);
      }
    }
  }

  // Global relative-time column: one entry is exactly 1 (the fastest cell).
  std::vector<double> times;
  std::vector<std::size_t> timed_cells;
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    if (report.cells[i].seeds > 0 && report.cells[i].wall_ms > 0.0) {
      times.push_back(report.cells[i].wall_ms);
      timed_cells.push_back(i);
    }
  }
  if (!times.empty()) {
    const std::vector<double> ratios = relative_time(times);
    for (std::size_t i = 0; i < timed_cells.size(); ++i) {
      report.cells[timed_cells[i]].tc_ratio = ratios[i];
    }
  }
  return report;
}

std::vector<ThresholdSweepRow> run_threshold_sweep(const BenchConfig& cfg,
                                                   const std::vector<double>& thresholds) {
  std::vector<ThresholdSweepRow> rows;
  for (double threshold : thresholds) {
    if (!(threshold > 0.0)) {
      throw std::invalid_argument("thresholds must be positive");
    }
    BenchConfig scan = cfg;
    scan.gate.threshold = threshold;
    scan.sppf.gate.threshold = threshold;
    scan.gmsppf.gate.threshold = threshold;
    scan.filters.clear();
    for (const FilterSetup& setup : cfg.filters) {
      if (setup.gated) {
        scan.filters.push_back(setup);
      }
    }
    if (scan.filters.empty()) {
      throw std::invalid_argument("threshold sweep needs at least one gated filter");
    }
    const BenchReport report = run_benchmark(scan);
    const double steps_per_run = static_cast<double>(kFramesPerRun - 1);
    for (const ReportCell& cell : report.cells) {
      ThresholdSweepRow row;
      row.threshold = threshold;
      row.filter = filter_kind_name(scan.filters[cell.filter_index].kind);
      row.trajectory = cell.trajectory;
      row.horizon = cell.horizon;
      row.pos_rmse = cell.pos_rmse;
      row.heading_rmse = cell.heading_rmse;
      row.rejection_rate =
          cell.seeds > 0
              ? static_cast<double>(cell.rejections) / (steps_per_run * cell.seeds)
              : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace omnitrack
