/*
 * omnitrack — Bayesian state estimation and trajectory prediction for
 * omni-directional robots.
 *
 * C API of the shared library. All objects are opaque handles created and
 * destroyed through these functions; every call returns an ot_status and
 * writes results through out parameters. ot_last_error() describes the most
 * recent failure on the calling thread.
 */
#ifndef OMNITRACK_H
#define OMNITRACK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ot_status {
  OT_OK = 0,
  OT_ERR_INVALID_ARGUMENT = 1,
  OT_ERR_NOT_POSITIVE_DEFINITE = 2,
  OT_ERR_DIMENSION_MISMATCH = 3,
  OT_ERR_IO = 4,
  OT_ERR_RUNTIME = 5,
  /* The benchmark finished but some runs failed and were excluded. */
  OT_ERR_PARTIAL_FAILURE = 6,
} ot_status;

const char* ot_version(void);
const char* ot_status_name(ot_status status);
/* Message of the last error on this thread; empty string if none. */
const char* ot_last_error(void);

/* ------------------------------------------------------------------ */
/* Configuration: flat "key = value" text, dotted section keys.        */

typedef struct ot_config ot_config;

ot_status ot_config_create(ot_config** out);
ot_status ot_config_load(const char* path, ot_config** out);
ot_status ot_config_set(ot_config* cfg, const char* key, const char* value);
ot_status ot_config_get(const ot_config* cfg, const char* key, char* buffer, size_t capacity);
void ot_config_free(ot_config* cfg);

/* ------------------------------------------------------------------ */
/* Simulation: reference trajectories with seeded mixture noise.       */

typedef struct ot_sim_run ot_sim_run;

ot_status ot_sim_run_create(const ot_config* cfg, int trajectory_id, uint64_t seed,
                            ot_sim_run** out);
size_t ot_sim_run_length(const ot_sim_run* run);
/* state: [x_w, y_w, theta, vx_body, vy_body, omega] */
ot_status ot_sim_run_ideal_state(const ot_sim_run* run, size_t frame, double state[6]);
ot_status ot_sim_run_measurement(const ot_sim_run* run, size_t frame, double pose[3],
                                 int* outlier);
/* Motor voltages applied from `frame` to `frame + 1`. */
ot_status ot_sim_run_input(const ot_sim_run* run, size_t frame, double volts[3]);
ot_status ot_sim_run_write_csv(const ot_sim_run* run, const char* path);
void ot_sim_run_free(ot_sim_run* run);

/* ------------------------------------------------------------------ */
/* Filters over the robot model.                                       */

typedef struct ot_filter ot_filter;

/* name: ekf | dd1 | dd2 | ukf | cdkf | srukf | srcdkf | pf | gmsppf | sppf.
 * gated != 0 wraps the filter with the outlier gate (rejected for "pf").
 * rng_seed feeds the Monte Carlo filters; Gaussian filters ignore it. */
ot_status ot_filter_create(const ot_config* cfg, const char* name, int gated,
                           uint64_t rng_seed, ot_filter** out);
/* Bootstrap from a measured pose: zero velocities, P0 = Q * T^2. */
ot_status ot_filter_init(ot_filter* filter, const double pose[3]);
ot_status ot_filter_step(ot_filter* filter, const double volts[3], const double pose[3]);
ot_status ot_filter_estimate(const ot_filter* filter, double state[6]);
/* n prediction-only steps with the given voltage schedule (3 * n values). */
ot_status ot_filter_predict_pose(ot_filter* filter, const double* volts, size_t n,
                                 double pose[3]);
ot_status ot_filter_counters(const ot_filter* filter, uint64_t* resets, uint64_t* rejections);
void ot_filter_free(ot_filter* filter);

/* ------------------------------------------------------------------ */
/* Benchmark harness.                                                  */

/* Runs the configured sweep and writes report files (bench.csv / bench.json
 * per bench.formats) into out_dir. Returns OT_ERR_PARTIAL_FAILURE when some
 * runs were excluded. */
ot_status ot_bench_run(const ot_config* cfg, const char* out_dir);

/* Re-runs the gated filters across gate thresholds; writes one CSV. */
ot_status ot_threshold_sweep(const ot_config* cfg, const double* thresholds, size_t count,
                             const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* OMNITRACK_H */
