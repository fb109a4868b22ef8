// Copyright 2026 The hybridcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the hybridcal library.
 *
 * All objects are opaque handles created by *_load / *_create style calls and
 * released with the matching *_free. Every fallible call returns an
 * hc_status; on failure hc_last_error() returns a message for the calling
 * thread that stays valid until the next failing call on that thread.
 *
 * Units are SI throughout this interface: seconds, meters, radians. */
#ifndef HYBRIDCAL_HYBRIDCAL_H_
#define HYBRIDCAL_HYBRIDCAL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(HYBRIDCAL_BUILDING_LIBRARY)
#define HYBRIDCAL_API __declspec(dllexport)
#else
#define HYBRIDCAL_API __declspec(dllimport)
#endif
#else
#define HYBRIDCAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hc_status {
  HC_OK = 0,
  HC_ERR_INVALID_ARGUMENT = 1,
  HC_ERR_CONFIG = 2,          /* malformed or inconsistent input file/config */
  HC_ERR_IVE = 3,             /* initial value estimation failed */
  HC_ERR_JOINT = 4,           /* joint optimization failed or did not converge */
  HC_ERR_IO = 5,
  HC_ERR_NO_GROUND_TRUTH = 6,
  HC_ERR_OUT_OF_RANGE = 7,
  HC_ERR_INTERNAL = 8
} hc_status;

typedef struct hc_scenario_config hc_scenario_config;
typedef struct hc_bundle hc_bundle;
typedef struct hc_calibration hc_calibration;
typedef struct hc_grid hc_grid;
typedef struct hc_aggregate hc_aggregate;

typedef struct hc_metrics {
  double location_m;  /* RMS position error over arrays 2..N */
  double angle_rad;   /* mean orientation error over arrays 2..N */
  double offset_s;    /* RMS time-offset error over arrays 2..N */
  double drift;       /* RMS drift-rate error over all arrays */
} hc_metrics;

typedef struct hc_array_state {
  double position_m[3];
  double rotation_vector_rad[3];
  double time_offset_s;
  double drift;
} hc_array_state;

typedef struct hc_bundle_info {
  int n_arrays;
  int n_events;
  double speed_of_sound;
  int has_ground_truth;
  int has_noise;
  double sigma_tdoa_s;
  double sigma_doa_rad;
  double sigma_odo_m;
} hc_bundle_info;

typedef struct hc_calibrate_options {
  int use_weights; /* nonzero: use w_* below; zero: derive from noise metadata */
  double w_tdoa;
  double w_doa;
  double w_odo;
  int max_iters;   /* applies to both stages */
  double cost_tol;
  double step_tol;
  double lambda0;
  int starts;      /* random restarts of the first initializer stage */
  uint64_t seed;   /* seeds the initial array layouts */
} hc_calibrate_options;

typedef struct hc_calibration_summary {
  int n_arrays;
  int n_events;
  int stage1_iterations;
  int joint_iterations;
  int converged;
  int cost_regressed;
  double initial_cost; /* joint cost at the initializer output */
  double final_cost;
  double condition;
  int has_errors;
  hc_metrics ive_errors;
  hc_metrics final_errors;
} hc_calibration_summary;

typedef struct hc_cell {
  double sigma_tdoa_s;
  double sigma_doa_rad;
  char trajectory[16];
  int runs;
  int failures;
  hc_metrics ive;
  hc_metrics final;
} hc_cell;

HYBRIDCAL_API const char* hc_version(void);
HYBRIDCAL_API const char* hc_last_error(void);
HYBRIDCAL_API const char* hc_status_string(hc_status status);

/* Scenario configuration. */
HYBRIDCAL_API hc_status hc_scenario_config_load(const char* path, hc_scenario_config** out);
HYBRIDCAL_API hc_status hc_scenario_config_preset(const char* trajectory, hc_scenario_config** out);
HYBRIDCAL_API hc_status hc_scenario_config_save(const hc_scenario_config* cfg, const char* path);
HYBRIDCAL_API hc_status hc_scenario_config_set_seed(hc_scenario_config* cfg, uint64_t seed);
HYBRIDCAL_API hc_status hc_scenario_config_set_noise(hc_scenario_config* cfg, double sigma_tdoa_s,
                                                     double sigma_doa_rad, double sigma_odo_m);
HYBRIDCAL_API hc_status hc_scenario_config_set_n_arrays(hc_scenario_config* cfg, int n_arrays);
HYBRIDCAL_API hc_status hc_scenario_config_set_speed_of_sound(hc_scenario_config* cfg, double c);
HYBRIDCAL_API void hc_scenario_config_free(hc_scenario_config* cfg);

/* Measurement bundles. hc_simulate embeds ground truth and noise metadata. */
HYBRIDCAL_API hc_status hc_simulate(const hc_scenario_config* cfg, hc_bundle** out);
HYBRIDCAL_API hc_status hc_bundle_load(const char* path, hc_bundle** out);
HYBRIDCAL_API hc_status hc_bundle_save(const hc_bundle* bundle, const char* path);
HYBRIDCAL_API hc_status hc_bundle_get_info(const hc_bundle* bundle, hc_bundle_info* out);
HYBRIDCAL_API hc_status hc_bundle_set_speed_of_sound(hc_bundle* bundle, double c);
/* Infinity norm of the joint residual at the embedded ground truth. */
HYBRIDCAL_API hc_status hc_bundle_truth_residual(const hc_bundle* bundle, double* inf_norm);
HYBRIDCAL_API void hc_bundle_free(hc_bundle* bundle);

/* Calibration. */
HYBRIDCAL_API void hc_calibrate_options_default(hc_calibrate_options* options);
/* Returns HC_ERR_IVE / HC_ERR_JOINT on stage failure. When the joint solve
 * finishes without converging the result is still produced and the call
 * returns HC_ERR_JOINT; callers own *out whenever it is non-null. */
HYBRIDCAL_API hc_status hc_calibrate(const hc_bundle* bundle, const hc_calibrate_options* options,
                                     hc_calibration** out);
HYBRIDCAL_API hc_status hc_calibration_load(const char* path, hc_calibration** out);
HYBRIDCAL_API hc_status hc_calibration_save(const hc_calibration* cal, const char* path);
HYBRIDCAL_API hc_status hc_calibration_get_summary(const hc_calibration* cal,
                                                   hc_calibration_summary* out);
HYBRIDCAL_API hc_status hc_calibration_get_array(const hc_calibration* cal, int index,
                                                 hc_array_state* out);
HYBRIDCAL_API hc_status hc_calibration_get_source(const hc_calibration* cal, int index,
                                                  double position_m[3]);
HYBRIDCAL_API void hc_calibration_free(hc_calibration* cal);

/* Monte Carlo. */
HYBRIDCAL_API hc_status hc_grid_load(const char* path, hc_grid** out);
HYBRIDCAL_API hc_status hc_grid_default(hc_grid** out);
HYBRIDCAL_API hc_status hc_grid_set_seed(hc_grid* grid, uint64_t base_seed);
HYBRIDCAL_API hc_status hc_grid_set_combine(hc_grid* grid, int combine);
HYBRIDCAL_API hc_status hc_grid_set_runs_per_cell(hc_grid* grid, int runs);
HYBRIDCAL_API hc_status hc_grid_set_max_iters(hc_grid* grid, int max_iters);
HYBRIDCAL_API hc_status hc_grid_set_weights(hc_grid* grid, double w_tdoa, double w_doa, double w_odo);
HYBRIDCAL_API hc_status hc_grid_set_speed_of_sound(hc_grid* grid, double c);
HYBRIDCAL_API hc_status hc_grid_set_threads(hc_grid* grid, int threads);
HYBRIDCAL_API void hc_grid_free(hc_grid* grid);

HYBRIDCAL_API hc_status hc_montecarlo(const hc_grid* grid, hc_aggregate** out);
HYBRIDCAL_API hc_status hc_aggregate_load(const char* path, hc_aggregate** out);
/* Writes aggregate.json, summary.csv and summary.txt into `directory`
 * (created if missing). */
HYBRIDCAL_API hc_status hc_aggregate_save(const hc_aggregate* agg, const char* directory);
HYBRIDCAL_API hc_status hc_aggregate_cell_count(const hc_aggregate* agg, size_t* count);
HYBRIDCAL_API hc_status hc_aggregate_get_cell(const hc_aggregate* agg, size_t index, hc_cell* out);
HYBRIDCAL_API void hc_aggregate_free(hc_aggregate* agg);

/* Text rendering. Writes at most `capacity` bytes including the terminating
 * NUL and stores the full required size (including NUL) in *needed. */
HYBRIDCAL_API hc_status hc_report_format(const char* path, char* buffer, size_t capacity,
                                         size_t* needed);
HYBRIDCAL_API hc_status hc_report_write_csv(const char* aggregate_path, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* HYBRIDCAL_HYBRIDCAL_H_ */
