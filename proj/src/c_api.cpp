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

#include "hybridcal/hybridcal.h"

#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "hybridcal/error.hpp"
#include "hybridcal/io.hpp"
#include "hybridcal/pipeline.hpp"

struct hc_scenario_config {
  hybridcal::ScenarioConfig value;
};
struct hc_bundle {
  hybridcal::io::BundleFile value;
};
struct hc_calibration {
  hybridcal::io::CalibrationFile value;
};
struct hc_grid {
  hybridcal::MonteCarloGrid value;
};
struct hc_aggregate {
  hybridcal::AggregateReport value;
};

namespace {

using namespace hybridcal;

thread_local std::string g_last_error;

hc_status fail(hc_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

hc_status from_exception() {
  try {
    throw;
  } catch (const StageError& e) {
    return fail(e.stage() == Stage::kInitialEstimate ? HC_ERR_IVE : HC_ERR_JOINT, e.what());
  } catch (const ConfigError& e) {
    return fail(HC_ERR_CONFIG, e.what());
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kIo: return fail(HC_ERR_IO, e.what());
      case ErrorCode::kConfig: return fail(HC_ERR_CONFIG, e.what());
      default: return fail(HC_ERR_INVALID_ARGUMENT, e.what());
    }
  } catch (const std::bad_alloc&) {
    return fail(HC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HC_ERR_INTERNAL, "unknown error");
  }
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
hc_status guarded(F&& body) {
  try {
    return body();
  } catch (...) {
    return from_exception();
  }
}

#define HC_REQUIRE(cond, what) \
  if (!(cond)) return fail(HC_ERR_INVALID_ARGUMENT, what)

hc_metrics to_c(const ErrorMetrics& m) { return {m.location, m.angle, m.offset, m.drift}; }

// Parsing failures of any kind inside a load call are configuration errors.
template <typename T, typename Parse>
hc_status load_into(const char* path, T** out, Parse&& parse) {
  HC_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    const std::string text = io::read_file(path);
    try {
      *out = new T{parse(text)};
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("", e.what());
    }
    return HC_OK;
  });
}

}  // namespace

extern "C" {

const char* hc_version(void) { return "0.1.0"; }

const char* hc_last_error(void) { return g_last_error.c_str(); }

const char* hc_status_string(hc_status status) {
  switch (status) {
    case HC_OK: return "ok";
    case HC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HC_ERR_CONFIG: return "configuration error";
    case HC_ERR_IVE: return "initial value estimation failed";
    case HC_ERR_JOINT: return "joint optimization failed";
    case HC_ERR_IO: return "i/o error";
    case HC_ERR_NO_GROUND_TRUTH: return "no ground truth";
    case HC_ERR_OUT_OF_RANGE: return "index out of range";
    case HC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- scenario config ---------------------------------------------------------------

hc_status hc_scenario_config_load(const char* path, hc_scenario_config** out) {
  return load_into(path, out, io::parse_scenario_config);
}

hc_status hc_scenario_config_preset(const char* trajectory, hc_scenario_config** out) {
  HC_REQUIRE(trajectory && out, "null argument");
  *out = nullptr;
  const auto id = parse_trajectory(trajectory);
  if (!id) return fail(HC_ERR_CONFIG, std::string("unknown trajectory \"") + trajectory + "\"");
  return guarded([&] {
    *out = new hc_scenario_config{ScenarioConfig::preset(*id)};
    return HC_OK;
  });
}

hc_status hc_scenario_config_save(const hc_scenario_config* cfg, const char* path) {
  HC_REQUIRE(cfg && path, "null argument");
  return guarded([&] {
    io::write_file(path, io::dump_scenario_config(cfg->value));
    return HC_OK;
  });
}

hc_status hc_scenario_config_set_seed(hc_scenario_config* cfg, uint64_t seed) {
  HC_REQUIRE(cfg, "null argument");
  cfg->value.seed = seed;
  return HC_OK;
}

hc_status hc_scenario_config_set_noise(hc_scenario_config* cfg, double sigma_tdoa_s,
                                       double sigma_doa_rad, double sigma_odo_m) {
  HC_REQUIRE(cfg, "null argument");
  HC_REQUIRE(sigma_tdoa_s >= 0.0 && sigma_doa_rad >= 0.0 && sigma_odo_m >= 0.0,
             "noise levels must be nonnegative");
  cfg->value.noise = {sigma_tdoa_s, sigma_doa_rad, sigma_odo_m};
  return HC_OK;
}

hc_status hc_scenario_config_set_n_arrays(hc_scenario_config* cfg, int n_arrays) {
  HC_REQUIRE(cfg, "null argument");
  HC_REQUIRE(n_arrays >= 2, "n_arrays must be at least 2");
  cfg->value.n_arrays = n_arrays;
  return HC_OK;
}

hc_status hc_scenario_config_set_speed_of_sound(hc_scenario_config* cfg, double c) {
  HC_REQUIRE(cfg, "null argument");
  HC_REQUIRE(c > 0.0, "speed of sound must be positive");
  cfg->value.speed_of_sound = c;
  return HC_OK;
}

void hc_scenario_config_free(hc_scenario_config* cfg) { delete cfg; }

// ---- bundles ---------------------------------------------------------------------

hc_status hc_simulate(const hc_scenario_config* cfg, hc_bundle** out) {
  HC_REQUIRE(cfg && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    GroundTruth gt;
    try {
      gt = generate_scenario(cfg->value);
    } catch (const Error& e) {
      throw ConfigError("", e.what());
    }
    io::BundleFile file;
    file.meas = synthesize_measurements(gt, cfg->value);
    file.noise = cfg->value.noise;
    file.workspace = gt.workspace;
    file.truth = std::move(gt);
    *out = new hc_bundle{std::move(file)};
    return HC_OK;
  });
}

hc_status hc_bundle_load(const char* path, hc_bundle** out) {
  return load_into(path, out, io::parse_bundle);
}

hc_status hc_bundle_save(const hc_bundle* bundle, const char* path) {
  HC_REQUIRE(bundle && path, "null argument");
  return guarded([&] {
    io::write_file(path, io::dump_bundle(bundle->value));
    return HC_OK;
  });
}

hc_status hc_bundle_get_info(const hc_bundle* bundle, hc_bundle_info* out) {
  HC_REQUIRE(bundle && out, "null argument");
  const io::BundleFile& b = bundle->value;
  *out = hc_bundle_info{};
  out->n_arrays = b.meas.n_arrays;
  out->n_events = b.meas.n_events;
  out->speed_of_sound = b.meas.speed_of_sound;
  out->has_ground_truth = b.truth.has_value();
  out->has_noise = b.noise.has_value();
  if (b.noise) {
    out->sigma_tdoa_s = b.noise->tdoa;
    out->sigma_doa_rad = b.noise->doa;
    out->sigma_odo_m = b.noise->odo;
  }
  return HC_OK;
}

hc_status hc_bundle_set_speed_of_sound(hc_bundle* bundle, double c) {
  HC_REQUIRE(bundle, "null argument");
  HC_REQUIRE(c > 0.0, "speed of sound must be positive");
  bundle->value.meas.speed_of_sound = c;
  return HC_OK;
}

hc_status hc_bundle_truth_residual(const hc_bundle* bundle, double* inf_norm) {
  HC_REQUIRE(bundle && inf_norm, "null argument");
  if (!bundle->value.truth) return fail(HC_ERR_NO_GROUND_TRUTH, "bundle has no ground truth");
  return guarded([&] {
    const Eigen::VectorXd r = residual(bundle->value.truth->parameters(), bundle->value.meas);
    *inf_norm = r.lpNorm<Eigen::Infinity>();
    return HC_OK;
  });
}

void hc_bundle_free(hc_bundle* bundle) { delete bundle; }

// ---- calibration -------------------------------------------------------------------

void hc_calibrate_options_default(hc_calibrate_options* options) {
  if (!options) return;
  const CalibrationConfig defaults;
  const WeightSpec w;
  *options = hc_calibrate_options{};
  options->use_weights = 0;
  options->w_tdoa = w.tdoa;
  options->w_doa = w.doa;
  options->w_odo = w.odo;
  options->max_iters = defaults.joint.max_iters;
  options->cost_tol = defaults.joint.cost_tol;
  options->step_tol = defaults.joint.step_tol;
  options->lambda0 = defaults.joint.lambda0;
  options->starts = defaults.ive.starts;
  options->seed = defaults.ive.seed;
}

hc_status hc_calibrate(const hc_bundle* bundle, const hc_calibrate_options* options,
                       hc_calibration** out) {
  HC_REQUIRE(bundle && out, "null argument");
  *out = nullptr;
  hc_calibrate_options opts;
  hc_calibrate_options_default(&opts);
  if (options) opts = *options;
  HC_REQUIRE(opts.max_iters >= 1, "max_iters must be at least 1");
  HC_REQUIRE(opts.starts >= 1, "starts must be at least 1");
  HC_REQUIRE(opts.cost_tol >= 0.0 && opts.step_tol >= 0.0 && opts.lambda0 >= 0.0,
             "tolerances must be nonnegative");

  return guarded([&] {
    const io::BundleFile& b = bundle->value;
    CalibrationConfig cfg;
    if (opts.use_weights) {
      cfg.weights = WeightSpec{opts.w_tdoa, opts.w_doa, opts.w_odo};
      try {
        cfg.weights->validate();
      } catch (const Error& e) {
        throw ConfigError("weights", e.what());
      }
    }
    SolverOptions solver;
    solver.max_iters = opts.max_iters;
    solver.cost_tol = opts.cost_tol;
    solver.step_tol = opts.step_tol;
    solver.lambda0 = opts.lambda0;
    cfg.joint = solver;
    cfg.ive.solver = solver;
    cfg.ive.starts = opts.starts;
    cfg.ive.seed = opts.seed;
    cfg.ive.workspace = b.workspace;

    RunReport rep = calibrate(b.meas, cfg, b.noise, b.truth ? &*b.truth : nullptr);
    const bool ok = rep.joint.converged && !rep.cost_regressed;
    *out = new hc_calibration{io::CalibrationFile{cfg, std::move(rep)}};
    if (!ok) {
      return fail(HC_ERR_JOINT, (*out)->value.report.cost_regressed
                                    ? "joint cost ended above the initial cost"
                                    : "joint optimization did not converge");
    }
    return HC_OK;
  });
}

hc_status hc_calibration_load(const char* path, hc_calibration** out) {
  return load_into(path, out, io::parse_calibration);
}

hc_status hc_calibration_save(const hc_calibration* cal, const char* path) {
  HC_REQUIRE(cal && path, "null argument");
  return guarded([&] {
    io::write_file(path, io::dump_calibration(cal->value));
    return HC_OK;
  });
}

hc_status hc_calibration_get_summary(const hc_calibration* cal, hc_calibration_summary* out) {
  HC_REQUIRE(cal && out, "null argument");
  const RunReport& r = cal->value.report;
  *out = hc_calibration_summary{};
  out->n_arrays = r.estimate.n_arrays();
  out->n_events = r.estimate.n_events();
  out->stage1_iterations = r.stage1.iterations;
  out->joint_iterations = r.joint.iterations;
  out->converged = r.joint.converged;
  out->cost_regressed = r.cost_regressed;
  out->initial_cost = r.joint.initial_cost;
  out->final_cost = r.joint.final_cost;
  out->condition = r.joint.condition;
  out->has_errors = r.ive_errors.has_value() && r.final_errors.has_value();
  if (out->has_errors) {
    out->ive_errors = to_c(*r.ive_errors);
    out->final_errors = to_c(*r.final_errors);
  }
  return HC_OK;
}

hc_status hc_calibration_get_array(const hc_calibration* cal, int index, hc_array_state* out) {
  HC_REQUIRE(cal && out, "null argument");
  const ParameterVector& p = cal->value.report.estimate;
  if (index < 0 || index >= p.n_arrays()) return fail(HC_ERR_OUT_OF_RANGE, "array index out of range");
  const ArrayState a = p.array(index);
  for (int k = 0; k < 3; ++k) {
    out->position_m[k] = a.position[k];
    out->rotation_vector_rad[k] = a.orientation.vector()[k];
  }
  out->time_offset_s = a.time_offset;
  out->drift = a.drift;
  return HC_OK;
}

hc_status hc_calibration_get_source(const hc_calibration* cal, int index, double position_m[3]) {
  HC_REQUIRE(cal && position_m, "null argument");
  const ParameterVector& p = cal->value.report.estimate;
  if (index < 0 || index >= p.n_events()) return fail(HC_ERR_OUT_OF_RANGE, "event index out of range");
  const Vec3 s = p.source(index);
  for (int k = 0; k < 3; ++k) position_m[k] = s[k];
  return HC_OK;
}

void hc_calibration_free(hc_calibration* cal) { delete cal; }

// ---- Monte Carlo -------------------------------------------------------------------

hc_status hc_grid_load(const char* path, hc_grid** out) {
  return load_into(path, out, io::parse_grid);
}

hc_status hc_grid_default(hc_grid** out) {
  HC_REQUIRE(out, "null argument");
  return guarded([&] {
    *out = new hc_grid{MonteCarloGrid::standard_sweep()};
    return HC_OK;
  });
}

hc_status hc_grid_set_seed(hc_grid* grid, uint64_t base_seed) {
  HC_REQUIRE(grid, "null argument");
  grid->value.base_seed = base_seed;
  return HC_OK;
}

hc_status hc_grid_set_combine(hc_grid* grid, int combine) {
  HC_REQUIRE(grid, "null argument");
  grid->value.combine_trajectories = combine != 0;
  return HC_OK;
}

hc_status hc_grid_set_runs_per_cell(hc_grid* grid, int runs) {
  HC_REQUIRE(grid, "null argument");
  HC_REQUIRE(runs >= 4, "runs_per_cell must be at least 4");
  grid->value.runs_per_cell = runs;
  return HC_OK;
}

hc_status hc_grid_set_max_iters(hc_grid* grid, int max_iters) {
  HC_REQUIRE(grid, "null argument");
  HC_REQUIRE(max_iters >= 1, "max_iters must be at least 1");
  grid->value.calibration.joint.max_iters = max_iters;
  grid->value.calibration.ive.solver.max_iters = max_iters;
  return HC_OK;
}

hc_status hc_grid_set_weights(hc_grid* grid, double w_tdoa, double w_doa, double w_odo) {
  HC_REQUIRE(grid, "null argument");
  return guarded([&] {
    WeightSpec w{w_tdoa, w_doa, w_odo};
    w.validate();
    grid->value.calibration.weights = w;
    return HC_OK;
  });
}

hc_status hc_grid_set_speed_of_sound(hc_grid* grid, double c) {
  HC_REQUIRE(grid, "null argument");
  HC_REQUIRE(c > 0.0, "speed of sound must be positive");
  grid->value.speed_of_sound = c;
  return HC_OK;
}

hc_status hc_grid_set_threads(hc_grid* grid, int threads) {
  HC_REQUIRE(grid, "null argument");
  HC_REQUIRE(threads >= 0, "threads must be nonnegative");
  grid->value.threads = static_cast<unsigned>(threads);
  return HC_OK;
}

void hc_grid_free(hc_grid* grid) { delete grid; }

hc_status hc_montecarlo(const hc_grid* grid, hc_aggregate** out) {
  HC_REQUIRE(grid && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    try {
      grid->value.validate();
    } catch (const Error& e) {
      throw ConfigError("", e.what());
    }
    *out = new hc_aggregate{monte_carlo(grid->value)};
    return HC_OK;
  });
}

hc_status hc_aggregate_load(const char* path, hc_aggregate** out) {
  return load_into(path, out, io::parse_aggregate);
}

hc_status hc_aggregate_save(const hc_aggregate* agg, const char* directory) {
  HC_REQUIRE(agg && directory, "null argument");
  return guarded([&] {
    const std::filesystem::path dir(directory);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
    io::write_file(dir / "aggregate.json", io::dump_aggregate(agg->value));
    io::write_file(dir / "summary.csv", io::aggregate_csv(agg->value));
    io::write_file(dir / "summary.txt", io::format_aggregate(agg->value));
    return HC_OK;
  });
}

hc_status hc_aggregate_cell_count(const hc_aggregate* agg, size_t* count) {
  HC_REQUIRE(agg && count, "null argument");
  *count = agg->value.cells.size();
  return HC_OK;
}

hc_status hc_aggregate_get_cell(const hc_aggregate* agg, size_t index, hc_cell* out) {
  HC_REQUIRE(agg && out, "null argument");
  if (index >= agg->value.cells.size()) return fail(HC_ERR_OUT_OF_RANGE, "cell index out of range");
  const CellAggregate& c = agg->value.cells[index];
  *out = hc_cell{};
  out->sigma_tdoa_s = c.sigma_tdoa;
  out->sigma_doa_rad = c.sigma_doa;
  std::strncpy(out->trajectory, c.trajectory.c_str(), sizeof(out->trajectory) - 1);
  out->runs = c.runs;
  out->failures = c.failures;
  out->ive = to_c(c.ive);
  out->final = to_c(c.final);
  return HC_OK;
}

void hc_aggregate_free(hc_aggregate* agg) { delete agg; }

// ---- text ----------------------------------------------------------------------------

hc_status hc_report_format(const char* path, char* buffer, size_t capacity, size_t* needed) {
  HC_REQUIRE(path && needed, "null argument");
  HC_REQUIRE(buffer || capacity == 0, "null buffer with nonzero capacity");
  return guarded([&] {
    const std::string text = io::read_file(path);
    const std::string kind = io::document_kind(text);
    std::string rendered;
    if (kind == "aggregate_report") {
      rendered = io::format_aggregate(io::parse_aggregate(text));
    } else if (kind == "calibration_report") {
      rendered = io::format_calibration(io::parse_calibration(text));
    } else {
      throw ConfigError("/kind", "expected an aggregate or calibration report");
    }
    *needed = rendered.size() + 1;
    if (capacity > 0) {
      const size_t n = std::min(capacity - 1, rendered.size());
      std::memcpy(buffer, rendered.data(), n);
      buffer[n] = '\0';
    }
    return HC_OK;
  });
}

hc_status hc_report_write_csv(const char* aggregate_path, const char* csv_path) {
  HC_REQUIRE(aggregate_path && csv_path, "null argument");
  return guarded([&] {
    const AggregateReport rep = io::parse_aggregate(io::read_file(aggregate_path));
    io::write_file(csv_path, io::aggregate_csv(rep));
    return HC_OK;
  });
}

}  // extern "C"
