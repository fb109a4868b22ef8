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

// Command-line front end over the hybridcal C API.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridcal/hybridcal.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIve = 3;
constexpr int kExitJoint = 4;

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegPerRad = 180.0 / kPi;

int exit_code(hc_status status) {
  switch (status) {
    case HC_OK: return kExitOk;
    case HC_ERR_INVALID_ARGUMENT:
    case HC_ERR_CONFIG:
    case HC_ERR_IO: return kExitConfig;
    case HC_ERR_IVE: return kExitIve;
    case HC_ERR_JOINT: return kExitJoint;
    default: return kExitFailure;
  }
}

int report_error(hc_status status) {
  std::fflush(stdout);
  const char* detail = hc_last_error();
  std::fprintf(stderr, "hybridcal: %s\n", *detail ? detail : hc_status_string(status));
  return exit_code(status);
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};

using ConfigHandle = Handle<hc_scenario_config, hc_scenario_config_free>;
using BundleHandle = Handle<hc_bundle, hc_bundle_free>;
using CalibrationHandle = Handle<hc_calibration, hc_calibration_free>;
using GridHandle = Handle<hc_grid, hc_grid_free>;
using AggregateHandle = Handle<hc_aggregate, hc_aggregate_free>;

struct CommonFlags {
  std::optional<uint64_t> seed;
  std::vector<double> weights;
  std::optional<double> c;
  std::optional<int> max_iters;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool solver_flags) {
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--c", f.c, "speed of sound in m/s")->check(CLI::PositiveNumber);
  if (!solver_flags) return;
  cmd->add_option("--weights", f.weights, "residual weights w_tdoa,w_doa,w_odo")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--max-iters", f.max_iters, "iteration cap for each solver stage")
      ->check(CLI::PositiveNumber);
}

void print_metrics(const char* label, const hc_metrics& m) {
  std::printf("  %-8s location %.4f cm  angle %.4f deg  offset %.4f x1e-4 s  drift %.4f us\n",
              label, m.location_m * 1e2, m.angle_rad * kDegPerRad, m.offset_s * 1e4,
              m.drift * 1e6);
}

int cmd_simulate(const std::string& config_path, const std::string& trajectory,
                 const std::string& out_path, const CommonFlags& f) {
  ConfigHandle cfg;
  hc_status st = config_path.empty() ? hc_scenario_config_preset(trajectory.c_str(), &cfg.ptr)
                                     : hc_scenario_config_load(config_path.c_str(), &cfg.ptr);
  if (st != HC_OK) return report_error(st);
  if (f.seed && (st = hc_scenario_config_set_seed(cfg.ptr, *f.seed)) != HC_OK) {
    return report_error(st);
  }
  if (f.c && (st = hc_scenario_config_set_speed_of_sound(cfg.ptr, *f.c)) != HC_OK) {
    return report_error(st);
  }

  BundleHandle bundle;
  if ((st = hc_simulate(cfg.ptr, &bundle.ptr)) != HC_OK) return report_error(st);
  if ((st = hc_bundle_save(bundle.ptr, out_path.c_str())) != HC_OK) return report_error(st);

  hc_bundle_info info;
  hc_bundle_get_info(bundle.ptr, &info);
  std::printf("N = %d arrays, K = %d events, c = %g m/s\n", info.n_arrays, info.n_events,
              info.speed_of_sound);
  std::printf("noise: tdoa %g ms, doa %g deg, odometry %g m\n", info.sigma_tdoa_s * 1e3,
              info.sigma_doa_rad * kDegPerRad, info.sigma_odo_m);
  std::printf("wrote %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_calibrate(const std::string& bundle_path, const std::string& out_path,
                  const CommonFlags& f) {
  BundleHandle bundle;
  hc_status st = hc_bundle_load(bundle_path.c_str(), &bundle.ptr);
  if (st != HC_OK) return report_error(st);
  if (f.c && (st = hc_bundle_set_speed_of_sound(bundle.ptr, *f.c)) != HC_OK) {
    return report_error(st);
  }

  hc_calibrate_options opts;
  hc_calibrate_options_default(&opts);
  if (!f.weights.empty()) {
    opts.use_weights = 1;
    opts.w_tdoa = f.weights[0];
    opts.w_doa = f.weights[1];
    opts.w_odo = f.weights[2];
  }
  if (f.max_iters) opts.max_iters = *f.max_iters;
  if (f.seed) opts.seed = *f.seed;

  CalibrationHandle cal;
  const hc_status solve_status = hc_calibrate(bundle.ptr, &opts, &cal.ptr);
  if (!cal.ptr) return report_error(solve_status);
  if ((st = hc_calibration_save(cal.ptr, out_path.c_str())) != HC_OK) return report_error(st);

  hc_calibration_summary s;
  hc_calibration_get_summary(cal.ptr, &s);
  std::printf("N = %d arrays, K = %d events\n", s.n_arrays, s.n_events);
  std::printf("initial estimate: %d iterations; joint: %d iterations, cost %.6g -> %.6g\n",
              s.stage1_iterations, s.joint_iterations, s.initial_cost, s.final_cost);
  if (s.has_errors) {
    std::printf("errors against ground truth:\n");
    print_metrics("ive", s.ive_errors);
    print_metrics("final", s.final_errors);
  }
  std::printf("wrote %s\n", out_path.c_str());
  if (solve_status != HC_OK) return report_error(solve_status);
  return kExitOk;
}

int cmd_montecarlo(const std::string& grid_path, const std::string& out_dir,
                   const CommonFlags& f, std::optional<bool> combine, std::optional<int> runs,
                   std::optional<int> threads) {
  GridHandle grid;
  hc_status st = grid_path.empty() ? hc_grid_default(&grid.ptr)
                                   : hc_grid_load(grid_path.c_str(), &grid.ptr);
  if (st != HC_OK) return report_error(st);
  if (f.seed) st = hc_grid_set_seed(grid.ptr, *f.seed);
  if (st == HC_OK && combine) st = hc_grid_set_combine(grid.ptr, *combine ? 1 : 0);
  if (st == HC_OK && runs) st = hc_grid_set_runs_per_cell(grid.ptr, *runs);
  if (st == HC_OK && threads) st = hc_grid_set_threads(grid.ptr, *threads);
  if (st == HC_OK && f.max_iters) st = hc_grid_set_max_iters(grid.ptr, *f.max_iters);
  if (st == HC_OK && f.c) st = hc_grid_set_speed_of_sound(grid.ptr, *f.c);
  if (st == HC_OK && !f.weights.empty()) {
    st = hc_grid_set_weights(grid.ptr, f.weights[0], f.weights[1], f.weights[2]);
  }
  if (st != HC_OK) return report_error(st == HC_ERR_INVALID_ARGUMENT ? HC_ERR_CONFIG : st);

  AggregateHandle agg;
  if ((st = hc_montecarlo(grid.ptr, &agg.ptr)) != HC_OK) return report_error(st);
  if ((st = hc_aggregate_save(agg.ptr, out_dir.c_str())) != HC_OK) return report_error(st);

  size_t n = 0;
  hc_aggregate_cell_count(agg.ptr, &n);
  int failures = 0;
  for (size_t i = 0; i < n; ++i) {
    hc_cell cell;
    hc_aggregate_get_cell(agg.ptr, i, &cell);
    failures += cell.failures;
  }
  std::printf("%zu cells, %d failed runs excluded\n", n, failures);
  std::printf("wrote %s/{aggregate.json,summary.csv,summary.txt}\n", out_dir.c_str());
  return kExitOk;
}

int cmd_report(const std::string& in_path, const std::string& csv_path) {
  size_t needed = 0;
  hc_status st = hc_report_format(in_path.c_str(), nullptr, 0, &needed);
  if (st != HC_OK) return report_error(st);
  std::string text(needed, '\0');
  if ((st = hc_report_format(in_path.c_str(), text.data(), text.size(), &needed)) != HC_OK) {
    return report_error(st);
  }
  std::fputs(text.c_str(), stdout);
  if (!csv_path.empty()) {
    if ((st = hc_report_write_csv(in_path.c_str(), csv_path.c_str())) != HC_OK) {
      return report_error(st);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint calibration of distributed microphone arrays."};
  app.set_version_flag("--version", std::string(hc_version()));
  app.require_subcommand(1);

  CommonFlags sim_flags, cal_flags, mc_flags;

  std::string sim_config, sim_trajectory = "traj1", sim_out;
  CLI::App* sim = app.add_subcommand("simulate", "synthesize a measurement bundle");
  auto* sim_cfg = sim->add_option("--config", sim_config, "scenario config file");
  sim->add_option("--trajectory", sim_trajectory, "preset when no config is given")
      ->excludes(sim_cfg);
  sim->add_option("--out", sim_out, "bundle output path")->required();
  add_common(sim, sim_flags, false);

  std::string cal_bundle, cal_out;
  CLI::App* cal = app.add_subcommand("calibrate", "estimate array states from a bundle");
  cal->add_option("--bundle", cal_bundle, "measurement bundle")->required();
  cal->add_option("--out", cal_out, "report output path")->required();
  add_common(cal, cal_flags, true);

  std::string mc_grid, mc_out;
  std::optional<bool> mc_combine;
  std::optional<int> mc_runs, mc_threads;
  CLI::App* mc = app.add_subcommand("montecarlo", "run a simulated noise sweep");
  mc->add_option("--grid", mc_grid, "grid config file (default: built-in sweep)");
  mc->add_option("--out-dir", mc_out, "output directory")->required();
  mc->add_option("--combine-trajectories", mc_combine,
                 "pool the trajectories into one cell (true/false)")
      ->expected(0, 1)
      ->default_str("true");
  mc->add_option("--runs", mc_runs, "runs per trajectory per cell");
  mc->add_option("--threads", mc_threads, "worker threads (0 = all cores)");
  add_common(mc, mc_flags, true);

  std::string rep_in, rep_csv;
  CLI::App* rep = app.add_subcommand("report", "print a calibration or aggregate report");
  rep->add_option("--in", rep_in, "report file")->required();
  rep->add_option("--csv", rep_csv, "also write the aggregate table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*sim) return cmd_simulate(sim_config, sim_trajectory, sim_out, sim_flags);
  if (*cal) return cmd_calibrate(cal_bundle, cal_out, cal_flags);
  if (*mc) return cmd_montecarlo(mc_grid, mc_out, mc_flags, mc_combine, mc_runs, mc_threads);
  return cmd_report(rep_in, rep_csv);
}
