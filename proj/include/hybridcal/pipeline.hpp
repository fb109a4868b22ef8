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

#pragma once

// Initializer followed by the joint weighted least-squares refinement, error
// metrics against ground truth, and the seeded Monte Carlo harness.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridcal/gn_solver.hpp"
#include "hybridcal/ive.hpp"
#include "hybridcal/measurement_model.hpp"
#include "hybridcal/scenario.hpp"

namespace hybridcal {

struct CalibrationConfig {
  /// Explicit weights; when absent they come from the noise levels (inverse
  /// variance) or the WeightSpec defaults.
  std::optional<WeightSpec> weights;
  IveOptions ive;
  SolverOptions joint;

  WeightSpec resolve_weights(const std::optional<NoiseLevels>& noise) const;
};

/// Errors of an estimate in SI units. Position, orientation and offset cover
/// arrays 1..N-1; drift covers every array.
struct ErrorMetrics {
  double location = 0.0;  // RMS position error, m
  double angle = 0.0;     // mean geodesic orientation error, rad
  double offset = 0.0;    // RMS time offset error, s
  double drift = 0.0;     // RMS drift error, s/s

  // Units used in reports and tables.
  double location_cm() const { return location * 1e2; }
  double angle_deg() const;
  double offset_1e4s() const { return offset * 1e4; }
  double drift_us() const { return drift * 1e6; }

  bool operator==(const ErrorMetrics&) const = default;
};

ErrorMetrics compute_errors(const ParameterVector& estimate, const GroundTruth& truth);

struct RunReport {
  WeightSpec weights;
  ParameterVector ive_estimate;
  ParameterVector estimate;
  SolveReport stage1;
  SolveReport joint;
  std::optional<ErrorMetrics> ive_errors;
  std::optional<ErrorMetrics> final_errors;
  /// Set when the joint cost ended above the cost at the IVE estimate.
  bool cost_regressed = false;
};

/// Throws StageError tagged with the failing stage.
RunReport calibrate(const MeasurementBundle& meas, const CalibrationConfig& cfg,
                    const std::optional<NoiseLevels>& noise = std::nullopt,
                    const GroundTruth* truth = nullptr);

/// Mean of the values lying in [Q1, Q3] (linear-interpolation quartiles).
/// Requires at least 4 values.
double rmse_iqr(std::span<const double> values);

struct MonteCarloGrid {
  std::vector<double> sigma_tdoa;  // seconds
  std::vector<double> sigma_doa;   // radians
  std::vector<TrajectoryId> trajectories{TrajectoryId::kTraj1, TrajectoryId::kTraj2,
                                         TrajectoryId::kTraj3};
  int runs_per_cell = 200;
  std::uint64_t base_seed = 0;
  bool combine_trajectories = true;
  int n_arrays = 5;
  double sigma_odo = 3e-2;
  double speed_of_sound = kDefaultSpeedOfSound;
  CalibrationConfig calibration;
  unsigned threads = 0;  // 0 = hardware concurrency

  /// 3 x 3 noise grid over the three trajectory presets, 200 runs each.
  static MonteCarloGrid standard_sweep();

  void validate() const;
};

struct RunRecord {
  int tdoa_index = 0;
  int doa_index = 0;
  TrajectoryId trajectory = TrajectoryId::kTraj1;
  int run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  ErrorMetrics ive;
  ErrorMetrics final;
  int stage1_iterations = 0;
  int joint_iterations = 0;

  bool operator==(const RunRecord&) const = default;
};

struct CellAggregate {
  int tdoa_index = 0;
  int doa_index = 0;
  double sigma_tdoa = 0.0;
  double sigma_doa = 0.0;
  std::string trajectory;  // preset name or "combined"
  int runs = 0;
  int failures = 0;
  ErrorMetrics ive;
  ErrorMetrics final;

  bool operator==(const CellAggregate&) const = default;
};

struct AggregateReport {
  MonteCarloGrid grid;
  std::vector<CellAggregate> cells;
  std::vector<RunRecord> runs;
};

/// Runs one synthetic scenario through the pipeline; failures are recorded,
/// not thrown.
RunRecord run_single(const MonteCarloGrid& grid, int tdoa_index, int doa_index,
                     TrajectoryId trajectory, int run);

/// Per-run seeds depend on (base_seed, trajectory, run) only, so every noise
/// cell sees the same geometries and scaled copies of the same noise draws.
AggregateReport monte_carlo(const MonteCarloGrid& grid);

/// Aggregates run records into cells (deterministic, ordered by run index).
std::vector<CellAggregate> aggregate_runs(const MonteCarloGrid& grid,
                                          std::span<const RunRecord> runs);

}  // namespace hybridcal
