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

#include "hybridcal/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "hybridcal/error.hpp"

namespace hybridcal {

WeightSpec CalibrationConfig::resolve_weights(const std::optional<NoiseLevels>& noise) const {
  if (weights) return *weights;
  if (noise) return WeightSpec::from_sigmas(noise->tdoa, noise->doa, noise->odo);
  return WeightSpec{};
}

double ErrorMetrics::angle_deg() const { return angle * 180.0 / std::numbers::pi; }

ErrorMetrics compute_errors(const ParameterVector& estimate, const GroundTruth& truth) {
  const int n = estimate.n_arrays();
  if (n != static_cast<int>(truth.arrays.size()) || estimate.n_events() != truth.trajectory.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "estimate and ground truth differ in size");
  }
  ErrorMetrics m;
  for (int i = 1; i < n; ++i) {
    const ArrayState e = estimate.array(i);
    const ArrayState& t = truth.arrays[i];
    m.location += (e.position - t.position).squaredNorm();
    m.angle += so3::angle_between(so3::exp(e.orientation), so3::exp(t.orientation));
    m.offset += std::pow(e.time_offset - t.time_offset, 2);
  }
  for (int i = 0; i < n; ++i) {
    m.drift += std::pow(estimate.array(i).drift - truth.arrays[i].drift, 2);
  }
  m.location = std::sqrt(m.location / (n - 1));
  m.angle /= (n - 1);
  m.offset = std::sqrt(m.offset / (n - 1));
  m.drift = std::sqrt(m.drift / n);
  return m;
}

RunReport calibrate(const MeasurementBundle& meas, const CalibrationConfig& cfg,
                    const std::optional<NoiseLevels>& noise, const GroundTruth* truth) {
  RunReport rep;
  IveResult ive;
  try {
    meas.validate(1e-6);
    rep.weights = cfg.resolve_weights(noise);
    rep.weights.validate();
    ive = run_ive(meas, rep.weights, cfg.ive);
  } catch (const Error& e) {
    throw StageError(Stage::kInitialEstimate, e.code(),
                     std::string("initial value estimation failed: ") + e.what());
  }
  rep.ive_estimate = ive.estimate;
  rep.stage1 = std::move(ive.stage1);

  try {
    const JointProblem problem(meas, rep.weights);
    SolveResult sol = solve(problem, ive.estimate.values(), cfg.joint);
    rep.estimate = ParameterVector(problem.layout(), std::move(sol.x));
    rep.joint = std::move(sol.report);
  } catch (const Error& e) {
    throw StageError(Stage::kJoint, e.code(), std::string("joint optimization failed: ") + e.what());
  }
  rep.cost_regressed = !(rep.joint.final_cost <= rep.joint.initial_cost);

  if (truth) {
    rep.ive_errors = compute_errors(rep.ive_estimate, *truth);
    rep.final_errors = compute_errors(rep.estimate, *truth);
  }
  return rep;
}

double rmse_iqr(std::span<const double> values) {
  if (values.size() < 4) {
    throw Error(ErrorCode::kInsufficientData, "interquartile mean needs at least 4 runs");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double h = p * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - double(lo)) * (sorted[hi] - sorted[lo]);
  };
  const double q1 = quantile(0.25);
  const double q3 = quantile(0.75);
  double sum = 0.0;
  int count = 0;
  for (double v : sorted) {
    if (v >= q1 && v <= q3) {
      sum += v;
      ++count;
    }
  }
  return sum / count;
}

// ---- Monte Carlo -------------------------------------------------------------------

MonteCarloGrid MonteCarloGrid::standard_sweep() {
  constexpr double kDeg = std::numbers::pi / 180.0;
  MonteCarloGrid g;
  g.sigma_tdoa = {0.05e-3, 0.1e-3, 0.5e-3};
  g.sigma_doa = {5.0 * kDeg, 10.0 * kDeg, 15.0 * kDeg};
  return g;
}

void MonteCarloGrid::validate() const {
  if (sigma_tdoa.empty() || sigma_doa.empty() || trajectories.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "grid axes must be nonempty");
  }
  if (runs_per_cell < 4) {
    throw Error(ErrorCode::kInvalidArgument, "runs_per_cell must be at least 4");
  }
  for (TrajectoryId t : trajectories) {
    if (t == TrajectoryId::kCustom) {
      throw Error(ErrorCode::kInvalidArgument, "Monte Carlo grids use trajectory presets only");
    }
  }
  for (double s : sigma_tdoa) {
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma_tdoa must be nonnegative");
  }
  for (double s : sigma_doa) {
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma_doa must be nonnegative");
  }
  if (n_arrays < 2) throw Error(ErrorCode::kInvalidArgument, "n_arrays must be at least 2");
}

RunRecord run_single(const MonteCarloGrid& grid, int tdoa_index, int doa_index,
                     TrajectoryId trajectory, int run) {
  RunRecord rec;
  rec.tdoa_index = tdoa_index;
  rec.doa_index = doa_index;
  rec.trajectory = trajectory;
  rec.run = run;
  rec.seed = derive_seed(grid.base_seed, static_cast<std::uint64_t>(trajectory) + 1,
                         static_cast<std::uint64_t>(run));

  ScenarioConfig sc = ScenarioConfig::preset(trajectory);
  sc.n_arrays = grid.n_arrays;
  sc.seed = rec.seed;
  sc.speed_of_sound = grid.speed_of_sound;
  sc.noise = {grid.sigma_tdoa[tdoa_index], grid.sigma_doa[doa_index], grid.sigma_odo};

  try {
    const GroundTruth gt = generate_scenario(sc);
    const MeasurementBundle meas = synthesize_measurements(gt, sc);
    CalibrationConfig cfg = grid.calibration;
    cfg.ive.seed = derive_seed(rec.seed, 3);
    cfg.ive.workspace = gt.workspace;
    const RunReport rep = calibrate(meas, cfg, sc.noise, &gt);
    rec.stage1_iterations = rep.stage1.iterations;
    rec.joint_iterations = rep.joint.iterations;
    rec.ive = *rep.ive_errors;
    rec.final = *rep.final_errors;
    if (!rep.joint.converged) {
      rec.failure = "joint solve did not converge";
    } else if (rep.cost_regressed) {
      rec.failure = "joint cost above initial cost";
    } else {
      rec.ok = true;
    }
  } catch (const std::exception& e) {
    rec.failure = e.what();
  }
  return rec;
}

std::vector<CellAggregate> aggregate_runs(const MonteCarloGrid& grid,
                                          std::span<const RunRecord> runs) {
  std::vector<std::string> labels;
  if (grid.combine_trajectories) {
    labels.push_back("combined");
  } else {
    for (TrajectoryId t : grid.trajectories) labels.emplace_back(to_string(t));
  }

  auto reduce = [](const std::vector<double>& v) {
    return v.size() >= 4 ? rmse_iqr(v) : std::numeric_limits<double>::quiet_NaN();
  };

  std::vector<CellAggregate> cells;
  for (int ti = 0; ti < int(grid.sigma_tdoa.size()); ++ti) {
    for (int di = 0; di < int(grid.sigma_doa.size()); ++di) {
      for (const std::string& label : labels) {
        CellAggregate cell;
        cell.tdoa_index = ti;
        cell.doa_index = di;
        cell.sigma_tdoa = grid.sigma_tdoa[ti];
        cell.sigma_doa = grid.sigma_doa[di];
        cell.trajectory = label;
        std::array<std::vector<double>, 4> ive, fin;
        for (const RunRecord& r : runs) {
          if (r.tdoa_index != ti || r.doa_index != di) continue;
          if (label != "combined" && label != to_string(r.trajectory)) continue;
          ++cell.runs;
          if (!r.ok) {
            ++cell.failures;
            continue;
          }
          ive[0].push_back(r.ive.location);
          ive[1].push_back(r.ive.angle);
          ive[2].push_back(r.ive.offset);
          ive[3].push_back(r.ive.drift);
          fin[0].push_back(r.final.location);
          fin[1].push_back(r.final.angle);
          fin[2].push_back(r.final.offset);
          fin[3].push_back(r.final.drift);
        }
        cell.ive = {reduce(ive[0]), reduce(ive[1]), reduce(ive[2]), reduce(ive[3])};
        cell.final = {reduce(fin[0]), reduce(fin[1]), reduce(fin[2]), reduce(fin[3])};
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

AggregateReport monte_carlo(const MonteCarloGrid& grid) {
  grid.validate();
  struct Task {
    int ti, di;
    TrajectoryId traj;
    int run;
  };
  std::vector<Task> tasks;
  for (int ti = 0; ti < int(grid.sigma_tdoa.size()); ++ti) {
    for (int di = 0; di < int(grid.sigma_doa.size()); ++di) {
      for (TrajectoryId t : grid.trajectories) {
        for (int r = 0; r < grid.runs_per_cell; ++r) tasks.push_back({ti, di, t, r});
      }
    }
  }

  AggregateReport out;
  out.grid = grid;
  out.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const Task& t = tasks[k];
      out.runs[k] = run_single(grid, t.ti, t.di, t.traj, t.run);
    }
  };
  unsigned n_threads = grid.threads ? grid.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(tasks.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
  }
  out.cells = aggregate_runs(grid, out.runs);
  return out;
}

}  // namespace hybridcal
