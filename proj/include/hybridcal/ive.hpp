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

// Initial value estimation.
//
// Stage 1 solves a reduced weighted least-squares problem over everything but
// the orientations of arrays 1..N-1, using all hybrid TDOA rows, the DOA rows
// of the reference array and odometry. Stage 2 lifts the sources into each
// array's frame with its measured DOA and recovers the array orientation with
// a closed-form point-set alignment.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "hybridcal/gn_solver.hpp"
#include "hybridcal/measurement_model.hpp"

namespace hybridcal {

/// Minimum number of events accepted by the initializer.
inline constexpr int kMinIveEvents = 4;

/// Axis-aligned box in the global frame, meters.
struct Box {
  Vec3 lower = Vec3::Zero();
  Vec3 upper = Vec3::Zero();

  bool empty() const { return !((upper - lower).array() > 0.0).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
  }
  Vec3 extent() const { return upper - lower; }
};

/// Stage-1 unknowns: all array parameters except orientations.
struct Stage1Estimate {
  double reference_drift = 0.0;
  std::vector<Vec3> positions;   // arrays 1..N-1
  std::vector<double> offsets;   // arrays 1..N-1
  std::vector<double> drifts;    // arrays 1..N-1
  std::vector<Vec3> sources;

  int n_arrays() const { return static_cast<int>(positions.size()) + 1; }
  int n_events() const { return static_cast<int>(sources.size()); }

  static Stage1Estimate from_parameters(const ParameterVector& p);
  /// Orientations of arrays 1..N-1 are taken from `orientations`, or left at
  /// identity when empty.
  ParameterVector to_parameters(std::span<const so3::RotVec> orientations = {}) const;
};

struct IveOptions {
  SolverOptions solver;
  /// Rows of the stage-1 problem; disabling TDOA-S leaves the reference drift
  /// unobservable.
  bool use_tdoa_s = true;
  /// Nominal range of the first event from the reference array when
  /// dead-reckoning the initial source track.
  double nominal_range = 1.5;
  /// Box used to draw the initial array positions. When absent it is derived
  /// from the dead-reckoned sources.
  std::optional<Box> workspace;
  std::uint64_t seed = 0;
  /// Number of random initial array layouts tried by the default initializer;
  /// the stage-1 solution with the lowest cost is kept.
  int starts = 8;
};

/// Default stage-1 initial guess: zero clock parameters, sources dead-reckoned
/// from odometry starting at nominal_range along the first reference DOA,
/// array positions uniform in the workspace.
Stage1Estimate default_stage1_init(const MeasurementBundle& meas, const IveOptions& options);

struct Stage1Result {
  Stage1Estimate estimate;
  SolveReport report;
};

Stage1Result stage1_solve(const MeasurementBundle& meas, const Stage1Estimate& init,
                          const WeightSpec& weights, const IveOptions& options = {});

/// Points |x_i - s_j| * r_ij: event positions relative to array i, in its
/// own frame.
std::vector<Vec3> lift_sources_to_array_frame(const Vec3& array_position,
                                              std::span<const Vec3> sources,
                                              std::span<const Vec3> doa);

struct RigidAlignment {
  so3::RotMat rotation;
  Vec3 translation = Vec3::Zero();
  bool reflection_repaired = false;
};

/// Rotation/translation minimizing sum |global_j - R local_j - t|^2.
RigidAlignment icp_orientation(std::span<const Vec3> local_points,
                               std::span<const Vec3> global_points);

/// Cost of an alignment, sum of squared point distances.
double alignment_cost(std::span<const Vec3> local_points, std::span<const Vec3> global_points,
                      const Mat3& rotation, const Vec3& translation);

struct IveResult {
  ParameterVector estimate;
  SolveReport stage1;
  std::vector<RigidAlignment> alignments;  // arrays 1..N-1
};

IveResult run_ive(const MeasurementBundle& meas, const Stage1Estimate& init,
                  const WeightSpec& weights, const IveOptions& options = {});

/// Solves stage 1 from `options.starts` default initial guesses (seeds derived
/// from options.seed) and keeps the lowest-cost solution.
Stage1Result stage1_multistart(const MeasurementBundle& meas, const WeightSpec& weights,
                               const IveOptions& options = {});

/// Initializer with stage1_multistart for the first stage.
IveResult run_ive(const MeasurementBundle& meas, const WeightSpec& weights,
                  const IveOptions& options = {});

}  // namespace hybridcal
