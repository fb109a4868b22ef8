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

// Synthetic calibration scenarios: random array poses and clocks, a random
// source track inside a preset box, and noisy hybrid measurements.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridcal/ive.hpp"
#include "hybridcal/measurement_model.hpp"
#include "hybridcal/seeding.hpp"

namespace hybridcal {

enum class TrajectoryId { kTraj1, kTraj2, kTraj3, kCustom };

std::string_view to_string(TrajectoryId id);
/// Accepts "traj1", "traj2", "traj3", "custom".
std::optional<TrajectoryId> parse_trajectory(std::string_view name);

struct NoiseLevels {
  double tdoa = 0.0;  // seconds
  double doa = 0.0;   // radians
  double odo = 0.0;   // meters
};

struct ScenarioConfig {
  TrajectoryId trajectory = TrajectoryId::kTraj1;
  int n_arrays = 5;
  int n_events = 8;
  Vec3 extent = Vec3(3.0, 3.0, 3.0);  // size of the sampling box, meters
  NoiseLevels noise{0.0, 0.0, 3e-2};
  std::uint64_t seed = 0;
  double tau_max = 0.1;
  double delta_max = 1e-4;
  double speed_of_sound = kDefaultSpeedOfSound;
  double min_separation = 0.3;
  double min_interval = 0.5;
  double max_interval = 2.0;

  /// Box size and event count of a trajectory preset; other fields default.
  static ScenarioConfig preset(TrajectoryId id);

  void validate() const;
};

struct GroundTruth {
  std::vector<ArrayState> arrays;
  SourceTrajectory trajectory;
  /// Sampling box expressed in the reference array's frame.
  Box workspace;

  ParameterVector parameters() const {
    return ParameterVector::from_states(arrays, trajectory.positions());
  }
};

/// Deterministic in cfg.seed.
GroundTruth generate_scenario(const ScenarioConfig& cfg);

/// Adds i.i.d. noise to the exact predictions. The noise stream is seeded
/// from cfg.seed independently of the scenario stream and draws unit normals
/// that are scaled by the configured sigmas, so two configs differing only in
/// noise levels get proportional noise realizations.
MeasurementBundle synthesize_measurements(const GroundTruth& gt, const ScenarioConfig& cfg);

/// Uniformly distributed rotation (Haar measure) from three uniform draws.
so3::RotVec uniform_rotation(double u1, double u2, double u3);

}  // namespace hybridcal
