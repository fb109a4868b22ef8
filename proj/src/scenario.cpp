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

#include "hybridcal/scenario.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "hybridcal/error.hpp"

namespace hybridcal {

namespace {

constexpr std::uint64_t kScenarioStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr int kMaxRejections = 10000;

}  // namespace

std::string_view to_string(TrajectoryId id) {
  switch (id) {
    case TrajectoryId::kTraj1: return "traj1";
    case TrajectoryId::kTraj2: return "traj2";
    case TrajectoryId::kTraj3: return "traj3";
    case TrajectoryId::kCustom: return "custom";
  }
  return "custom";
}

std::optional<TrajectoryId> parse_trajectory(std::string_view name) {
  for (TrajectoryId id : {TrajectoryId::kTraj1, TrajectoryId::kTraj2, TrajectoryId::kTraj3,
                          TrajectoryId::kCustom}) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

ScenarioConfig ScenarioConfig::preset(TrajectoryId id) {
  ScenarioConfig cfg;
  cfg.trajectory = id;
  switch (id) {
    case TrajectoryId::kTraj1:
      cfg.extent = Vec3(3.0, 3.0, 3.0);
      cfg.n_events = 8;
      break;
    case TrajectoryId::kTraj2:
      cfg.extent = Vec3(2.0, 6.0, 2.0);
      cfg.n_events = 10;
      break;
    case TrajectoryId::kTraj3:
      cfg.extent = Vec3(4.0, 4.0, 2.0);
      cfg.n_events = 14;
      break;
    case TrajectoryId::kCustom:
      break;
  }
  return cfg;
}

void ScenarioConfig::validate() const {
  if (n_arrays < 2) throw Error(ErrorCode::kInvalidArgument, "n_arrays must be at least 2");
  if (n_events < 2) throw Error(ErrorCode::kInsufficientData, "n_events must be at least 2");
  if (!(extent.array() > 0.0).all() || !extent.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "workspace is empty");
  }
  if (!(noise.tdoa >= 0.0 && noise.doa >= 0.0 && noise.odo >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise levels must be nonnegative");
  }
  if (!(tau_max >= 0.0 && delta_max >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "clock bounds must be nonnegative");
  }
  if (!(speed_of_sound > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "speed of sound must be positive");
  }
  if (!(min_interval > 0.0 && max_interval >= min_interval)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid emission interval range");
  }
}

so3::RotVec uniform_rotation(double u1, double u2, double u3) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  const Eigen::Quaterniond q(b * std::cos(kTwoPi * u3), a * std::sin(kTwoPi * u2),
                             a * std::cos(kTwoPi * u2), b * std::sin(kTwoPi * u3));
  return so3::log(so3::RotMat::from_trusted(q.normalized().toRotationMatrix()));
}

GroundTruth generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, kScenarioStream));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample_point = [&] {
    return Vec3(unit(rng) * cfg.extent.x(), unit(rng) * cfg.extent.y(),
                unit(rng) * cfg.extent.z());
  };

  // Sample in the box, then shift so the reference array sits at the origin.
  std::vector<Vec3> world(cfg.n_arrays);
  for (Vec3& p : world) p = sample_point();
  const Vec3 origin = world[0];

  GroundTruth gt;
  gt.workspace.lower = -origin;
  gt.workspace.upper = cfg.extent - origin;
  gt.arrays.resize(cfg.n_arrays);
  for (int i = 1; i < cfg.n_arrays; ++i) {
    ArrayState& a = gt.arrays[i];
    a.position = world[i] - origin;
    const double u1 = unit(rng), u2 = unit(rng), u3 = unit(rng);
    a.orientation = uniform_rotation(u1, u2, u3);
    a.time_offset = (2.0 * unit(rng) - 1.0) * cfg.tau_max;
  }
  for (ArrayState& a : gt.arrays) a.drift = (2.0 * unit(rng) - 1.0) * cfg.delta_max;

  std::vector<Vec3> sources(cfg.n_events);
  for (Vec3& s : sources) {
    int tries = 0;
    for (;;) {
      s = sample_point() - origin;
      bool clear = true;
      for (const ArrayState& a : gt.arrays) {
        clear = clear && (s - a.position).norm() >= cfg.min_separation;
      }
      if (clear) break;
      if (++tries > kMaxRejections) {
        throw Error(ErrorCode::kInvalidArgument,
                    "workspace too small for the minimum array-source separation");
      }
    }
  }
  std::vector<double> intervals(cfg.n_events - 1);
  for (double& dt : intervals) dt = cfg.min_interval + unit(rng) * (cfg.max_interval - cfg.min_interval);
  gt.trajectory = SourceTrajectory(std::move(sources), std::move(intervals));
  return gt;
}

MeasurementBundle synthesize_measurements(const GroundTruth& gt, const ScenarioConfig& cfg) {
  MeasurementBundle b = predict_bundle(gt.arrays, gt.trajectory, cfg.speed_of_sound);
  std::mt19937_64 rng(derive_seed(cfg.seed, kNoiseStream));
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int i = 0; i < b.n_arrays; ++i) {
    for (int j = 0; j + 1 < b.n_events; ++j) b.tdoa_s(i, j) += cfg.noise.tdoa * normal(rng);
  }
  for (int j = 0; j < b.n_events; ++j) {
    for (int i = 1; i < b.n_arrays; ++i) b.tdoa_m(i - 1, j) += cfg.noise.tdoa * normal(rng);
  }
  for (int j = 0; j < b.n_events; ++j) {
    for (int i = 0; i < b.n_arrays; ++i) {
      Vec3 e;
      for (int a = 0; a < 3; ++a) e[a] = normal(rng);
      if (cfg.noise.doa > 0.0) {
        Vec3& r = b.doa_at(i, j);
        r = (so3::exp(Vec3(cfg.noise.doa * e)) * r).normalized();
      }
    }
  }
  for (int j = 0; j + 1 < b.n_events; ++j) {
    Vec3 v;
    for (int a = 0; a < 3; ++a) v[a] = normal(rng);
    b.odometry[j] += cfg.noise.odo * v;
  }
  return b;
}

}  // namespace hybridcal
