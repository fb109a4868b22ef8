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

// State and measurement data model for asynchronous array calibration, the
// per-measurement prediction functions, and the stacked residual/Jacobian of
// the joint problem.
//
// Conventions:
//   * Array 0 (the reference array) defines the global frame: position 0,
//     identity orientation, zero time offset. Only its drift is estimated.
//   * d_ij = x_i - s_j points from the source to the array; DOA vectors are
//     d_ij / |d_ij| expressed in the array's local frame.
//   * The first event is emitted at t = 0; emission intervals are known.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hybridcal/so3.hpp"

namespace hybridcal {

inline constexpr double kDefaultSpeedOfSound = 343.0;

/// Pose and clock parameters of one microphone array.
struct ArrayState {
  Vec3 position = Vec3::Zero();
  so3::RotVec orientation;
  double time_offset = 0.0;  // relative to the reference array, seconds
  double drift = 0.0;        // clock drift rate, seconds per second
};

/// Sound-event positions plus the known emission schedule.
class SourceTrajectory {
 public:
  SourceTrajectory() = default;
  /// Requires positions.size() >= 2 and intervals.size() == positions.size()-1,
  /// all intervals > 0.
  SourceTrajectory(std::vector<Vec3> positions, std::vector<double> intervals);

  int size() const { return static_cast<int>(positions_.size()); }
  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<double>& intervals() const { return intervals_; }
  const Vec3& position(int j) const { return positions_[j]; }

  /// Elapsed time since the first emission.
  double emission_time(int j) const { return emission_times_[j]; }

 private:
  std::vector<Vec3> positions_;
  std::vector<double> intervals_;
  std::vector<double> emission_times_;
};

/// Cumulative emission times t_j - t_0 from the interval list.
std::vector<double> emission_times(std::span<const double> intervals);

/// Hybrid TDOA, DOA and odometry measurements of one calibration session.
struct MeasurementBundle {
  int n_arrays = 0;
  int n_events = 0;
  double speed_of_sound = kDefaultSpeedOfSound;
  std::vector<double> intervals;  // K-1 emission intervals, seconds
  Eigen::MatrixXd tdoa_s;         // N x (K-1)
  Eigen::MatrixXd tdoa_m;         // (N-1) x K, row r is array r+1
  std::vector<Vec3> doa;          // N*K unit vectors, index i*K + j
  std::vector<Vec3> odometry;     // K-1 displacements in the global frame

  const Vec3& doa_at(int array, int event) const { return doa[array * n_events + event]; }
  Vec3& doa_at(int array, int event) { return doa[array * n_events + event]; }

  /// Allocates zeroed storage for the given dimensions.
  static MeasurementBundle zeros(int n_arrays, int n_events);

  /// Throws on inconsistent dimensions, non-unit DOA (beyond tol), non-finite
  /// values or non-positive intervals/speed of sound.
  void validate(double doa_unit_tol = 1e-9) const;
};

/// Row counts of the stacked measurement vector.
struct RowLayout {
  int n_arrays;
  int n_events;

  Eigen::Index tdoa_s_rows() const { return Eigen::Index(n_arrays) * (n_events - 1); }
  Eigen::Index tdoa_m_rows() const { return Eigen::Index(n_arrays - 1) * n_events; }
  Eigen::Index tdoa_rows() const { return tdoa_s_rows() + tdoa_m_rows(); }
  Eigen::Index doa_rows() const { return Eigen::Index(3) * n_arrays * n_events; }
  Eigen::Index odometry_rows() const { return Eigen::Index(3) * (n_events - 1); }
  Eigen::Index total() const { return tdoa_rows() + doa_rows() + odometry_rows(); }

  // Row offsets; `array` and `event` are zero-based.
  Eigen::Index tdoa_s_row(int array, int event) const {
    return Eigen::Index(array) * (n_events - 1) + event;
  }
  Eigen::Index tdoa_m_row(int array, int event) const {
    return tdoa_s_rows() + Eigen::Index(event) * (n_arrays - 1) + (array - 1);
  }
  Eigen::Index doa_row(int array, int event) const {
    return tdoa_rows() + 3 * (Eigen::Index(event) * n_arrays + array);
  }
  Eigen::Index odometry_row(int event) const {
    return tdoa_rows() + doa_rows() + 3 * Eigen::Index(event);
  }
};

/// Column layout of the joint unknown vector:
///   [drift_0, (x_i, phi_i, tau_i, drift_i) for i = 1..N-1, s_0 .. s_{K-1}]
/// The reference array's pose and offset have no columns.
struct ParameterLayout {
  int n_arrays;
  int n_events;

  static constexpr int kArrayBlock = 8;

  Eigen::Index size() const {
    return 1 + Eigen::Index(kArrayBlock) * (n_arrays - 1) + 3 * Eigen::Index(n_events);
  }
  Eigen::Index array_block(int array) const { return 1 + kArrayBlock * Eigen::Index(array - 1); }
  Eigen::Index position(int array) const { return array_block(array); }
  Eigen::Index orientation(int array) const { return array_block(array) + 3; }
  Eigen::Index time_offset(int array) const { return array_block(array) + 6; }
  Eigen::Index drift(int array) const { return array == 0 ? 0 : array_block(array) + 7; }
  Eigen::Index source(int event) const {
    return 1 + Eigen::Index(kArrayBlock) * (n_arrays - 1) + 3 * Eigen::Index(event);
  }
  std::vector<Eigen::Index> rotation_blocks() const;
};

/// Flat unknown vector with typed accessors.
class ParameterVector {
 public:
  ParameterVector() = default;
  ParameterVector(int n_arrays, int n_events);
  ParameterVector(ParameterLayout layout, Eigen::VectorXd values);

  /// arrays[0] must be at the gauge (zero pose and offset); only its drift is
  /// taken.
  static ParameterVector from_states(std::span<const ArrayState> arrays,
                                     std::span<const Vec3> sources);

  const ParameterLayout& layout() const { return layout_; }
  int n_arrays() const { return layout_.n_arrays; }
  int n_events() const { return layout_.n_events; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  ArrayState array(int i) const;
  std::vector<ArrayState> arrays() const;
  Vec3 source(int j) const { return values_.segment<3>(layout_.source(j)); }
  std::vector<Vec3> sources() const;

  void set_array(int i, const ArrayState& state);
  void set_source(int j, const Vec3& s) { values_.segment<3>(layout_.source(j)) = s; }

 private:
  ParameterLayout layout_{0, 0};
  Eigen::VectorXd values_;
};

// ---- single-measurement predictions ---------------------------------------

/// TDOA between events j and j+1 at one array:
/// (|x - s_{j+1}| - |x - s_j|) / c + (1 + drift) * dt.
double predict_tdoa_s(const ArrayState& array, const Vec3& s_j, const Vec3& s_next,
                      double dt, double c);

/// TDOA of event j between array i and the reference array:
/// (|x_i - s| - |s|) / c + tau_i + (drift_i - drift_0) * t_j.
double predict_tdoa_m(const ArrayState& array, const Vec3& s_j, double elapsed,
                      double reference_drift, double c);

/// Unit direction from the source to the array in the array's frame.
Vec3 predict_doa(const ArrayState& array, const Vec3& s_j);

Vec3 predict_odometry(const Vec3& s_j, const Vec3& s_next);

/// Predicted measurement vector in stacking order (TDOA-S by array, TDOA-M by
/// event, DOA event-major, odometry).
Eigen::VectorXd stack_predictions(std::span<const ArrayState> arrays,
                                  const SourceTrajectory& trajectory, double c);

/// Measurement vector of a bundle in the same order.
Eigen::VectorXd stack_measurements(const MeasurementBundle& meas);

/// Predicted bundle (same layout as a measured one) for the given truth.
MeasurementBundle predict_bundle(std::span<const ArrayState> arrays,
                                 const SourceTrajectory& trajectory, double c);

struct ResidualJacobian {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
};

/// Residual f(x) - z of the full joint problem and its Jacobian. Rotation
/// columns are derivatives with respect to a left perturbation exp(dphi) R.
ResidualJacobian residual_and_jacobian(const ParameterVector& params,
                                       const MeasurementBundle& meas);

/// Residual only (cheaper; used for cost evaluation).
Eigen::VectorXd residual(const ParameterVector& params, const MeasurementBundle& meas);

}  // namespace hybridcal
