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

#include "hybridcal/measurement_model.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "hybridcal/error.hpp"

namespace hybridcal {

namespace {

constexpr double kMinRange = 1e-9;

struct Range {
  double distance;
  Vec3 unit;  // (x - s) / |x - s|
};

Range range_between(const Vec3& x, const Vec3& s) {
  const Vec3 d = x - s;
  const double n = d.norm();
  if (!(n > kMinRange)) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "source coincides with an array position");
  }
  return {n, d / n};
}

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace

// ---- SourceTrajectory / bundle --------------------------------------------

std::vector<double> emission_times(std::span<const double> intervals) {
  std::vector<double> t(intervals.size() + 1, 0.0);
  for (std::size_t j = 0; j < intervals.size(); ++j) t[j + 1] = t[j] + intervals[j];
  return t;
}

SourceTrajectory::SourceTrajectory(std::vector<Vec3> positions, std::vector<double> intervals)
    : positions_(std::move(positions)), intervals_(std::move(intervals)) {
  require(positions_.size() >= 2, ErrorCode::kInsufficientData,
          "a trajectory needs at least two events");
  require(intervals_.size() + 1 == positions_.size(), ErrorCode::kDimensionMismatch,
          "trajectory needs exactly one interval per consecutive event pair");
  for (double dt : intervals_) {
    require(std::isfinite(dt) && dt > 0.0, ErrorCode::kInvalidArgument,
            "emission intervals must be positive");
  }
  emission_times_ = emission_times(intervals_);
}

MeasurementBundle MeasurementBundle::zeros(int n_arrays, int n_events) {
  MeasurementBundle b;
  b.n_arrays = n_arrays;
  b.n_events = n_events;
  b.intervals.assign(std::max(n_events - 1, 0), 0.0);
  b.tdoa_s = Eigen::MatrixXd::Zero(n_arrays, std::max(n_events - 1, 0));
  b.tdoa_m = Eigen::MatrixXd::Zero(std::max(n_arrays - 1, 0), n_events);
  b.doa.assign(std::size_t(n_arrays) * n_events, Vec3::Zero());
  b.odometry.assign(std::max(n_events - 1, 0), Vec3::Zero());
  return b;
}

void MeasurementBundle::validate(double doa_unit_tol) const {
  require(n_arrays >= 2, ErrorCode::kInsufficientData, "at least two arrays are required");
  require(n_events >= 2, ErrorCode::kInsufficientData,
          "insufficient events: at least two are required");
  require(std::isfinite(speed_of_sound) && speed_of_sound > 0.0, ErrorCode::kInvalidArgument,
          "speed of sound must be positive");
  const auto n = std::size_t(n_arrays);
  const auto k = std::size_t(n_events);
  require(intervals.size() == k - 1 && tdoa_s.rows() == n_arrays &&
              tdoa_s.cols() == n_events - 1 && tdoa_m.rows() == n_arrays - 1 &&
              tdoa_m.cols() == n_events && doa.size() == n * k && odometry.size() == k - 1,
          ErrorCode::kDimensionMismatch, "bundle dimensions do not match N and K");
  for (double dt : intervals) {
    require(std::isfinite(dt) && dt > 0.0, ErrorCode::kInvalidArgument,
            "emission intervals must be positive");
  }
  require(tdoa_s.allFinite() && tdoa_m.allFinite(), ErrorCode::kNonFinite,
          "non-finite TDOA entry");
  for (std::size_t idx = 0; idx < doa.size(); ++idx) {
    const double err = std::abs(doa[idx].norm() - 1.0);
    if (!(err <= doa_unit_tol)) {
      std::ostringstream os;
      os << "DOA of array " << idx / k << ", event " << idx % k << " is not a unit vector";
      throw Error(ErrorCode::kInvalidArgument, os.str());
    }
  }
  for (const Vec3& m : odometry) {
    require(m.allFinite(), ErrorCode::kNonFinite, "non-finite odometry entry");
  }
}

// ---- parameter vector ------------------------------------------------------

std::vector<Eigen::Index> ParameterLayout::rotation_blocks() const {
  std::vector<Eigen::Index> out;
  for (int i = 1; i < n_arrays; ++i) out.push_back(orientation(i));
  return out;
}

ParameterVector::ParameterVector(int n_arrays, int n_events)
    : layout_{n_arrays, n_events},
      values_(Eigen::VectorXd::Zero(ParameterLayout{n_arrays, n_events}.size())) {}

ParameterVector::ParameterVector(ParameterLayout layout, Eigen::VectorXd values)
    : layout_(layout), values_(std::move(values)) {
  require(values_.size() == layout_.size(), ErrorCode::kDimensionMismatch,
          "parameter vector length does not match its layout");
}

ParameterVector ParameterVector::from_states(std::span<const ArrayState> arrays,
                                             std::span<const Vec3> sources) {
  ParameterVector p(static_cast<int>(arrays.size()), static_cast<int>(sources.size()));
  for (int i = 0; i < p.n_arrays(); ++i) p.set_array(i, arrays[i]);
  for (int j = 0; j < p.n_events(); ++j) p.set_source(j, sources[j]);
  return p;
}

ArrayState ParameterVector::array(int i) const {
  ArrayState a;
  a.drift = values_[layout_.drift(i)];
  if (i == 0) return a;
  a.position = values_.segment<3>(layout_.position(i));
  a.orientation = so3::RotVec(Vec3(values_.segment<3>(layout_.orientation(i))));
  a.time_offset = values_[layout_.time_offset(i)];
  return a;
}

std::vector<ArrayState> ParameterVector::arrays() const {
  std::vector<ArrayState> out;
  out.reserve(n_arrays());
  for (int i = 0; i < n_arrays(); ++i) out.push_back(array(i));
  return out;
}

std::vector<Vec3> ParameterVector::sources() const {
  std::vector<Vec3> out;
  out.reserve(n_events());
  for (int j = 0; j < n_events(); ++j) out.push_back(source(j));
  return out;
}

void ParameterVector::set_array(int i, const ArrayState& state) {
  values_[layout_.drift(i)] = state.drift;
  if (i == 0) return;
  values_.segment<3>(layout_.position(i)) = state.position;
  values_.segment<3>(layout_.orientation(i)) = state.orientation.vector();
  values_[layout_.time_offset(i)] = state.time_offset;
}

// ---- predictions -----------------------------------------------------------

double predict_tdoa_s(const ArrayState& array, const Vec3& s_j, const Vec3& s_next,
                      double dt, double c) {
  const double d0 = range_between(array.position, s_j).distance;
  const double d1 = range_between(array.position, s_next).distance;
  return (d1 - d0) / c + (1.0 + array.drift) * dt;
}

double predict_tdoa_m(const ArrayState& array, const Vec3& s_j, double elapsed,
                      double reference_drift, double c) {
  const double di = range_between(array.position, s_j).distance;
  const double d0 = range_between(Vec3::Zero(), s_j).distance;
  return (di - d0) / c + array.time_offset + (array.drift - reference_drift) * elapsed;
}

Vec3 predict_doa(const ArrayState& array, const Vec3& s_j) {
  const Vec3 u = range_between(array.position, s_j).unit;
  return so3::exp(array.orientation).matrix().transpose() * u;
}

Vec3 predict_odometry(const Vec3& s_j, const Vec3& s_next) { return s_next - s_j; }

MeasurementBundle predict_bundle(std::span<const ArrayState> arrays,
                                 const SourceTrajectory& trajectory, double c) {
  const int n = static_cast<int>(arrays.size());
  const int k = trajectory.size();
  require(n >= 2, ErrorCode::kInsufficientData, "at least two arrays are required");
  MeasurementBundle b = MeasurementBundle::zeros(n, k);
  b.speed_of_sound = c;
  b.intervals = trajectory.intervals();
  const double reference_drift = arrays[0].drift;
  for (int i = 0; i < n; ++i) {
    // The reference array is evaluated at the gauge regardless of what the
    // caller stored in its pose fields.
    ArrayState a = arrays[i];
    if (i == 0) a = ArrayState{Vec3::Zero(), so3::RotVec(), 0.0, arrays[0].drift};
    for (int j = 0; j + 1 < k; ++j) {
      b.tdoa_s(i, j) = predict_tdoa_s(a, trajectory.position(j), trajectory.position(j + 1),
                                      trajectory.intervals()[j], c);
    }
    for (int j = 0; j < k; ++j) {
      if (i > 0) {
        b.tdoa_m(i - 1, j) = predict_tdoa_m(a, trajectory.position(j),
                                            trajectory.emission_time(j), reference_drift, c);
      }
      b.doa_at(i, j) = predict_doa(a, trajectory.position(j));
    }
  }
  for (int j = 0; j + 1 < k; ++j) {
    b.odometry[j] = predict_odometry(trajectory.position(j), trajectory.position(j + 1));
  }
  return b;
}

Eigen::VectorXd stack_measurements(const MeasurementBundle& meas) {
  const RowLayout rows{meas.n_arrays, meas.n_events};
  require(meas.tdoa_s.rows() == meas.n_arrays && meas.tdoa_s.cols() == meas.n_events - 1 &&
              meas.tdoa_m.rows() == meas.n_arrays - 1 && meas.tdoa_m.cols() == meas.n_events &&
              meas.doa.size() == std::size_t(meas.n_arrays) * meas.n_events &&
              meas.odometry.size() == std::size_t(meas.n_events - 1),
          ErrorCode::kDimensionMismatch, "bundle dimensions do not match N and K");
  Eigen::VectorXd z(rows.total());
  for (int i = 0; i < meas.n_arrays; ++i) {
    for (int j = 0; j + 1 < meas.n_events; ++j) z[rows.tdoa_s_row(i, j)] = meas.tdoa_s(i, j);
  }
  for (int j = 0; j < meas.n_events; ++j) {
    for (int i = 1; i < meas.n_arrays; ++i) z[rows.tdoa_m_row(i, j)] = meas.tdoa_m(i - 1, j);
    for (int i = 0; i < meas.n_arrays; ++i) z.segment<3>(rows.doa_row(i, j)) = meas.doa_at(i, j);
  }
  for (int j = 0; j + 1 < meas.n_events; ++j) {
    z.segment<3>(rows.odometry_row(j)) = meas.odometry[j];
  }
  return z;
}

Eigen::VectorXd stack_predictions(std::span<const ArrayState> arrays,
                                  const SourceTrajectory& trajectory, double c) {
  return stack_measurements(predict_bundle(arrays, trajectory, c));
}

// ---- joint residual and Jacobian --------------------------------------------

namespace {

void check_dims(const ParameterVector& params, const MeasurementBundle& meas) {
  require(params.n_arrays() == meas.n_arrays && params.n_events() == meas.n_events,
          ErrorCode::kDimensionMismatch, "parameter layout does not match the bundle");
  require(meas.intervals.size() + 1 == std::size_t(meas.n_events),
          ErrorCode::kDimensionMismatch, "bundle has the wrong number of intervals");
}

// Evaluates f(x) - z; fills the Jacobian when `jac` is non-null.
Eigen::VectorXd evaluate(const ParameterVector& params, const MeasurementBundle& meas,
                         Eigen::MatrixXd* jac) {
  check_dims(params, meas);
  const int n = meas.n_arrays;
  const int k = meas.n_events;
  const double c = meas.speed_of_sound;
  const RowLayout rows{n, k};
  const ParameterLayout& cols = params.layout();
  const std::vector<double> elapsed = emission_times(meas.intervals);

  std::vector<Vec3> positions(n, Vec3::Zero());
  std::vector<Mat3> rotations(n, Mat3::Identity());
  for (int i = 1; i < n; ++i) {
    positions[i] = params.values().segment<3>(cols.position(i));
    rotations[i] = so3::exp(Vec3(params.values().segment<3>(cols.orientation(i)))).matrix();
  }
  std::vector<Vec3> sources = params.sources();
  const Eigen::VectorXd& v = params.values();

  // ranges[i * k + j]
  std::vector<Range> ranges;
  ranges.reserve(std::size_t(n) * k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) ranges.push_back(range_between(positions[i], sources[j]));
  }
  auto rng = [&](int i, int j) -> const Range& { return ranges[std::size_t(i) * k + j]; };

  Eigen::VectorXd f(rows.total());
  if (jac) jac->setZero(rows.total(), cols.size());

  // TDOA-S
  for (int i = 0; i < n; ++i) {
    const double drift = v[cols.drift(i)];
    for (int j = 0; j + 1 < k; ++j) {
      const Eigen::Index row = rows.tdoa_s_row(i, j);
      f[row] = (rng(i, j + 1).distance - rng(i, j).distance) / c + (1.0 + drift) * meas.intervals[j];
      if (!jac) continue;
      auto J = jac->row(row);
      if (i > 0) {
        J.segment<3>(cols.position(i)) = (rng(i, j + 1).unit - rng(i, j).unit).transpose() / c;
      }
      J.segment<3>(cols.source(j + 1)) -= rng(i, j + 1).unit.transpose() / c;
      J.segment<3>(cols.source(j)) += rng(i, j).unit.transpose() / c;
      J[cols.drift(i)] = meas.intervals[j];
    }
  }

  // TDOA-M
  const double drift0 = v[cols.drift(0)];
  for (int j = 0; j < k; ++j) {
    for (int i = 1; i < n; ++i) {
      const Eigen::Index row = rows.tdoa_m_row(i, j);
      const double drift_i = v[cols.drift(i)];
      f[row] = (rng(i, j).distance - rng(0, j).distance) / c + v[cols.time_offset(i)] +
               (drift_i - drift0) * elapsed[j];
      if (!jac) continue;
      auto J = jac->row(row);
      J.segment<3>(cols.position(i)) = rng(i, j).unit.transpose() / c;
      J.segment<3>(cols.source(j)) = (rng(0, j).unit - rng(i, j).unit).transpose() / c;
      J[cols.time_offset(i)] = 1.0;
      J[cols.drift(i)] = elapsed[j];
      J[cols.drift(0)] = -elapsed[j];
    }
  }

  // DOA: r = R^T u with u = (x - s) / |x - s|.
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) {
      const Eigen::Index row = rows.doa_row(i, j);
      const Range& r = rng(i, j);
      const Vec3 pred = rotations[i].transpose() * r.unit;
      f.segment<3>(row) = pred;
      if (!jac) continue;
      const Mat3 du = (Mat3::Identity() - r.unit * r.unit.transpose()) / r.distance;
      const Mat3 dr_dx = rotations[i].transpose() * du;
      jac->block<3, 3>(row, cols.source(j)) = -dr_dx;
      if (i > 0) {
        jac->block<3, 3>(row, cols.position(i)) = dr_dx;
        // exp(dphi) R v = u  =>  r(dphi) = R^T exp(-dphi) u, so
        // dr/ddphi = -R^T * d(exp(dphi) R r)/ddphi.
        const so3::RotMat rot = so3::RotMat::from_trusted(rotations[i]);
        jac->block<3, 3>(row, cols.orientation(i)) =
            -rotations[i].transpose() * so3::left_perturb_jacobian(rot, pred);
      }
    }
  }

  // Odometry
  for (int j = 0; j + 1 < k; ++j) {
    const Eigen::Index row = rows.odometry_row(j);
    f.segment<3>(row) = sources[j + 1] - sources[j];
    if (!jac) continue;
    jac->block<3, 3>(row, cols.source(j + 1)) = Mat3::Identity();
    jac->block<3, 3>(row, cols.source(j)) = -Mat3::Identity();
  }

  return f - stack_measurements(meas);
}

}  // namespace

ResidualJacobian residual_and_jacobian(const ParameterVector& params,
                                       const MeasurementBundle& meas) {
  ResidualJacobian out;
  out.residual = evaluate(params, meas, &out.jacobian);
  return out;
}

Eigen::VectorXd residual(const ParameterVector& params, const MeasurementBundle& meas) {
  return evaluate(params, meas, nullptr);
}

}  // namespace hybridcal
