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

// Minimal SO(3) toolkit: rotation vectors, the exponential/logarithm maps and
// the left-perturbation derivative used by bearing Jacobians.

#include <Eigen/Core>

namespace hybridcal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

namespace so3 {

/// Below this angle exp/log switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

/// Orthogonality / determinant tolerance for RotMat.
inline constexpr double kRotationTolerance = 1e-12;

/// Axis-angle rotation vector, always canonical: |phi| <= pi. At exactly pi
/// the first nonzero component is made positive so the representative is
/// unique.
class RotVec {
 public:
  RotVec() = default;
  explicit RotVec(const Vec3& phi);
  RotVec(double x, double y, double z) : RotVec(Vec3(x, y, z)) {}

  const Vec3& vector() const { return phi_; }
  double angle() const { return phi_.norm(); }

  static RotVec identity() { return RotVec(); }

 private:
  Vec3 phi_ = Vec3::Zero();
};

/// Proper rotation matrix. Construction validates R^T R = I and det R = +1.
class RotMat {
 public:
  RotMat() = default;
  explicit RotMat(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  RotMat transpose() const { return from_trusted(m_.transpose()); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  RotMat operator*(const RotMat& other) const {
    return from_trusted(m_ * other.m_);
  }

  static RotMat identity() { return RotMat(); }

  /// Skips validation; only for products of already-valid rotations.
  static RotMat from_trusted(const Mat3& m) {
    RotMat r;
    r.m_ = m;
    return r;
  }

 private:
  Mat3 m_ = Mat3::Identity();
};

/// Largest absolute deviation of m from satisfying the rotation invariants.
double rotation_defect(const Mat3& m);

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

RotMat exp(const RotVec& phi);
RotMat exp(const Vec3& phi);

RotVec log(const RotMat& r);
/// Validates `m` first; throws Error(kInvariantViolation) when it is not a
/// rotation.
RotVec log(const Mat3& m);

/// d/d(dphi) of exp(dphi) * R * v at dphi = 0, i.e. -hat(R v).
Mat3 left_perturb_jacobian(const RotMat& r, const Vec3& v);

/// Geodesic distance |log(a^T b)| in radians.
double angle_between(const RotMat& a, const RotMat& b);

}  // namespace so3
}  // namespace hybridcal
