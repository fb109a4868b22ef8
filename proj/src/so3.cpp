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

#include "hybridcal/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "hybridcal/error.hpp"

namespace hybridcal::so3 {

namespace {

constexpr double kPi = std::numbers::pi;

// Makes the first nonzero component positive.
Vec3 canonical_half_turn(const Vec3& phi) {
  for (int k = 0; k < 3; ++k) {
    if (phi[k] > 0.0) return phi;
    if (phi[k] < 0.0) return -phi;
  }
  return phi;
}

}  // namespace

RotVec::RotVec(const Vec3& phi) {
  double theta = phi.norm();
  if (!std::isfinite(theta)) {
    throw Error(ErrorCode::kNonFinite, "rotation vector is not finite");
  }
  if (theta <= kPi - 1e-12) {
    phi_ = phi;
    return;
  }
  const Vec3 axis = phi / theta;
  // A negative remainder is the same rotation about the opposite axis.
  theta = std::remainder(theta, 2.0 * kPi);
  Vec3 wrapped = theta * axis;
  if (std::abs(wrapped.norm() - kPi) <= 1e-12) wrapped = canonical_half_turn(wrapped);
  phi_ = wrapped;
}

double rotation_defect(const Mat3& m) {
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(m.determinant() - 1.0));
}

RotMat::RotMat(const Mat3& m) {
  const double defect = rotation_defect(m);
  if (!(defect <= kRotationTolerance)) {
    std::ostringstream os;
    os << "matrix is not a proper rotation (defect " << defect << ")";
    throw Error(ErrorCode::kInvariantViolation, os.str());
  }
  m_ = m;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

RotMat exp(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = hat(phi);
  if (theta < kSmallAngle) {
    return RotMat::from_trusted(Mat3::Identity() + k + 0.5 * k * k);
  }
  const Vec3 n = phi / theta;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return RotMat::from_trusted(c * Mat3::Identity() + (1.0 - c) * n * n.transpose() +
                              s * hat(n));
}

RotMat exp(const RotVec& phi) { return exp(phi.vector()); }

RotVec log(const RotMat& r) {
  const Mat3& m = r.matrix();
  const Vec3 twice_sin_axis = vee(m - m.transpose());  // 2 sin(theta) n
  const double cos_theta = std::clamp(0.5 * (m.trace() - 1.0), -1.0, 1.0);
  const double sin_theta = 0.5 * twice_sin_axis.norm();
  const double theta = std::atan2(sin_theta, cos_theta);

  if (theta < kSmallAngle) {
    // theta / (2 sin theta) ~ (1 + theta^2 / 6) / 2
    return RotVec(0.5 * (1.0 + theta * theta / 6.0) * twice_sin_axis);
  }
  if (sin_theta > 1e-2 || cos_theta > 0.0) {
    return RotVec(theta / (2.0 * sin_theta) * twice_sin_axis);
  }

  // Near pi: recover the axis from the symmetric part,
  // (R + R^T) / 2 = cos(theta) I + (1 - cos(theta)) n n^T.
  const Mat3 nnt = (0.5 * (m + m.transpose()) - cos_theta * Mat3::Identity()) /
                   (1.0 - cos_theta);
  int col = 0;
  nnt.diagonal().maxCoeff(&col);
  Vec3 n = nnt.col(col) / std::sqrt(std::max(nnt(col, col), 0.0));
  n.normalize();
  if (n.dot(twice_sin_axis) < 0.0) n = -n;
  return RotVec(theta * n);
}

RotVec log(const Mat3& m) { return log(RotMat(m)); }

Mat3 left_perturb_jacobian(const RotMat& r, const Vec3& v) { return -hat(r * v); }

double angle_between(const RotMat& a, const RotMat& b) {
  return log(a.transpose() * b).angle();
}

}  // namespace hybridcal::so3
