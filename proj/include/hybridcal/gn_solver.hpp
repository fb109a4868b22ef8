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

// Damped Gauss-Newton for weighted least squares with mixed additive and
// SO(3) parameter blocks.

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hybridcal/measurement_model.hpp"

namespace hybridcal {

/// Per-block residual weights of the calibration cost
/// (f(x) - z)^T W (f(x) - z), W = diag(w_tdoa I, w_doa I, w_odo I).
struct WeightSpec {
  double tdoa = 1e6;
  double doa = 1e2;
  double odo = 1e2;

  /// Inverse-variance weights; a zero sigma falls back to the default for
  /// that block.
  static WeightSpec from_sigmas(double sigma_tdoa, double sigma_doa, double sigma_odo);

  void validate() const;

  /// Row weights in the joint stacking order.
  Eigen::VectorXd expand(const RowLayout& rows) const;
};

struct SolverOptions {
  int max_iters = 100;
  double cost_tol = 1e-10;  // relative decrease of an accepted step
  double step_tol = 1e-12;  // infinity norm of the increment
  double lambda0 = 0.0;     // initial damping; 0 is pure Gauss-Newton
  double singular_rcond = 1e-13;
};

struct SolveReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> step_norms;  // infinity norm of each accepted step
  double condition = 0.0;          // of the Jacobi-scaled normal matrix at the solution
};

/// A weighted least-squares problem. Residuals are unweighted; the solver
/// applies row_weights().
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;

  virtual Eigen::Index num_parameters() const = 0;
  virtual const Eigen::VectorXd& row_weights() const = 0;
  virtual Eigen::VectorXd residual(const Eigen::VectorXd& x) const = 0;
  virtual void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residual,
                        Eigen::MatrixXd& jacobian) const = 0;
  /// Start offsets of 3-vectors that hold rotation vectors; these are updated
  /// by left multiplication instead of addition.
  virtual std::span<const Eigen::Index> rotation_blocks() const { return {}; }
};

/// x + dx, with rotation blocks composed as log(exp(dphi) exp(phi)).
Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                        std::span<const Eigen::Index> rotation_blocks);

double weighted_cost(const Eigen::VectorXd& residual, const Eigen::VectorXd& weights);

/// Ratio of extreme eigenvalues of D H D with D = diag(H)^-1/2. Returns
/// infinity when a column of J is identically zero.
double scaled_condition(const Eigen::MatrixXd& normal_matrix);

struct SolveResult {
  Eigen::VectorXd x;
  SolveReport report;
};

/// Throws SingularProblemError when the normal matrix is numerically rank
/// deficient, Error(kNonFinite) on a non-finite residual at x0.
SolveResult solve(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                  const SolverOptions& options = {});

/// The full joint calibration problem over a ParameterVector.
class JointProblem final : public LeastSquaresProblem {
 public:
  JointProblem(const MeasurementBundle& meas, const WeightSpec& weights);

  Eigen::Index num_parameters() const override { return layout_.size(); }
  const Eigen::VectorXd& row_weights() const override { return weights_; }
  Eigen::VectorXd residual(const Eigen::VectorXd& x) const override;
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residual,
                Eigen::MatrixXd& jacobian) const override;
  std::span<const Eigen::Index> rotation_blocks() const override { return rotations_; }

  const ParameterLayout& layout() const { return layout_; }

 private:
  const MeasurementBundle& meas_;
  ParameterLayout layout_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::Index> rotations_;
};

}  // namespace hybridcal
