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

#include "hybridcal/gn_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include <Eigen/Dense>

#include "hybridcal/error.hpp"

namespace hybridcal {

// ---- weights -----------------------------------------------------------------

WeightSpec WeightSpec::from_sigmas(double sigma_tdoa, double sigma_doa, double sigma_odo) {
  WeightSpec w;
  if (sigma_tdoa > 0.0) w.tdoa = 1.0 / (sigma_tdoa * sigma_tdoa);
  if (sigma_doa > 0.0) w.doa = 1.0 / (sigma_doa * sigma_doa);
  if (sigma_odo > 0.0) w.odo = 1.0 / (sigma_odo * sigma_odo);
  return w;
}

void WeightSpec::validate() const {
  for (double w : {tdoa, doa, odo}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "weights must be finite and nonnegative");
    }
  }
  if (tdoa <= 0.0 && doa <= 0.0 && odo <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "at least one weight must be positive");
  }
}

Eigen::VectorXd WeightSpec::expand(const RowLayout& rows) const {
  Eigen::VectorXd w(rows.total());
  w.head(rows.tdoa_rows()).setConstant(tdoa);
  w.segment(rows.tdoa_rows(), rows.doa_rows()).setConstant(doa);
  w.tail(rows.odometry_rows()).setConstant(odo);
  return w;
}

// ---- helpers -------------------------------------------------------------------

Eigen::VectorXd retract(const Eigen::VectorXd& x, const Eigen::VectorXd& dx,
                        std::span<const Eigen::Index> rotation_blocks) {
  Eigen::VectorXd out = x + dx;
  for (Eigen::Index b : rotation_blocks) {
    const so3::RotMat r = so3::exp(Vec3(dx.segment<3>(b))) * so3::exp(Vec3(x.segment<3>(b)));
    out.segment<3>(b) = so3::log(r).vector();
  }
  return out;
}

double weighted_cost(const Eigen::VectorXd& residual, const Eigen::VectorXd& weights) {
  return residual.dot(weights.cwiseProduct(residual));
}

namespace {

// D = diag(H)^-1/2, or empty when some diagonal entry vanishes.
std::optional<Eigen::VectorXd> jacobi_scaling(const Eigen::MatrixXd& h) {
  Eigen::VectorXd d = h.diagonal();
  const double max_diag = d.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > max_diag * std::numeric_limits<double>::epsilon()) ) return std::nullopt;
    d[i] = 1.0 / std::sqrt(d[i]);
  }
  return d;
}

}  // namespace

double scaled_condition(const Eigen::MatrixXd& normal_matrix) {
  const auto d = jacobi_scaling(normal_matrix);
  if (!d) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd hs = d->asDiagonal() * normal_matrix * d->asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hs, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

// ---- solver --------------------------------------------------------------------

SolveResult solve(const LeastSquaresProblem& problem, const Eigen::VectorXd& x0,
                  const SolverOptions& options) {
  if (x0.size() != problem.num_parameters()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial guess has the wrong dimension");
  }
  const Eigen::VectorXd& w = problem.row_weights();
  const auto rotations = problem.rotation_blocks();

  SolveResult out{x0, {}};
  SolveReport& rep = out.report;

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(out.x, r, jac);
  if (!r.allFinite() || !jac.allFinite()) {
    throw Error(ErrorCode::kNonFinite, "non-finite residual at the initial guess");
  }
  double cost = weighted_cost(r, w);
  rep.initial_cost = cost;

  constexpr double kMaxLambda = 1e16;
  double lambda = options.lambda0;
  bool relinearize = false;
  Eigen::MatrixXd h;
  Eigen::VectorXd g;
  Eigen::VectorXd scale;

  auto linearize = [&] {
    const Eigen::MatrixXd wj = w.asDiagonal() * jac;
    h.noalias() = jac.transpose() * wj;
    g.noalias() = wj.transpose() * r;
    const auto d = jacobi_scaling(h);
    if (!d) {
      throw SingularProblemError("normal matrix has an empty column",
                                 std::numeric_limits<double>::infinity());
    }
    scale = *d;
  };
  linearize();
  {
    // Rank deficiency at the starting point is a property of the problem.
    const double cond = scaled_condition(h);
    if (!(cond < 1.0 / options.singular_rcond)) {
      std::ostringstream os;
      os << "normal matrix is singular (scaled condition " << cond << ")";
      throw SingularProblemError(os.str(), cond);
    }
  }

  for (rep.iterations = 0; rep.iterations < options.max_iters;) {
    if (relinearize) {
      problem.evaluate(out.x, r, jac);
      linearize();
      relinearize = false;
    }
    if (cost == 0.0) {
      rep.converged = true;
      rep.stop_reason = "zero cost";
      break;
    }
    ++rep.iterations;

    // Solve in Jacobi-scaled coordinates: (D H D + lambda I) y = -D g, dx = D y.
    Eigen::MatrixXd hs = scale.asDiagonal() * h * scale.asDiagonal();
    hs.diagonal().array() += lambda;
    const Eigen::VectorXd gs = scale.cwiseProduct(g);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double rcond = ldlt.info() == Eigen::Success
                             ? pivots.minCoeff() / pivots.cwiseAbs().maxCoeff()
                             : 0.0;
    if (!(rcond > options.singular_rcond)) {
      // Transient singular iterate; damping steps around it.
      lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
      if (lambda > kMaxLambda) {
        const double cond = scaled_condition(h);
        throw SingularProblemError("normal matrix stays singular under damping", cond);
      }
      continue;
    }
    const Eigen::VectorXd dx = scale.cwiseProduct(ldlt.solve(-gs));
    const double step = dx.lpNorm<Eigen::Infinity>();

    if (step < options.step_tol) {
      rep.converged = true;
      rep.stop_reason = "step tolerance";
      break;
    }

    const Eigen::VectorXd candidate = retract(out.x, dx, rotations);
    const Eigen::VectorXd r_new = problem.residual(candidate);
    const double new_cost = r_new.allFinite() ? weighted_cost(r_new, w)
                                              : std::numeric_limits<double>::infinity();

    if (new_cost <= cost) {
      const double rel = (cost - new_cost) / cost;
      out.x = candidate;
      cost = new_cost;
      rep.step_norms.push_back(step);
      relinearize = true;
      lambda = lambda / 10.0 < 1e-12 ? 0.0 : lambda / 10.0;
      if (rel < options.cost_tol) {
        rep.converged = true;
        rep.stop_reason = "cost tolerance";
        break;
      }
    } else {
      lambda = lambda == 0.0 ? 1e-4 : lambda * 10.0;
      if (lambda > kMaxLambda) {
        rep.converged = true;
        rep.stop_reason = "no further decrease";
        break;
      }
    }
  }
  if (!rep.converged) rep.stop_reason = "iteration limit";
  if (relinearize) {
    problem.evaluate(out.x, r, jac);
    linearize();
  }
  rep.final_cost = cost;
  rep.condition = scaled_condition(h);
  return out;
}

// ---- joint problem -------------------------------------------------------------

JointProblem::JointProblem(const MeasurementBundle& meas, const WeightSpec& weights)
    : meas_(meas), layout_{meas.n_arrays, meas.n_events} {
  weights.validate();
  weights_ = weights.expand(RowLayout{meas.n_arrays, meas.n_events});
  rotations_ = layout_.rotation_blocks();
}

Eigen::VectorXd JointProblem::residual(const Eigen::VectorXd& x) const {
  return hybridcal::residual(ParameterVector(layout_, x), meas_);
}

void JointProblem::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residual,
                            Eigen::MatrixXd& jacobian) const {
  ResidualJacobian rj = residual_and_jacobian(ParameterVector(layout_, x), meas_);
  residual = std::move(rj.residual);
  jacobian = std::move(rj.jacobian);
}

}  // namespace hybridcal
