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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hybridcal/error.hpp"
#include "hybridcal/gn_solver.hpp"
#include "hybridcal/scenario.hpp"
#include "test_util.hpp"

using namespace hybridcal;

namespace {

// r(a, b) = [a + b - 1, 2a + 2b - 2]: a and b are the same unknown twice.
class DuplicateUnknown final : public LeastSquaresProblem {
 public:
  Eigen::Index num_parameters() const override { return 2; }
  const Eigen::VectorXd& row_weights() const override { return w_; }
  Eigen::VectorXd residual(const Eigen::VectorXd& x) const override {
    return Eigen::Vector2d(x[0] + x[1] - 1.0, 2 * x[0] + 2 * x[1] - 2.0);
  }
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) const override {
    r = residual(x);
    j.resize(2, 2);
    j << 1, 1, 2, 2;
  }

 private:
  Eigen::VectorXd w_ = Eigen::VectorXd::Ones(2);
};

// Rosenbrock as least squares: r = [10 (y - x^2), 1 - x].
class Rosenbrock final : public LeastSquaresProblem {
 public:
  Eigen::Index num_parameters() const override { return 2; }
  const Eigen::VectorXd& row_weights() const override { return w_; }
  Eigen::VectorXd residual(const Eigen::VectorXd& x) const override {
    return Eigen::Vector2d(10 * (x[1] - x[0] * x[0]), 1 - x[0]);
  }
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) const override {
    r = residual(x);
    j.resize(2, 2);
    j << -20 * x[0], 10, -1, 0;
  }

 private:
  Eigen::VectorXd w_ = Eigen::VectorXd::Ones(2);
};

class NanResidual final : public LeastSquaresProblem {
 public:
  Eigen::Index num_parameters() const override { return 1; }
  const Eigen::VectorXd& row_weights() const override { return w_; }
  Eigen::VectorXd residual(const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Constant(1, std::nan(""));
  }
  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) const override {
    r = residual(x);
    j = Eigen::MatrixXd::Ones(1, 1);
  }

 private:
  Eigen::VectorXd w_ = Eigen::VectorXd::Ones(1);
};

struct Noiseless {
  ScenarioConfig cfg;
  GroundTruth gt;
  MeasurementBundle meas;
};

Noiseless noiseless(TrajectoryId id, std::uint64_t seed) {
  Noiseless s;
  s.cfg = ScenarioConfig::preset(id);
  s.cfg.seed = seed;
  s.cfg.noise = {0, 0, 0};
  s.gt = generate_scenario(s.cfg);
  s.meas = synthesize_measurements(s.gt, s.cfg);
  return s;
}

// Moves every array by 10 cm, turns it by 5 degrees and shifts its clock by 10 ms.
ParameterVector perturb(const ParameterVector& truth, std::mt19937_64& rng) {
  ParameterVector p = truth;
  const double deg = std::numbers::pi / 180.0;
  for (int i = 1; i < p.n_arrays(); ++i) {
    ArrayState a = p.array(i);
    a.position += hctest::random_vec(rng, -1, 1).normalized() * 0.10;
    const Vec3 axis = hctest::random_vec(rng, -1, 1).normalized();
    a.orientation = so3::log(so3::exp(Vec3(axis * 5 * deg)) * so3::exp(a.orientation));
    a.time_offset += 0.010;
    p.set_array(i, a);
  }
  return p;
}

}  // namespace

TEST_CASE("weights from sigmas are inverse variances with per-component fallback") {
  const WeightSpec w = WeightSpec::from_sigmas(1e-4, 0.1, 0.03);
  CHECK(w.tdoa == doctest::Approx(1e8));
  CHECK(w.doa == doctest::Approx(100.0));
  CHECK(w.odo == doctest::Approx(1.0 / 9e-4));
  const WeightSpec f = WeightSpec::from_sigmas(0.0, 0.1, 0.0);
  CHECK(f.tdoa == 1e6);
  CHECK(f.doa == doctest::Approx(100.0));
  CHECK(f.odo == 1e2);
  CHECK_THROWS_AS((WeightSpec{-1, 1, 1}.validate()), Error);
  CHECK_THROWS_AS((WeightSpec{0, 0, 0}.validate()), Error);
  CHECK_NOTHROW((WeightSpec{0, 1, 0}.validate()));
}

TEST_CASE("weights expand block-wise over the stacked rows") {
  const RowLayout rows{3, 4};
  const Eigen::VectorXd w = WeightSpec{1, 2, 3}.expand(rows);
  REQUIRE(w.size() == rows.total());
  CHECK((w.head(rows.tdoa_rows()).array() == 1.0).all());
  CHECK((w.segment(rows.tdoa_rows(), rows.doa_rows()).array() == 2.0).all());
  CHECK((w.tail(rows.odometry_rows()).array() == 3.0).all());
  CHECK(rows.tdoa_rows() == 2 * 4 * 3 - 4 - 3);
}

TEST_CASE("retraction composes rotations on the left") {
  const Vec3 phi(0.4, -0.3, 0.2), d(0.01, 0.02, -0.03);
  Eigen::VectorXd x(4), dx(4);
  x << 1.0, phi;
  dx << 0.5, d;
  const std::vector<Eigen::Index> blocks{1};
  const Eigen::VectorXd y = retract(x, dx, blocks);
  CHECK(y[0] == 1.5);
  const Mat3 expect = hctest::quaternion_rotation(d) * hctest::quaternion_rotation(phi);
  CHECK((hctest::quaternion_rotation(y.segment<3>(1)) - expect).norm() < 1e-14);
}

TEST_CASE("a duplicated unknown is reported as singular") {
  const DuplicateUnknown p;
  try {
    solve(p, Eigen::Vector2d(0.3, 0.1));
    FAIL("expected a singular problem");
  } catch (const SingularProblemError& e) {
    CHECK(e.code() == ErrorCode::kSingularProblem);
    CHECK(e.condition() > 1e13);
  }
}

TEST_CASE("non-finite residuals are rejected") {
  const NanResidual p;
  try {
    solve(p, Eigen::VectorXd::Zero(1));
    FAIL("expected a non-finite error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
  }
  CHECK_THROWS_AS(solve(Rosenbrock{}, Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("damping carries Gauss-Newton through a curved valley") {
  const Rosenbrock p;
  const SolveResult res = solve(p, Eigen::Vector2d(-1.2, 1.0));
  CHECK(res.report.converged);
  CHECK((res.x - Eigen::Vector2d(1, 1)).norm() < 1e-8);
  CHECK(res.report.final_cost < 1e-20);
  CHECK(res.report.final_cost <= res.report.initial_cost);
}

TEST_CASE("ground truth is a fixed point of the joint problem") {
  const Noiseless s = noiseless(TrajectoryId::kTraj1, 4);
  const JointProblem problem(s.meas, WeightSpec{});
  const SolveResult res = solve(problem, s.gt.parameters().values());
  CHECK(res.report.converged);
  CHECK(res.report.iterations <= 1);
  for (double step : res.report.step_norms) CHECK(step < 1e-10);
  CHECK((res.x - s.gt.parameters().values()).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("joint problem recovers the truth from a perturbed start") {
  std::mt19937_64 rng(12);
  for (auto id : {TrajectoryId::kTraj1, TrajectoryId::kTraj2, TrajectoryId::kTraj3}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Noiseless s = noiseless(id, seed);
      const ParameterVector truth = s.gt.parameters();
      const JointProblem problem(s.meas, WeightSpec{});
      const SolveResult res = solve(problem, perturb(truth, rng).values());
      REQUIRE(res.report.converged);
      REQUIRE(res.report.final_cost < 1e-18);
      const ParameterVector est(truth.layout(), res.x);
      for (int i = 1; i < est.n_arrays(); ++i) {
        REQUIRE((est.array(i).position - truth.array(i).position).norm() < 1e-6);
        REQUIRE(so3::angle_between(so3::exp(est.array(i).orientation),
                                   so3::exp(truth.array(i).orientation)) < 1e-6);
      }
      // Accepted steps never increase the cost, so the trace of step norms
      // ends with the fine steps of the quadratic phase.
      REQUIRE(!res.report.step_norms.empty());
      REQUIRE(res.report.step_norms.back() < 1e-6);
    }
  }
}

TEST_CASE("accepted costs are monotone and global weight scale is irrelevant") {
  ScenarioConfig cfg = ScenarioConfig::preset(TrajectoryId::kTraj3);
  cfg.seed = 2;
  cfg.noise = {1e-4, 0.1, 0.03};
  const GroundTruth gt = generate_scenario(cfg);
  const MeasurementBundle m = synthesize_measurements(gt, cfg);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x0 = perturb(gt.parameters(), rng).values();
  const WeightSpec w = WeightSpec::from_sigmas(1e-4, 0.1, 0.03);

  const JointProblem p1(m, w);
  const JointProblem p4(m, WeightSpec{4 * w.tdoa, 4 * w.doa, 4 * w.odo});
  const SolveResult a = solve(p1, x0), b = solve(p4, x0);
  CHECK(a.report.converged);
  CHECK(a.report.final_cost <= a.report.initial_cost);
  CHECK(a.report.iterations == b.report.iterations);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(b.report.final_cost == doctest::Approx(4 * a.report.final_cost).epsilon(1e-9));

  // Replaying the accepted prefix of iterations never raises the cost.
  double prev = a.report.initial_cost;
  for (int iters = 1; iters <= a.report.iterations; ++iters) {
    SolverOptions opts;
    opts.max_iters = iters;
    const double cost = solve(p1, x0, opts).report.final_cost;
    REQUIRE(cost <= prev);
    prev = cost;
  }
}

TEST_CASE("iteration cap is reported as non-convergence") {
  const Rosenbrock p;
  SolverOptions opts;
  opts.max_iters = 2;
  const SolveResult res = solve(p, Eigen::Vector2d(-1.2, 1.0), opts);
  CHECK(!res.report.converged);
  CHECK(res.report.iterations == 2);
  CHECK(res.report.stop_reason == "iteration limit");
}
