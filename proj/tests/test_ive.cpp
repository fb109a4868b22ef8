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
#include "hybridcal/ive.hpp"
#include "hybridcal/scenario.hpp"
#include "test_util.hpp"

using namespace hybridcal;

namespace {

struct Case {
  ScenarioConfig cfg;
  GroundTruth gt;
  MeasurementBundle meas;
};

Case make_case(TrajectoryId id, std::uint64_t seed, NoiseLevels noise = {0, 0, 0}, int n = 5) {
  Case c;
  c.cfg = ScenarioConfig::preset(id);
  c.cfg.seed = seed;
  c.cfg.noise = noise;
  c.cfg.n_arrays = n;
  c.gt = generate_scenario(c.cfg);
  c.meas = synthesize_measurements(c.gt, c.cfg);
  return c;
}

IveOptions options_for(const Case& c) {
  IveOptions o;
  o.workspace = c.gt.workspace;
  o.seed = c.cfg.seed;
  return o;
}

std::vector<Vec3> transform(const Mat3& r, const Vec3& t, const std::vector<Vec3>& pts) {
  std::vector<Vec3> out;
  for (const Vec3& p : pts) out.push_back(r * p + t);
  return out;
}

}  // namespace

TEST_CASE("stage 1 keeps the truth as a fixed point") {
  const Case c = make_case(TrajectoryId::kTraj2, 3);
  const Stage1Estimate truth = Stage1Estimate::from_parameters(c.gt.parameters());
  const Stage1Result res = stage1_solve(c.meas, truth, WeightSpec{}, options_for(c));
  CHECK(res.report.converged);
  CHECK(res.report.iterations <= 1);
  for (int i = 0; i + 1 < truth.n_arrays(); ++i) {
    CHECK((res.estimate.positions[i] - truth.positions[i]).norm() < 1e-10);
  }
}

TEST_CASE("stage 1 from the default initializer recovers noiseless positions") {
  for (auto id : {TrajectoryId::kTraj1, TrajectoryId::kTraj2, TrajectoryId::kTraj3}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Case c = make_case(id, seed);
      const Stage1Result res = stage1_multistart(c.meas, WeightSpec{}, options_for(c));
      for (int i = 1; i < c.cfg.n_arrays; ++i) {
        REQUIRE((res.estimate.positions[i - 1] - c.gt.arrays[i].position).norm() < 1e-5);
        REQUIRE(std::abs(res.estimate.offsets[i - 1] - c.gt.arrays[i].time_offset) < 1e-9);
        REQUIRE(std::abs(res.estimate.drifts[i - 1] - c.gt.arrays[i].drift) < 1e-9);
      }
      REQUIRE(std::abs(res.estimate.reference_drift - c.gt.arrays[0].drift) < 1e-9);
    }
  }
}

TEST_CASE("multistart prefers solutions near the workspace") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    CAPTURE(seed);
    const Case c = make_case(TrajectoryId::kTraj2, 500 + seed, {0.5e-3, 10.0 * std::numbers::pi / 180.0, 0.03});
    const Stage1Result res = stage1_multistart(c.meas, WeightSpec{}, options_for(c));
    Box region = c.gt.workspace;
    const double pad = region.extent().maxCoeff();
    region.lower.array() -= pad;
    region.upper.array() += pad;
    for (const Vec3& x : res.estimate.positions) CHECK(region.contains(x));
  }
}

TEST_CASE("default initializer zeroes clocks and dead-reckons sources") {
  const Case c = make_case(TrajectoryId::kTraj1, 8);
  const IveOptions o = options_for(c);
  const Stage1Estimate init = default_stage1_init(c.meas, o);
  CHECK(init.reference_drift == 0.0);
  for (double v : init.offsets) CHECK(v == 0.0);
  for (double v : init.drifts) CHECK(v == 0.0);
  for (const Vec3& x : init.positions) CHECK(c.gt.workspace.contains(x));
  CHECK((init.sources[0] + o.nominal_range * c.meas.doa_at(0, 0)).norm() < 1e-15);
  for (int j = 0; j + 1 < c.meas.n_events; ++j) {
    CHECK((init.sources[j + 1] - init.sources[j] - c.meas.odometry[j]).norm() < 1e-14);
  }
}

TEST_CASE("reference drift is unobservable without single-array TDOA") {
  const Case c = make_case(TrajectoryId::kTraj3, 1);
  IveOptions o = options_for(c);
  o.use_tdoa_s = false;
  const Stage1Estimate truth = Stage1Estimate::from_parameters(c.gt.parameters());
  try {
    stage1_solve(c.meas, truth, WeightSpec{}, o);
    FAIL("expected a singular problem");
  } catch (const SingularProblemError& e) {
    CHECK(e.condition() > 1e13);
  }
  o.use_tdoa_s = true;
  CHECK(stage1_solve(c.meas, truth, WeightSpec{}, o).report.condition < 1e13);
}

TEST_CASE("too few events for the initializer") {
  ScenarioConfig cfg = ScenarioConfig::preset(TrajectoryId::kTraj1);
  cfg.n_events = 3;
  cfg.noise = {0, 0, 0};
  const GroundTruth gt = generate_scenario(cfg);
  const MeasurementBundle m = synthesize_measurements(gt, cfg);
  try {
    run_ive(m, WeightSpec{});
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
}

TEST_CASE("lifting scales measured directions by estimated ranges") {
  const std::vector<Vec3> s{{0, 0, -2}}, d{{0, 0, 1}};
  const auto lifted = lift_sources_to_array_frame(Vec3::Zero(), s, d);
  CHECK((lifted[0] - Vec3(0, 0, 2)).norm() == 0.0);

  const Case c = make_case(TrajectoryId::kTraj1, 2);
  for (int i = 0; i < c.cfg.n_arrays; ++i) {
    std::vector<Vec3> doa;
    for (int j = 0; j < c.meas.n_events; ++j) doa.push_back(c.meas.doa_at(i, j));
    const ArrayState& a = c.gt.arrays[i];
    const auto local = lift_sources_to_array_frame(a.position, c.gt.trajectory.positions(), doa);
    const Mat3 r = hctest::quaternion_rotation(a.orientation.vector());
    for (int j = 0; j < c.meas.n_events; ++j) {
      REQUIRE((local[j] - r.transpose() * (a.position - c.gt.trajectory.position(j))).norm() <
              1e-12);
    }
    std::vector<Vec3> scaled_src;
    for (const Vec3& p : c.gt.trajectory.positions()) scaled_src.push_back(a.position + 2.5 * (p - a.position));
    const auto scaled = lift_sources_to_array_frame(a.position, scaled_src, doa);
    for (int j = 0; j < c.meas.n_events; ++j) REQUIRE((scaled[j] - 2.5 * local[j]).norm() < 1e-12);
  }
  CHECK_THROWS_AS(lift_sources_to_array_frame(Vec3::UnitX(), std::vector<Vec3>{Vec3::UnitX()},
                                              std::vector<Vec3>{Vec3::UnitZ()}),
                  Error);
}

TEST_CASE("ICP recovers exact rigid transforms") {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 2, 0}, {0, 0, 3}, {1, 1, 1}};
  const RigidAlignment id = icp_orientation(pts, pts);
  CHECK((id.rotation.matrix() - Mat3::Identity()).norm() < 1e-14);
  CHECK(id.translation.norm() < 1e-14);

  const Mat3 r = hctest::quaternion_rotation(Vec3(0.2, -0.1, 0.4));
  const Vec3 t(1, 2, 3);
  const RigidAlignment a = icp_orientation(pts, transform(r, t, pts));
  CHECK((a.rotation.matrix() - r).norm() < 1e-10);
  CHECK((a.translation - t).norm() < 1e-10);
  CHECK(!a.reflection_repaired);
}

TEST_CASE("ICP repairs a mirrored point set into a proper rotation") {
  std::mt19937_64 rng(5);
  std::vector<Vec3> pts;
  for (int k = 0; k < 8; ++k) pts.push_back(hctest::random_vec(rng, -1, 1));
  std::vector<Vec3> mirrored;
  for (const Vec3& p : pts) mirrored.emplace_back(-p.x(), p.y(), p.z());
  const RigidAlignment a = icp_orientation(pts, mirrored);
  CHECK(a.reflection_repaired);
  CHECK(so3::rotation_defect(a.rotation.matrix()) < 1e-12);
  CHECK(a.rotation.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
  const double best = alignment_cost(pts, mirrored, a.rotation.matrix(), a.translation);
  for (int k = 0; k < 1000; ++k) {
    const Mat3 q = hctest::quaternion_rotation(hctest::random_rotvec(rng, std::numbers::pi));
    Vec3 mp = Vec3::Zero(), mq = Vec3::Zero();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      mp += pts[j] / pts.size();
      mq += mirrored[j] / pts.size();
    }
    REQUIRE(best <= alignment_cost(pts, mirrored, q, mq - q * mp) + 1e-12);
  }
}

TEST_CASE("ICP rejects degenerate inputs") {
  const std::vector<Vec3> two{{0, 0, 0}, {1, 0, 0}};
  try {
    icp_orientation(two, two);
    FAIL("expected insufficient data");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientData);
  }
  const std::vector<Vec3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {-1, -1, -1}};
  try {
    icp_orientation(line, line);
    FAIL("expected degenerate geometry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateGeometry);
  }
  CHECK_THROWS_AS(icp_orientation(line, two), Error);
}

TEST_CASE("IVE recovers every parameter on noiseless data") {
  for (auto id : {TrajectoryId::kTraj1, TrajectoryId::kTraj2, TrajectoryId::kTraj3}) {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
      const Case c = make_case(id, seed);
      const IveResult res = run_ive(c.meas, WeightSpec{}, options_for(c));
      const Eigen::VectorXd diff = res.estimate.values() - c.gt.parameters().values();
      REQUIRE(diff.lpNorm<Eigen::Infinity>() < 1e-5);
      REQUIRE(res.alignments.size() == std::size_t(c.cfg.n_arrays - 1));
    }
  }
}

TEST_CASE("IVE handles the two-array minimum") {
  const Case c = make_case(TrajectoryId::kTraj1, 6, {0, 0, 0}, 2);
  const IveResult res = run_ive(c.meas, WeightSpec{}, options_for(c));
  CHECK(res.estimate.n_arrays() == 2);
  CHECK(res.alignments.size() == 1);
  CHECK(so3::angle_between(so3::exp(res.estimate.array(1).orientation),
                           so3::exp(c.gt.arrays[1].orientation)) < 1e-6);
  CHECK(res.estimate.array(0).orientation.angle() == 0.0);
}

TEST_CASE("IVE orientation error grows with DOA noise") {
  const double deg = std::numbers::pi / 180.0;
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (int level = 0; level < 2; ++level) {
      const double s_doa = (level == 0 ? 5.0 : 15.0) * deg;
      const Case c = make_case(TrajectoryId::kTraj1, seed, {0.05e-3, s_doa, 0.03});
      const WeightSpec w = WeightSpec::from_sigmas(0.05e-3, s_doa, 0.03);
      const IveResult res = run_ive(c.meas, w, options_for(c));
      double err = 0.0;
      for (int i = 1; i < 5; ++i) {
        err += so3::angle_between(so3::exp(res.estimate.array(i).orientation),
                                  so3::exp(c.gt.arrays[i].orientation)) / 4;
      }
      (level == 0 ? low : high) += err;
    }
  }
  CHECK(low < high);
}
