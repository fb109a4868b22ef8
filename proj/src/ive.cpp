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

#include "hybridcal/ive.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <sstream>

#include <Eigen/Dense>

#include "hybridcal/error.hpp"
#include "hybridcal/seeding.hpp"

namespace hybridcal {

// ---- Stage1Estimate ----------------------------------------------------------

Stage1Estimate Stage1Estimate::from_parameters(const ParameterVector& p) {
  Stage1Estimate e;
  e.reference_drift = p.array(0).drift;
  for (int i = 1; i < p.n_arrays(); ++i) {
    const ArrayState a = p.array(i);
    e.positions.push_back(a.position);
    e.offsets.push_back(a.time_offset);
    e.drifts.push_back(a.drift);
  }
  e.sources = p.sources();
  return e;
}

ParameterVector Stage1Estimate::to_parameters(std::span<const so3::RotVec> orientations) const {
  ParameterVector p(n_arrays(), n_events());
  p.set_array(0, ArrayState{Vec3::Zero(), {}, 0.0, reference_drift});
  for (int i = 1; i < n_arrays(); ++i) {
    ArrayState a;
    a.position = positions[i - 1];
    a.time_offset = offsets[i - 1];
    a.drift = drifts[i - 1];
    if (!orientations.empty()) a.orientation = orientations[i - 1];
    p.set_array(i, a);
  }
  for (int j = 0; j < n_events(); ++j) p.set_source(j, sources[j]);
  return p;
}

// ---- stage 1 -----------------------------------------------------------------

namespace {

constexpr int kExtraStartFactor = 4;
constexpr std::uint64_t kStartStream = 7;

void check_ive_preconditions(const MeasurementBundle& meas) {
  if (meas.n_events < kMinIveEvents) {
    std::ostringstream os;
    os << "insufficient events: the initializer needs at least " << kMinIveEvents
       << ", bundle has " << meas.n_events;
    throw Error(ErrorCode::kInsufficientData, os.str());
  }
  if (meas.n_arrays < 2) {
    throw Error(ErrorCode::kInsufficientData, "at least two arrays are required");
  }
}

// Reduced problem: [drift_0, (x_i, tau_i, drift_i) for i >= 1, sources].
class Stage1Problem final : public LeastSquaresProblem {
 public:
  Stage1Problem(const MeasurementBundle& meas, const WeightSpec& weights, bool use_tdoa_s)
      : meas_(meas), full_{meas.n_arrays, meas.n_events} {
    weights.validate();
    const RowLayout rows{meas.n_arrays, meas.n_events};
    const Eigen::VectorXd all_weights = weights.expand(rows);
    if (use_tdoa_s) {
      for (Eigen::Index r = 0; r < rows.tdoa_s_rows(); ++r) rows_.push_back(r);
    }
    for (Eigen::Index r = rows.tdoa_s_rows(); r < rows.tdoa_rows(); ++r) rows_.push_back(r);
    for (int j = 0; j < meas.n_events; ++j) {
      for (int a = 0; a < 3; ++a) rows_.push_back(rows.doa_row(0, j) + a);
    }
    for (Eigen::Index r = rows.tdoa_rows() + rows.doa_rows(); r < rows.total(); ++r) {
      rows_.push_back(r);
    }
    weights_ = all_weights(rows_);

    cols_.push_back(full_.drift(0));
    for (int i = 1; i < meas.n_arrays; ++i) {
      for (int a = 0; a < 3; ++a) cols_.push_back(full_.position(i) + a);
      cols_.push_back(full_.time_offset(i));
      cols_.push_back(full_.drift(i));
    }
    for (int j = 0; j < meas.n_events; ++j) {
      for (int a = 0; a < 3; ++a) cols_.push_back(full_.source(j) + a);
    }
  }

  Eigen::Index num_parameters() const override { return Eigen::Index(cols_.size()); }
  const Eigen::VectorXd& row_weights() const override { return weights_; }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const override {
    const Eigen::VectorXd r = hybridcal::residual(expand(x), meas_);
    return r(rows_);
  }

  void evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residual,
                Eigen::MatrixXd& jacobian) const override {
    const ResidualJacobian rj = residual_and_jacobian(expand(x), meas_);
    residual = rj.residual(rows_);
    jacobian = rj.jacobian(rows_, cols_);
  }

  Eigen::VectorXd pack(const Stage1Estimate& e) const {
    return e.to_parameters().values()(cols_);
  }

  Stage1Estimate unpack(const Eigen::VectorXd& x) const {
    return Stage1Estimate::from_parameters(expand(x));
  }

 private:
  ParameterVector expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(full_.size());
    full(cols_) = x;
    return ParameterVector(full_, std::move(full));
  }

  const MeasurementBundle& meas_;
  ParameterLayout full_;
  std::vector<Eigen::Index> rows_;
  std::vector<Eigen::Index> cols_;
  Eigen::VectorXd weights_;
};

// Workspace, or the dead-reckoned sources and the origin padded by 1 m.
Box initialization_box(std::span<const Vec3> sources, const IveOptions& options) {
  Box box;
  if (options.workspace) {
    box = *options.workspace;
  } else {
    box.lower = box.upper = Vec3::Zero();
    for (const Vec3& s : sources) {
      box.lower = box.lower.cwiseMin(s);
      box.upper = box.upper.cwiseMax(s);
    }
    box.lower.array() -= 1.0;
    box.upper.array() += 1.0;
  }
  if (box.empty()) throw Error(ErrorCode::kInvalidArgument, "initialization workspace is empty");
  return box;
}

}  // namespace

Stage1Estimate default_stage1_init(const MeasurementBundle& meas, const IveOptions& options) {
  check_ive_preconditions(meas);
  Stage1Estimate e;
  e.sources.resize(meas.n_events);
  e.sources[0] = -options.nominal_range * meas.doa_at(0, 0);
  for (int j = 0; j + 1 < meas.n_events; ++j) {
    e.sources[j + 1] = e.sources[j] + meas.odometry[j];
  }

  const Box box = initialization_box(e.sources, options);

  std::mt19937_64 rng(options.seed);
  std::array<std::uniform_real_distribution<double>, 3> axis{
      std::uniform_real_distribution<double>(box.lower.x(), box.upper.x()),
      std::uniform_real_distribution<double>(box.lower.y(), box.upper.y()),
      std::uniform_real_distribution<double>(box.lower.z(), box.upper.z())};
  for (int i = 1; i < meas.n_arrays; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = axis[a](rng);
    e.positions.push_back(p);
    e.offsets.push_back(0.0);
    e.drifts.push_back(0.0);
  }
  return e;
}

Stage1Result stage1_solve(const MeasurementBundle& meas, const Stage1Estimate& init,
                          const WeightSpec& weights, const IveOptions& options) {
  check_ive_preconditions(meas);
  meas.validate(1e-6);
  if (init.n_arrays() != meas.n_arrays || init.n_events() != meas.n_events ||
      init.offsets.size() != init.positions.size() ||
      init.drifts.size() != init.positions.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "stage-1 initial guess does not match the bundle");
  }
  const Stage1Problem problem(meas, weights, options.use_tdoa_s);
  SolveResult sol = solve(problem, problem.pack(init), options.solver);
  return {problem.unpack(sol.x), std::move(sol.report)};
}

// ---- stage 2 -----------------------------------------------------------------

std::vector<Vec3> lift_sources_to_array_frame(const Vec3& array_position,
                                              std::span<const Vec3> sources,
                                              std::span<const Vec3> doa) {
  if (sources.size() != doa.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one DOA per source is required");
  }
  std::vector<Vec3> out;
  out.reserve(sources.size());
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const double range = (array_position - sources[j]).norm();
    if (!(range > 1e-9)) {
      throw Error(ErrorCode::kDegenerateGeometry, "source coincides with the array position");
    }
    out.push_back(range * doa[j]);
  }
  return out;
}

double alignment_cost(std::span<const Vec3> local_points, std::span<const Vec3> global_points,
                      const Mat3& rotation, const Vec3& translation) {
  double cost = 0.0;
  for (std::size_t j = 0; j < local_points.size(); ++j) {
    cost += (global_points[j] - rotation * local_points[j] - translation).squaredNorm();
  }
  return cost;
}

RigidAlignment icp_orientation(std::span<const Vec3> local_points,
                               std::span<const Vec3> global_points) {
  if (local_points.size() != global_points.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "point sets must have the same size");
  }
  if (local_points.size() < 3) {
    throw Error(ErrorCode::kInsufficientData, "alignment needs at least three points");
  }
  const double count = static_cast<double>(local_points.size());
  Vec3 local_mean = Vec3::Zero();
  Vec3 global_mean = Vec3::Zero();
  for (std::size_t j = 0; j < local_points.size(); ++j) {
    local_mean += local_points[j];
    global_mean += global_points[j];
  }
  local_mean /= count;
  global_mean /= count;

  Mat3 q = Mat3::Zero();
  for (std::size_t j = 0; j < local_points.size(); ++j) {
    q += (global_points[j] - global_mean) * (local_points[j] - local_mean).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv[1] > 1e-12 * sv[0]) || !(sv[0] > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "point configuration is collinear; rotation is not determined");
  }
  Mat3 v = svd.matrixV();
  RigidAlignment out;
  if ((svd.matrixU() * v.transpose()).determinant() < 0.0) {
    v.col(2) = -v.col(2);
    out.reflection_repaired = true;
  }
  out.rotation = so3::RotMat(svd.matrixU() * v.transpose());
  out.translation = global_mean - out.rotation * local_mean;
  return out;
}

// ---- full initializer ----------------------------------------------------------

Stage1Result stage1_multistart(const MeasurementBundle& meas, const WeightSpec& weights,
                               const IveOptions& options) {
  if (options.starts < 1) throw Error(ErrorCode::kInvalidArgument, "starts must be at least 1");
  // Far-field solutions drift arrays arbitrarily far away at nearly constant
  // cost; starts that keep every array near the sampling box are preferred.
  const int max_starts = kExtraStartFactor * options.starts;
  std::optional<Stage1Result> best, best_plausible;
  std::optional<Error> last_error;
  std::optional<Box> region;
  for (int k = 0; k < max_starts; ++k) {
    if (k >= options.starts && best_plausible) break;
    IveOptions attempt = options;
    attempt.seed = derive_seed(options.seed, kStartStream, static_cast<std::uint64_t>(k));
    try {
      const Stage1Estimate init = default_stage1_init(meas, attempt);
      if (!region) {
        region = initialization_box(init.sources, options);
        const double pad = region->extent().maxCoeff();
        region->lower.array() -= pad;
        region->upper.array() += pad;
      }
      Stage1Result r = stage1_solve(meas, init, weights, attempt);
      const bool plausible = std::all_of(r.estimate.positions.begin(), r.estimate.positions.end(),
                                         [&](const Vec3& x) { return region->contains(x); });
      if (plausible && (!best_plausible || r.report.final_cost < best_plausible->report.final_cost)) {
        best_plausible = r;
      }
      if (!best || r.report.final_cost < best->report.final_cost) best = std::move(r);
    } catch (const SingularProblemError& e) {
      last_error = e;
    } catch (const Error& e) {
      // Anything but a bad starting point is a property of the bundle.
      if (e.code() != ErrorCode::kDegenerateGeometry && e.code() != ErrorCode::kNonFinite) throw;
      last_error = e;
    }
  }
  if (best_plausible) return std::move(*best_plausible);
  if (!best) throw *last_error;
  return std::move(*best);
}

namespace {

IveResult orient_arrays(const MeasurementBundle& meas, Stage1Result s1) {
  const Stage1Estimate& est = s1.estimate;

  std::vector<Vec3> doa(meas.n_events);
  auto doa_row = [&](int i) {
    for (int j = 0; j < meas.n_events; ++j) doa[j] = meas.doa_at(i, j);
    return std::span<const Vec3>(doa);
  };
  const std::vector<Vec3> reference =
      lift_sources_to_array_frame(Vec3::Zero(), est.sources, doa_row(0));

  IveResult out;
  std::vector<so3::RotVec> orientations;
  for (int i = 1; i < meas.n_arrays; ++i) {
    const std::vector<Vec3> local =
        lift_sources_to_array_frame(est.positions[i - 1], est.sources, doa_row(i));
    RigidAlignment a = icp_orientation(local, reference);
    orientations.push_back(so3::log(a.rotation));
    out.alignments.push_back(std::move(a));
  }
  out.estimate = est.to_parameters(orientations);
  out.stage1 = std::move(s1.report);
  return out;
}

}  // namespace

IveResult run_ive(const MeasurementBundle& meas, const Stage1Estimate& init,
                  const WeightSpec& weights, const IveOptions& options) {
  return orient_arrays(meas, stage1_solve(meas, init, weights, options));
}

IveResult run_ive(const MeasurementBundle& meas, const WeightSpec& weights,
                  const IveOptions& options) {
  return orient_arrays(meas, stage1_multistart(meas, weights, options));
}

}  // namespace hybridcal
