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

#include "hybridcal/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "hybridcal/error.hpp"

namespace hybridcal::io {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join(const std::string& path, std::string_view key) {
  return path + "/" + std::string(key);
}
std::string join(const std::string& path, std::size_t index) {
  return path + "/" + std::to_string(index);
}

// ---- readers -------------------------------------------------------------------

const json* find(const json& obj, std::string_view key) {
  if (!obj.is_object()) return nullptr;
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& member(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const json* j = find(obj, key);
  if (!j) throw ConfigError(join(path, key), "missing required field");
  return *j;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

// Metrics use null for "not available".
double number_or_nan(const json& j, const std::string& path) {
  return j.is_null() ? kNaN : number(j, path);
}

double number(const json& obj, std::string_view key, const std::string& path) {
  return number(member(obj, key, path), join(path, key));
}

double number_or(const json& obj, std::string_view key, const std::string& path, double fallback) {
  const json* j = find(obj, key);
  return j ? number(*j, join(path, key)) : fallback;
}

int integer(const json& obj, std::string_view key, const std::string& path) {
  const json& j = member(obj, key, path);
  if (!j.is_number_integer()) throw ConfigError(join(path, key), "expected an integer");
  return j.get<int>();
}

int integer_or(const json& obj, std::string_view key, const std::string& path, int fallback) {
  return find(obj, key) ? integer(obj, key, path) : fallback;
}

std::uint64_t unsigned_or(const json& obj, std::string_view key, const std::string& path,
                          std::uint64_t fallback) {
  const json* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_number_unsigned() && !(j->is_number_integer() && j->get<std::int64_t>() >= 0)) {
    throw ConfigError(join(path, key), "expected a nonnegative integer");
  }
  return j->get<std::uint64_t>();
}

bool boolean_or(const json& obj, std::string_view key, const std::string& path, bool fallback) {
  const json* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_boolean()) throw ConfigError(join(path, key), "expected true or false");
  return j->get<bool>();
}

std::string string(const json& obj, std::string_view key, const std::string& path) {
  const json& j = member(obj, key, path);
  if (!j.is_string()) throw ConfigError(join(path, key), "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& path,
                            std::optional<std::size_t> expected = std::nullopt) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  if (expected && j.size() != *expected) {
    throw ConfigError(path, "expected " + std::to_string(*expected) + " entries, found " +
                                std::to_string(j.size()));
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], join(path, k)));
  return out;
}

Vec3 vec3(const json& j, const std::string& path) {
  const std::vector<double> v = numbers(j, path, 3);
  return Vec3(v[0], v[1], v[2]);
}

std::vector<Vec3> vec3_list(const json& j, const std::string& path, std::size_t count) {
  const std::vector<double> flat = numbers(j, path, 3 * count);
  std::vector<Vec3> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = Vec3(flat[3 * k], flat[3 * k + 1], flat[3 * k + 2]);
  return out;
}

json parse_document(const std::string& text, std::string_view kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "document must be a JSON object");
  const json* version = find(doc, "schema_version");
  if (!version || !version->is_number_integer()) {
    throw ConfigError("/schema_version", "missing or not an integer");
  }
  if (version->get<int>() != kSchemaVersion) {
    throw ConfigError("/schema_version", "unsupported version " + version->dump());
  }
  if (const json* k = find(doc, "kind"); k && (!k->is_string() || k->get<std::string>() != kind)) {
    throw ConfigError("/kind", "expected \"" + std::string(kind) + "\"");
  }
  return doc;
}

json header(std::string_view kind) {
  return json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

// ---- shared pieces -------------------------------------------------------------

json flat(const std::vector<Vec3>& v) {
  json out = json::array();
  for (const Vec3& p : v) {
    for (int a = 0; a < 3; ++a) out.push_back(p[a]);
  }
  return out;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const ArrayState& a) {
  return json{{"position_m", to_json(a.position)},
              {"rotation_vector_rad", to_json(a.orientation.vector())},
              {"time_offset_s", a.time_offset},
              {"drift", a.drift}};
}

ArrayState array_state(const json& j, const std::string& path) {
  ArrayState a;
  a.position = vec3(member(j, "position_m", path), join(path, "position_m"));
  a.orientation = so3::RotVec(vec3(member(j, "rotation_vector_rad", path),
                                   join(path, "rotation_vector_rad")));
  a.time_offset = number(j, "time_offset_s", path);
  a.drift = number(j, "drift", path);
  return a;
}

json to_json(const ParameterVector& p) {
  json arrays = json::array();
  for (const ArrayState& a : p.arrays()) arrays.push_back(to_json(a));
  return json{{"n_arrays", p.n_arrays()},
              {"n_events", p.n_events()},
              {"arrays", arrays},
              {"sources_m", flat(p.sources())},
              {"values", std::vector<double>(p.values().data(), p.values().data() + p.values().size())}};
}

ParameterVector parameter_vector(const json& j, const std::string& path) {
  const int n = integer(j, "n_arrays", path);
  const int k = integer(j, "n_events", path);
  if (n < 2 || k < 1) throw ConfigError(path, "invalid dimensions");
  const ParameterLayout layout{n, k};
  const std::vector<double> v =
      numbers(member(j, "values", path), join(path, "values"), std::size_t(layout.size()));
  return ParameterVector(layout, Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
}

json to_json(const NoiseLevels& n) {
  return json{{"sigma_tdoa_s", n.tdoa}, {"sigma_doa_rad", n.doa}, {"sigma_odo_m", n.odo}};
}

// Accepts SI keys or the ms/deg forms used in hand-written configs.
NoiseLevels noise_levels(const json& j, const std::string& path) {
  NoiseLevels n;
  if (find(j, "sigma_tdoa_s")) {
    n.tdoa = number(j, "sigma_tdoa_s", path);
  } else {
    n.tdoa = number_or(j, "sigma_tdoa_ms", path, 0.0) * 1e-3;
  }
  if (find(j, "sigma_doa_rad")) {
    n.doa = number(j, "sigma_doa_rad", path);
  } else {
    n.doa = number_or(j, "sigma_doa_deg", path, 0.0) * kDeg;
  }
  n.odo = number_or(j, "sigma_odo_m", path, 3e-2);
  if (n.tdoa < 0.0 || n.doa < 0.0 || n.odo < 0.0) {
    throw ConfigError(path, "noise levels must be nonnegative");
  }
  return n;
}

json to_json(const Box& b) {
  return json{{"lower_m", to_json(b.lower)}, {"upper_m", to_json(b.upper)}};
}

Box box(const json& j, const std::string& path) {
  Box b;
  b.lower = vec3(member(j, "lower_m", path), join(path, "lower_m"));
  b.upper = vec3(member(j, "upper_m", path), join(path, "upper_m"));
  if (b.empty()) throw ConfigError(path, "box is empty");
  return b;
}

json to_json(const SolverOptions& o) {
  return json{{"max_iters", o.max_iters},
              {"cost_tol", o.cost_tol},
              {"step_tol", o.step_tol},
              {"lambda0", o.lambda0},
              {"singular_rcond", o.singular_rcond}};
}

SolverOptions solver_options(const json& j, const std::string& path) {
  SolverOptions o;
  o.max_iters = integer_or(j, "max_iters", path, o.max_iters);
  o.cost_tol = number_or(j, "cost_tol", path, o.cost_tol);
  o.step_tol = number_or(j, "step_tol", path, o.step_tol);
  o.lambda0 = number_or(j, "lambda0", path, o.lambda0);
  o.singular_rcond = number_or(j, "singular_rcond", path, o.singular_rcond);
  if (o.max_iters < 1) throw ConfigError(join(path, "max_iters"), "must be at least 1");
  if (o.cost_tol < 0.0 || o.step_tol < 0.0 || o.lambda0 < 0.0) {
    throw ConfigError(path, "tolerances and lambda0 must be nonnegative");
  }
  return o;
}

json to_json(const WeightSpec& w) {
  return json{{"w_tdoa", w.tdoa}, {"w_doa", w.doa}, {"w_odo", w.odo}};
}

WeightSpec weight_spec(const json& j, const std::string& path) {
  WeightSpec w{number(j, "w_tdoa", path), number(j, "w_doa", path), number(j, "w_odo", path)};
  try {
    w.validate();
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return w;
}

json to_json(const CalibrationConfig& c) {
  json ive{{"starts", c.ive.starts},
           {"nominal_range_m", c.ive.nominal_range},
           {"seed", c.ive.seed},
           {"use_tdoa_s", c.ive.use_tdoa_s},
           {"solver", to_json(c.ive.solver)}};
  if (c.ive.workspace) ive["workspace"] = to_json(*c.ive.workspace);
  json out{{"ive", ive}, {"joint_solver", to_json(c.joint)}};
  out["weights"] = c.weights ? to_json(*c.weights) : json(nullptr);
  return out;
}

CalibrationConfig calibration_config(const json& j, const std::string& path) {
  CalibrationConfig c;
  if (const json* w = find(j, "weights"); w && !w->is_null()) {
    c.weights = weight_spec(*w, join(path, "weights"));
  }
  if (const json* ive = find(j, "ive")) {
    const std::string p = join(path, "ive");
    c.ive.starts = integer_or(*ive, "starts", p, c.ive.starts);
    if (c.ive.starts < 1) throw ConfigError(join(p, "starts"), "must be at least 1");
    c.ive.nominal_range = number_or(*ive, "nominal_range_m", p, c.ive.nominal_range);
    c.ive.seed = unsigned_or(*ive, "seed", p, c.ive.seed);
    c.ive.use_tdoa_s = boolean_or(*ive, "use_tdoa_s", p, c.ive.use_tdoa_s);
    if (const json* s = find(*ive, "solver")) c.ive.solver = solver_options(*s, join(p, "solver"));
    if (const json* b = find(*ive, "workspace")) c.ive.workspace = box(*b, join(p, "workspace"));
  }
  if (const json* s = find(j, "joint_solver")) c.joint = solver_options(*s, join(path, "joint_solver"));
  return c;
}

json to_json(const SolveReport& r) {
  return json{{"iterations", r.iterations},
              {"initial_cost", r.initial_cost},
              {"final_cost", r.final_cost},
              {"converged", r.converged},
              {"stop_reason", r.stop_reason},
              {"step_norms", r.step_norms},
              {"condition", std::isfinite(r.condition) ? json(r.condition) : json("inf")}};
}

SolveReport solve_report(const json& j, const std::string& path) {
  SolveReport r;
  r.iterations = integer(j, "iterations", path);
  r.initial_cost = number(j, "initial_cost", path);
  r.final_cost = number(j, "final_cost", path);
  r.converged = boolean_or(j, "converged", path, false);
  r.stop_reason = string(j, "stop_reason", path);
  r.step_norms = numbers(member(j, "step_norms", path), join(path, "step_norms"));
  const json& cond = member(j, "condition", path);
  r.condition = cond.is_string() ? std::numeric_limits<double>::infinity()
                                 : number(cond, join(path, "condition"));
  return r;
}

json to_json(const ErrorMetrics& m) {
  return json{{"location_m", m.location}, {"angle_rad", m.angle}, {"offset_s", m.offset},
              {"drift", m.drift}};
}

ErrorMetrics error_metrics(const json& j, const std::string& path) {
  ErrorMetrics m;
  m.location = number_or_nan(member(j, "location_m", path), join(path, "location_m"));
  m.angle = number_or_nan(member(j, "angle_rad", path), join(path, "angle_rad"));
  m.offset = number_or_nan(member(j, "offset_s", path), join(path, "offset_s"));
  m.drift = number_or_nan(member(j, "drift", path), join(path, "drift"));
  return m;
}

TrajectoryId trajectory_id(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a trajectory name");
  const auto id = parse_trajectory(j.get<std::string>());
  if (!id) throw ConfigError(path, "unknown trajectory \"" + j.get<std::string>() + "\"");
  return *id;
}

}  // namespace

// ---- scenario config -----------------------------------------------------------

std::string dump_scenario_config(const ScenarioConfig& cfg) {
  json j = header("scenario_config");
  j["trajectory"] = to_string(cfg.trajectory);
  j["n_arrays"] = cfg.n_arrays;
  j["n_events"] = cfg.n_events;
  j["extent_m"] = to_json(cfg.extent);
  j["noise"] = json{{"sigma_tdoa_ms", cfg.noise.tdoa * 1e3},
                    {"sigma_doa_deg", cfg.noise.doa / kDeg},
                    {"sigma_odo_m", cfg.noise.odo}};
  j["seed"] = cfg.seed;
  j["tau_max_s"] = cfg.tau_max;
  j["delta_max"] = cfg.delta_max;
  j["speed_of_sound"] = cfg.speed_of_sound;
  return j.dump(2) + "\n";
}

ScenarioConfig parse_scenario_config(const std::string& text) {
  const json j = parse_document(text, "scenario_config");
  const std::string root;
  const TrajectoryId id = trajectory_id(member(j, "trajectory", root), "/trajectory");
  ScenarioConfig cfg = ScenarioConfig::preset(id);
  cfg.n_arrays = integer_or(j, "n_arrays", root, cfg.n_arrays);
  if (id == TrajectoryId::kCustom) {
    cfg.n_events = integer(j, "n_events", root);
    cfg.extent = vec3(member(j, "extent_m", root), "/extent_m");
  } else {
    if (find(j, "n_events") && integer(j, "n_events", root) != cfg.n_events) {
      throw ConfigError("/n_events", "does not match the " + std::string(to_string(id)) +
                                         " preset (" + std::to_string(cfg.n_events) + ")");
    }
  }
  if (const json* n = find(j, "noise")) cfg.noise = noise_levels(*n, "/noise");
  cfg.seed = unsigned_or(j, "seed", root, cfg.seed);
  cfg.tau_max = number_or(j, "tau_max_s", root, cfg.tau_max);
  cfg.delta_max = number_or(j, "delta_max", root, cfg.delta_max);
  cfg.speed_of_sound = number_or(j, "speed_of_sound", root, cfg.speed_of_sound);
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("", e.what());
  }
  return cfg;
}

// ---- bundle --------------------------------------------------------------------

std::string dump_bundle(const BundleFile& bundle) {
  const MeasurementBundle& m = bundle.meas;
  json j = header("measurement_bundle");
  j["n_arrays"] = m.n_arrays;
  j["n_events"] = m.n_events;
  j["speed_of_sound"] = m.speed_of_sound;
  j["intervals_s"] = m.intervals;
  json ts = json::array(), tm = json::array();
  for (int i = 0; i < m.tdoa_s.rows(); ++i) {
    for (int k = 0; k < m.tdoa_s.cols(); ++k) ts.push_back(m.tdoa_s(i, k));
  }
  for (int i = 0; i < m.tdoa_m.rows(); ++i) {
    for (int k = 0; k < m.tdoa_m.cols(); ++k) tm.push_back(m.tdoa_m(i, k));
  }
  j["tdoa_s"] = ts;
  j["tdoa_m"] = tm;
  j["doa"] = flat(m.doa);
  j["odometry_m"] = flat(m.odometry);
  if (bundle.noise) j["noise"] = to_json(*bundle.noise);
  if (bundle.truth) {
    json arrays = json::array();
    for (const ArrayState& a : bundle.truth->arrays) arrays.push_back(to_json(a));
    j["ground_truth"] = json{{"arrays", arrays},
                             {"sources_m", flat(bundle.truth->trajectory.positions())}};
  }
  if (bundle.workspace) j["workspace"] = to_json(*bundle.workspace);
  return j.dump(2) + "\n";
}

BundleFile parse_bundle(const std::string& text) {
  const json j = parse_document(text, "measurement_bundle");
  const std::string root;
  BundleFile out;
  MeasurementBundle& m = out.meas;
  const int n = integer(j, "n_arrays", root);
  const int k = integer(j, "n_events", root);
  if (n < 2) throw ConfigError("/n_arrays", "at least two arrays are required");
  if (k < 1) throw ConfigError("/n_events", "at least one event is required");
  m = MeasurementBundle::zeros(n, k);
  m.speed_of_sound = number(j, "speed_of_sound", root);
  if (!(m.speed_of_sound > 0.0)) throw ConfigError("/speed_of_sound", "must be positive");
  m.intervals = numbers(member(j, "intervals_s", root), "/intervals_s", std::size_t(k - 1));
  for (std::size_t q = 0; q < m.intervals.size(); ++q) {
    if (!(m.intervals[q] > 0.0)) throw ConfigError(join("/intervals_s", q), "must be positive");
  }
  const std::vector<double> ts =
      numbers(member(j, "tdoa_s", root), "/tdoa_s", std::size_t(n) * (k - 1));
  const std::vector<double> tm =
      numbers(member(j, "tdoa_m", root), "/tdoa_m", std::size_t(n - 1) * k);
  for (int i = 0; i < n; ++i) {
    for (int q = 0; q + 1 < k; ++q) m.tdoa_s(i, q) = ts[std::size_t(i) * (k - 1) + q];
  }
  for (int i = 0; i + 1 < n; ++i) {
    for (int q = 0; q < k; ++q) m.tdoa_m(i, q) = tm[std::size_t(i) * k + q];
  }
  m.doa = vec3_list(member(j, "doa", root), "/doa", std::size_t(n) * k);
  for (std::size_t q = 0; q < m.doa.size(); ++q) {
    if (std::abs(m.doa[q].norm() - 1.0) > 1e-6) {
      throw ConfigError("/doa/" + std::to_string(3 * q), "DOA entry (array " +
                                                          std::to_string(q / k) + ", event " +
                                                          std::to_string(q % k) +
                                                          ") is not a unit vector");
    }
  }
  m.odometry = vec3_list(member(j, "odometry_m", root), "/odometry_m", std::size_t(k - 1));

  if (const json* noise = find(j, "noise")) out.noise = noise_levels(*noise, "/noise");
  if (const json* gt = find(j, "ground_truth")) {
    const std::string p = "/ground_truth";
    const json& arrays = member(*gt, "arrays", p);
    if (!arrays.is_array() || arrays.size() != std::size_t(n)) {
      throw ConfigError(join(p, "arrays"), "expected one entry per array");
    }
    GroundTruth truth;
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      truth.arrays.push_back(array_state(arrays[i], join(join(p, "arrays"), i)));
    }
    try {
      truth.trajectory = SourceTrajectory(
          vec3_list(member(*gt, "sources_m", p), join(p, "sources_m"), std::size_t(k)),
          m.intervals);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(join(p, "sources_m"), e.what());
    }
    out.truth = std::move(truth);
  }
  if (const json* b = find(j, "workspace")) {
    out.workspace = box(*b, "/workspace");
    if (out.truth) out.truth->workspace = *out.workspace;
  }
  return out;
}

// ---- calibration report ----------------------------------------------------------

std::string dump_calibration(const CalibrationFile& file) {
  const RunReport& r = file.report;
  json j = header("calibration_report");
  j["config"] = to_json(file.config);
  j["weights"] = to_json(r.weights);
  j["ive_estimate"] = to_json(r.ive_estimate);
  j["estimate"] = to_json(r.estimate);
  j["solver"] = json{{"stage1", to_json(r.stage1)}, {"joint", to_json(r.joint)}};
  j["cost_regressed"] = r.cost_regressed;
  if (r.ive_errors || r.final_errors) {
    json errors = json::object();
    if (r.ive_errors) errors["ive"] = to_json(*r.ive_errors);
    if (r.final_errors) errors["final"] = to_json(*r.final_errors);
    j["errors"] = errors;
  }
  return j.dump(2) + "\n";
}

CalibrationFile parse_calibration(const std::string& text) {
  const json j = parse_document(text, "calibration_report");
  const std::string root;
  CalibrationFile f;
  f.config = calibration_config(member(j, "config", root), "/config");
  RunReport& r = f.report;
  r.weights = weight_spec(member(j, "weights", root), "/weights");
  r.ive_estimate = parameter_vector(member(j, "ive_estimate", root), "/ive_estimate");
  r.estimate = parameter_vector(member(j, "estimate", root), "/estimate");
  const json& solver = member(j, "solver", root);
  r.stage1 = solve_report(member(solver, "stage1", "/solver"), "/solver/stage1");
  r.joint = solve_report(member(solver, "joint", "/solver"), "/solver/joint");
  r.cost_regressed = boolean_or(j, "cost_regressed", root, false);
  if (const json* e = find(j, "errors")) {
    if (const json* ive = find(*e, "ive")) r.ive_errors = error_metrics(*ive, "/errors/ive");
    if (const json* fin = find(*e, "final")) r.final_errors = error_metrics(*fin, "/errors/final");
  }
  return f;
}

// ---- Monte Carlo grid / aggregate ------------------------------------------------------

namespace {

json grid_json(const MonteCarloGrid& g) {
  json trajs = json::array();
  for (TrajectoryId t : g.trajectories) trajs.push_back(to_string(t));
  return json{{"sigma_tdoa_s", g.sigma_tdoa},
              {"sigma_doa_rad", g.sigma_doa},
              {"trajectories", trajs},
              {"runs_per_cell", g.runs_per_cell},
              {"base_seed", g.base_seed},
              {"combine_trajectories", g.combine_trajectories},
              {"n_arrays", g.n_arrays},
              {"sigma_odo_m", g.sigma_odo},
              {"speed_of_sound", g.speed_of_sound},
              {"threads", g.threads},
              {"calibration", to_json(g.calibration)}};
}

MonteCarloGrid grid_from_json(const json& j, const std::string& path) {
  MonteCarloGrid g = MonteCarloGrid::standard_sweep();
  if (find(j, "sigma_tdoa_s")) {
    g.sigma_tdoa = numbers(j["sigma_tdoa_s"], join(path, "sigma_tdoa_s"));
  } else if (find(j, "sigma_tdoa_ms")) {
    g.sigma_tdoa = numbers(j["sigma_tdoa_ms"], join(path, "sigma_tdoa_ms"));
    for (double& s : g.sigma_tdoa) s *= 1e-3;
  }
  if (find(j, "sigma_doa_rad")) {
    g.sigma_doa = numbers(j["sigma_doa_rad"], join(path, "sigma_doa_rad"));
  } else if (find(j, "sigma_doa_deg")) {
    g.sigma_doa = numbers(j["sigma_doa_deg"], join(path, "sigma_doa_deg"));
    for (double& s : g.sigma_doa) s *= kDeg;
  }
  if (const json* t = find(j, "trajectories")) {
    if (!t->is_array() || t->empty()) {
      throw ConfigError(join(path, "trajectories"), "expected a nonempty array");
    }
    g.trajectories.clear();
    for (std::size_t k = 0; k < t->size(); ++k) {
      g.trajectories.push_back(trajectory_id((*t)[k], join(join(path, "trajectories"), k)));
    }
  }
  g.runs_per_cell = integer_or(j, "runs_per_cell", path, g.runs_per_cell);
  g.base_seed = unsigned_or(j, "base_seed", path, g.base_seed);
  g.combine_trajectories = boolean_or(j, "combine_trajectories", path, g.combine_trajectories);
  g.n_arrays = integer_or(j, "n_arrays", path, g.n_arrays);
  g.sigma_odo = number_or(j, "sigma_odo_m", path, g.sigma_odo);
  g.speed_of_sound = number_or(j, "speed_of_sound", path, g.speed_of_sound);
  g.threads = static_cast<unsigned>(unsigned_or(j, "threads", path, g.threads));
  if (const json* c = find(j, "calibration")) {
    g.calibration = calibration_config(*c, join(path, "calibration"));
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
  return g;
}

}  // namespace

std::string dump_grid(const MonteCarloGrid& grid) {
  json j = header("montecarlo_grid");
  j.update(grid_json(grid));
  return j.dump(2) + "\n";
}

MonteCarloGrid parse_grid(const std::string& text) {
  return grid_from_json(parse_document(text, "montecarlo_grid"), "");
}

std::string dump_aggregate(const AggregateReport& report) {
  json j = header("aggregate_report");
  j["grid"] = grid_json(report.grid);
  json cells = json::array();
  for (const CellAggregate& c : report.cells) {
    cells.push_back(json{{"tdoa_index", c.tdoa_index},
                         {"doa_index", c.doa_index},
                         {"sigma_tdoa_s", c.sigma_tdoa},
                         {"sigma_doa_rad", c.sigma_doa},
                         {"trajectory", c.trajectory},
                         {"runs", c.runs},
                         {"failures", c.failures},
                         {"ive", to_json(c.ive)},
                         {"final", to_json(c.final)}});
  }
  j["cells"] = cells;
  json runs = json::array();
  for (const RunRecord& r : report.runs) {
    json rec{{"tdoa_index", r.tdoa_index},
             {"doa_index", r.doa_index},
             {"trajectory", to_string(r.trajectory)},
             {"run", r.run},
             {"seed", r.seed},
             {"ok", r.ok},
             {"failure", r.failure},
             {"ive", to_json(r.ive)},
             {"final", to_json(r.final)},
             {"stage1_iterations", r.stage1_iterations},
             {"joint_iterations", r.joint_iterations}};
    runs.push_back(rec);
  }
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

AggregateReport parse_aggregate(const std::string& text) {
  const json j = parse_document(text, "aggregate_report");
  const std::string root;
  AggregateReport out;
  out.grid = grid_from_json(member(j, "grid", root), "/grid");
  const json& cells = member(j, "cells", root);
  if (!cells.is_array()) throw ConfigError("/cells", "expected an array");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const std::string p = join("/cells", k);
    const json& c = cells[k];
    CellAggregate cell;
    cell.tdoa_index = integer(c, "tdoa_index", p);
    cell.doa_index = integer(c, "doa_index", p);
    cell.sigma_tdoa = number(c, "sigma_tdoa_s", p);
    cell.sigma_doa = number(c, "sigma_doa_rad", p);
    cell.trajectory = string(c, "trajectory", p);
    cell.runs = integer(c, "runs", p);
    cell.failures = integer(c, "failures", p);
    cell.ive = error_metrics(member(c, "ive", p), join(p, "ive"));
    cell.final = error_metrics(member(c, "final", p), join(p, "final"));
    out.cells.push_back(std::move(cell));
  }
  const json& runs = member(j, "runs", root);
  if (!runs.is_array()) throw ConfigError("/runs", "expected an array");
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const std::string p = join("/runs", k);
    const json& r = runs[k];
    RunRecord rec;
    rec.tdoa_index = integer(r, "tdoa_index", p);
    rec.doa_index = integer(r, "doa_index", p);
    rec.trajectory = trajectory_id(member(r, "trajectory", p), join(p, "trajectory"));
    rec.run = integer(r, "run", p);
    rec.seed = unsigned_or(r, "seed", p, 0);
    rec.ok = boolean_or(r, "ok", p, false);
    rec.failure = string(r, "failure", p);
    rec.ive = error_metrics(member(r, "ive", p), join(p, "ive"));
    rec.final = error_metrics(member(r, "final", p), join(p, "final"));
    rec.stage1_iterations = integer(r, "stage1_iterations", p);
    rec.joint_iterations = integer(r, "joint_iterations", p);
    out.runs.push_back(std::move(rec));
  }
  return out;
}

// ---- tables ----------------------------------------------------------------------

namespace {

std::string fixed(double v, int precision) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::string aggregate_csv(const AggregateReport& report) {
  std::ostringstream os;
  os << "sigma_tdoa_ms,sigma_doa_deg,trajectory,runs,failures,stage,"
        "loc_err_cm,angle_err_deg,off_err_1e-4s,dri_err_us\n";
  for (const CellAggregate& c : report.cells) {
    for (const auto& [stage, m] : {std::pair{"ive", &c.ive}, std::pair{"final", &c.final}}) {
      os << fixed(c.sigma_tdoa * 1e3, 4) << ',' << fixed(c.sigma_doa / kDeg, 4) << ','
         << c.trajectory << ',' << c.runs << ',' << c.failures << ',' << stage << ','
         << fixed(m->location_cm(), 6) << ',' << fixed(m->angle_deg(), 6) << ','
         << fixed(m->offset_1e4s(), 6) << ',' << fixed(m->drift_us(), 6) << '\n';
    }
  }
  return os.str();
}

std::string format_aggregate(const AggregateReport& report) {
  std::ostringstream os;
  os << "sigma_tdoa  sigma_doa  trajectory  runs  fail | stage   Loc. err. (cm)  "
        "Angle err. (deg)  Off. err. (1e-4 s)  Dri. err. (us)\n";
  for (const CellAggregate& c : report.cells) {
    for (const auto& [stage, m] : {std::pair{"IVE  ", &c.ive}, std::pair{"final", &c.final}}) {
      os << std::setw(7) << fixed(c.sigma_tdoa * 1e3, 3) << "ms" << std::setw(9)
         << fixed(c.sigma_doa / kDeg, 1) << "deg" << std::setw(12) << c.trajectory
         << std::setw(6) << c.runs << std::setw(6) << c.failures << " | " << stage
         << std::setw(16) << fixed(m->location_cm(), 3) << std::setw(18)
         << fixed(m->angle_deg(), 3) << std::setw(20) << fixed(m->offset_1e4s(), 4)
         << std::setw(16) << fixed(m->drift_us(), 4) << '\n';
    }
  }
  return os.str();
}

std::string format_calibration(const CalibrationFile& file) {
  const RunReport& r = file.report;
  std::ostringstream os;
  os << "arrays: " << r.estimate.n_arrays() << "  events: " << r.estimate.n_events() << '\n';
  os << "stage 1: " << r.stage1.iterations << " iterations, cost " << r.stage1.final_cost << " ("
     << r.stage1.stop_reason << ")\n";
  os << "joint:   " << r.joint.iterations << " iterations, cost " << r.joint.initial_cost << " -> "
     << r.joint.final_cost << " (" << r.joint.stop_reason << "), condition " << r.joint.condition
     << '\n';
  for (int i = 0; i < r.estimate.n_arrays(); ++i) {
    const ArrayState a = r.estimate.array(i);
    os << "array " << i << ": position_m [" << fixed(a.position.x(), 4) << ", "
       << fixed(a.position.y(), 4) << ", " << fixed(a.position.z(), 4) << "]  angle_deg "
       << fixed(a.orientation.angle() / kDeg, 3) << "  offset_s " << a.time_offset << "  drift "
       << a.drift << '\n';
  }
  auto metrics = [&](const char* label, const std::optional<ErrorMetrics>& m) {
    if (!m) return;
    os << label << " errors: loc " << fixed(m->location_cm(), 4) << " cm, angle "
       << fixed(m->angle_deg(), 4) << " deg, offset " << fixed(m->offset_1e4s(), 5)
       << " x1e-4 s, drift " << fixed(m->drift_us(), 5) << " us\n";
  };
  metrics("IVE  ", r.ive_errors);
  metrics("final", r.final_errors);
  return os.str();
}

std::string document_kind(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (const json* k = find(j, "kind"); k && k->is_string()) return k->get<std::string>();
  } catch (const json::exception&) {
  }
  return {};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace hybridcal::io
