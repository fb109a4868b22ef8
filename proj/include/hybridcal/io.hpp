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

// File schemas. Every file is a JSON document with a "schema_version" and a
// "kind". Units are carried in key names: user-authored configs use ms and
// degrees, machine-written reports store SI values (seconds, radians, meters)
// so that load(save(x)) reproduces x exactly.

#include <filesystem>
#include <optional>
#include <string>

#include "hybridcal/pipeline.hpp"
#include "hybridcal/scenario.hpp"

namespace hybridcal::io {

inline constexpr int kSchemaVersion = 1;

/// Measurement bundle plus optional metadata, as stored on disk.
struct BundleFile {
  MeasurementBundle meas;
  std::optional<NoiseLevels> noise;
  std::optional<GroundTruth> truth;
  /// Region the arrays are known to lie in; seeds the initial layouts.
  std::optional<Box> workspace;
};

/// Calibration output: the configuration used and the run report.
struct CalibrationFile {
  CalibrationConfig config;
  RunReport report;
};

// Text (de)serialization. Parsers throw ConfigError with a field path.
std::string dump_scenario_config(const ScenarioConfig& cfg);
ScenarioConfig parse_scenario_config(const std::string& text);

std::string dump_bundle(const BundleFile& bundle);
BundleFile parse_bundle(const std::string& text);

std::string dump_calibration(const CalibrationFile& file);
CalibrationFile parse_calibration(const std::string& text);

std::string dump_grid(const MonteCarloGrid& grid);
MonteCarloGrid parse_grid(const std::string& text);

std::string dump_aggregate(const AggregateReport& report);
AggregateReport parse_aggregate(const std::string& text);

/// One row per cell and stage: sigma_tdoa_ms, sigma_doa_deg, trajectory, runs,
/// failures, stage, loc_err_cm, angle_err_deg, off_err_1e-4s, dri_err_us.
std::string aggregate_csv(const AggregateReport& report);

/// Fixed-width summary table of an aggregate or calibration report.
std::string format_aggregate(const AggregateReport& report);
std::string format_calibration(const CalibrationFile& file);

/// "kind" field of a document, or empty when absent.
std::string document_kind(const std::string& text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace hybridcal::io
