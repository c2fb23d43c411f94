/*
 * Copyright 2026 The tmusim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file harness.hpp
 * @brief Runs, sweeps, result tables and reports.
 *
 * Results CSV (schema "tmusim-results/1"): one row per run. Column order is
 * fixed by results_columns(); the trailing `config` column holds the fully
 * resolved run configuration as compact JSON, so any row can be re-run.
 * Failed runs keep their row with status "error" and empty metrics.
 */

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tmusim/analytic.hpp"
#include "tmusim/config.hpp"
#include "tmusim/simulator.hpp"

namespace tmusim {

inline constexpr const char* kResultsSchema = "tmusim-results/1";

struct RunRow {
    std::size_t index = 0;
    RunConfig config;
    std::string policy;  // label, e.g. "at+bypass+dbp"
    bool ok = false;
    std::optional<ErrorKind> error_kind;
    std::string error;
    SimResult result;
    DataflowStats stats;
    std::size_t active_cores = 0;  // cores with a non-empty stream
    double wall_seconds = 0;
};

/// Builds the program and simulates it. Invalid configs throw Error(config)
/// before anything runs.
RunRow run_single(const RunConfig& cfg);

/// Cartesian product of `axes` applied to `base`. `axes` is an object of
/// key -> array of values, or an array of such single-key objects when the
/// order of nesting matters (the first axis varies slowest). An axis whose
/// name starts with '_' takes objects and sets all their keys together.
std::vector<RunConfig> expand_axes(const RunConfig& base, const nlohmann::json& axes);

/// Runs every config; failures are recorded per row. Uses OpenMP when
/// available; `threads` <= 0 keeps the runtime default.
std::vector<RunRow> run_sweep(const std::vector<RunConfig>& configs, int threads = 0);

/// Same rows as run_sweep, one run after another.
std::vector<RunRow> run_sweep_serial(const std::vector<RunConfig>& configs);

const std::vector<std::string>& results_columns();
void write_results_csv(std::ostream& os, const std::vector<RunRow>& rows);

/// Per-window series in long form: index,series,window,slice,value.
void write_series_csv(std::ostream& os, const std::vector<RunRow>& rows);

/// One parsed CSV row keyed by column name.
using CsvRecord = std::map<std::string, std::string>;

/// RFC 4180 reader. Throws Error(io) on malformed input.
std::vector<CsvRecord> read_csv(std::istream& is);

/// Reads a results CSV and checks the schema column. Throws Error(io).
std::vector<CsvRecord> read_results_csv(const std::string& path);

/// Config of a results row (from its `config` column).
RunConfig record_config(const CsvRecord& rec);

double record_number(const CsvRecord& rec, const std::string& column);

/// Speedup of each successful row against the baseline policy at the same
/// point (same config apart from the policy keys).
struct SpeedupRow {
    std::string point;  // compact JSON of the non-policy keys that vary
    std::string policy;
    std::uint64_t llc_size = 0;
    std::uint32_t seq_len = 0;
    double cycles = 0;
    double baseline_cycles = 0;
    double speedup = 0;
};

/// Dynamic gear against the best static gear at one point.
struct GearGapRow {
    std::string point;
    std::string dynamic_policy;
    double dynamic_cycles = 0;
    std::uint32_t best_gear = 0;
    double best_static_cycles = 0;
    double gap = 0;  // dynamic / best static - 1
};

struct Report {
    std::vector<SpeedupRow> speedups;
    std::vector<GearGapRow> gear_gaps;
};

/// Throws Error(config) when the baseline is absent from the results.
Report make_report(const std::vector<CsvRecord>& rows, const std::string& baseline);

void write_speedups_csv(std::ostream& os, const Report& r);
void write_gear_gaps_csv(std::ostream& os, const Report& r);
/// Human-readable summary table.
void write_report_text(std::ostream& os, const Report& r);

/// Key grouping runs that share fitted coefficients:
/// "<policy>/ipc_mem=<n>/bw=<bytes per cycle>".
std::string fit_group(const RunConfig& cfg);

/// Model input and measured quantities of one results row.
FitSample fit_sample(const CsvRecord& rec);

/// Fitted coefficients per group. Groups that cannot be fitted are listed
/// in `skipped` with the reason.
struct ParamFile {
    std::map<std::string, FitResult> groups;
    std::map<std::string, std::string> skipped;
};

ParamFile fit_groups(const std::vector<CsvRecord>& rows);
nlohmann::json to_json(const ParamFile& p);
ParamFile param_file_from_json(const nlohmann::json& j);

struct ValidationPoint {
    std::size_t index = 0;
    std::string group;
    double predicted = 0;
    double simulated = 0;
    Prediction detail;
};

struct ValidationReport {
    std::vector<ValidationPoint> points;
    ValidationResult summary;
    std::size_t skipped = 0;  // rows whose group has no parameters
};

ValidationReport validate_rows(const std::vector<CsvRecord>& rows, const ParamFile& params);
void write_validation_csv(std::ostream& os, const ValidationReport& v);

}  // namespace tmusim
