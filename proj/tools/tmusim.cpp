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

// tmusim command line: run, sweep, report, fit, validate, trace.
//
// Errors go to stderr as "error[<kind>]: <message>" and select the exit code:
// config 2, io 3, simulation 4, fit 5, validation 6, tmu 7.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tmusim/config.hpp"
#include "tmusim/harness.hpp"

namespace {

using namespace tmusim;
using nlohmann::json;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return 2;
        case ErrorKind::io: return 3;
        case ErrorKind::simulation: return 4;
        case ErrorKind::fit: return 5;
        case ErrorKind::validation: return 6;
        case ErrorKind::tmu: return 7;
    }
    return 1;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) fail(ErrorKind::io, "cannot write '" + path + "'");
    return f;
}

/// --set key=value; the value is read as JSON when it parses, else as a string.
json parse_sets(const std::vector<std::string>& sets) {
    json j = json::object();
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) fail(ErrorKind::config, "--set expects key=value, got '" + s + "'");
        const std::string key = s.substr(0, eq), val = s.substr(eq + 1);
        json v = json::parse(val, nullptr, false);
        j[key] = v.is_discarded() ? json(val) : v;
    }
    return j;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
    if (!sets.empty()) cfg = apply_overrides(cfg, parse_sets(sets));
    validate(cfg);
    return cfg;
}

void print_summary(const RunRow& r) {
    const auto& s = r.result;
    const auto& l = s.llc;
    std::cout << "policy          " << r.policy << '\n'
              << "cycles          " << s.cycles << '\n'
              << "requests        " << r.stats.n_mem << " (hit " << l.count(AccessOutcome::hit) << ", mshr "
              << l.count(AccessOutcome::mshr_hit) << ", cold " << l.count(AccessOutcome::cold_miss)
              << ", conflict " << l.count(AccessOutcome::conflict_miss) << ", bypassed "
              << l.count(AccessOutcome::bypassed) << ")\n"
              << "reuse hit rate  " << s.reuse_hit_rate() << '\n'
              << "dram            " << s.dram_reads << " reads, " << s.dram_writes << " writes\n"
              << "bandwidth       cold " << s.bw_cold.lines_per_cycle() << ", conflict "
              << s.bw_conflict.lines_per_cycle() << " lines/cycle\n"
              << "conserves       " << (s.conserves(r.stats.n_mem) ? "yes" : "NO") << '\n';
}

void write_rows(const std::vector<RunRow>& rows, const std::string& out, const std::string& series) {
    if (out.empty() || out == "-") {
        write_results_csv(std::cout, rows);
    } else {
        auto f = open_out(out);
        write_results_csv(f, rows);
    }
    if (!series.empty()) {
        auto f = open_out(series);
        write_series_csv(f, rows);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tmusim: multi-core accelerator LLC simulator"};
    app.require_subcommand(1);

    std::string config, out, series, axes, results, baseline = "lru", params, speedups, gaps;
    std::vector<std::string> sets;
    int threads = 0;
    bool serial = false, csv = false;

    auto* run = app.add_subcommand("run", "simulate one configuration");
    run->add_option("-c,--config", config, "run config (JSON)")->check(CLI::ExistingFile);
    run->add_option("--set", sets, "override a config key: key=value");
    run->add_option("-o,--out", out, "write a results CSV row here");
    run->add_option("--series", series, "write per-window series CSV here");
    run->add_flag("--csv", csv, "print the results CSV instead of the summary");

    auto* sweep = app.add_subcommand("sweep", "simulate the Cartesian product of axes");
    sweep->add_option("-c,--config", config, "base run config (JSON)")->check(CLI::ExistingFile);
    sweep->add_option("--set", sets, "override a base config key: key=value");
    sweep->add_option("-a,--axes", axes, "axes file (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("-o,--out", out, "results CSV (default: stdout)");
    sweep->add_option("--series", series, "per-window series CSV");
    sweep->add_option("-j,--threads", threads, "worker threads (0: runtime default)");
    sweep->add_flag("--serial", serial, "run points one after another");

    auto* report = app.add_subcommand("report", "speedups against a baseline policy");
    report->add_option("-r,--results", results, "results CSV")->required()->check(CLI::ExistingFile);
    report->add_option("-b,--baseline", baseline, "baseline policy label");
    report->add_option("--speedups", speedups, "write speedups CSV here");
    report->add_option("--gear-gaps", gaps, "write dynamic-vs-best-static CSV here");

    auto* fit = app.add_subcommand("fit", "fit bandwidth coefficients per policy group");
    fit->add_option("-r,--results", results, "results CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("-o,--out", out, "parameter file (default: stdout)");

    auto* val = app.add_subcommand("validate", "compare model predictions with simulated cycles");
    val->add_option("-r,--results", results, "results CSV")->required()->check(CLI::ExistingFile);
    val->add_option("-p,--params", params, "parameter file from `fit`")->required()->check(CLI::ExistingFile);
    val->add_option("-o,--out", out, "validation scatter CSV");

    auto* trace = app.add_subcommand("trace", "print the generated instruction streams");
    trace->add_option("-c,--config", config, "run config (JSON)")->check(CLI::ExistingFile);
    trace->add_option("--set", sets, "override a config key: key=value");
    trace->add_option("-o,--out", out, "output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto row = run_single(load_config(config, sets));
            std::vector<RunRow> rows{row};
            if (csv) {
                write_results_csv(std::cout, rows);
            } else {
                print_summary(row);
            }
            if (!out.empty()) {
                auto f = open_out(out);
                write_results_csv(f, rows);
            }
            if (!series.empty()) {
                auto f = open_out(series);
                write_series_csv(f, rows);
            }
        } else if (*sweep) {
            const auto cfgs = expand_axes(load_config(config, sets), load_json(axes));
            const auto rows = serial ? run_sweep_serial(cfgs) : run_sweep(cfgs, threads);
            write_rows(rows, out, series);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += !r.ok;
            std::cerr << rows.size() << " runs, " << failed << " failed\n";
        } else if (*report) {
            const auto rep = make_report(read_results_csv(results), baseline);
            write_report_text(std::cout, rep);
            if (!speedups.empty()) {
                auto f = open_out(speedups);
                write_speedups_csv(f, rep);
            }
            if (!gaps.empty()) {
                auto f = open_out(gaps);
                write_gear_gaps_csv(f, rep);
            }
        } else if (*fit) {
            const auto pf = fit_groups(read_results_csv(results));
            if (pf.groups.empty()) fail(ErrorKind::fit, "no policy group could be fitted");
            const auto text = to_json(pf).dump(2);
            if (out.empty() || out == "-") {
                std::cout << text << '\n';
            } else {
                open_out(out) << text << '\n';
            }
            for (const auto& [k, why] : pf.skipped) std::cerr << "skipped " << k << ": " << why << '\n';
        } else if (*val) {
            const auto v = validate_rows(read_results_csv(results), param_file_from_json(load_json(params)));
            std::cout << "points " << v.summary.n << "  skipped " << v.skipped << "  R2 " << v.summary.r2
                      << "  kendall_tau " << v.summary.kendall_tau << '\n';
            if (!out.empty()) {
                auto f = open_out(out);
                write_validation_csv(f, v);
            }
        } else if (*trace) {
            const auto program = build_program(load_config(config, sets));
            if (out.empty() || out == "-") {
                write_trace(std::cout, program);
            } else {
                auto f = open_out(out);
                write_trace(f, program);
            }
        }
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error[simulation]: " << e.what() << '\n';
        return exit_code(ErrorKind::simulation);
    }
    return 0;
}
