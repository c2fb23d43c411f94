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

#include "tmusim/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>

#ifdef TMUSIM_HAVE_OPENMP
#include <omp.h>
#endif

namespace tmusim {

using nlohmann::json;

RunRow run_single(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRow row;
    row.config = cfg;
    row.policy = cfg.sim.policy.label();
    const auto program = build_program(cfg);
    row.stats = program.stats;
    row.active_cores = static_cast<std::size_t>(
        std::count_if(program.streams.begin(), program.streams.end(),
                      [](const auto& s) { return !s.empty(); }));
    row.result = simulate(program, cfg.sim);
    row.ok = true;
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

std::vector<RunConfig> expand_axes(const RunConfig& base, const json& axes) {
    std::vector<std::pair<std::string, json>> list;
    auto add = [&](const json& obj) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!it.value().is_array() || it.value().empty())
                fail(ErrorKind::config, "axis '" + it.key() + "' must be a non-empty array");
            list.emplace_back(it.key(), it.value());
        }
    };
    if (axes.is_object()) {
        add(axes);
    } else if (axes.is_array()) {
        for (const auto& a : axes) {
            if (!a.is_object()) fail(ErrorKind::config, "axes array entries must be objects");
            add(a);
        }
    } else {
        fail(ErrorKind::config, "axes must be an object or an array of objects");
    }
    if (list.empty()) fail(ErrorKind::config, "axes must not be empty");

    std::vector<RunConfig> out;
    std::vector<std::size_t> idx(list.size(), 0);
    while (true) {
        json over = json::object();
        for (std::size_t a = 0; a < list.size(); ++a) {
            const auto& v = list[a].second[idx[a]];
            // An object value sets several keys at once, e.g. a named policy variant.
            if (v.is_object() && list[a].first.front() == '_') {
                for (auto it = v.begin(); it != v.end(); ++it) over[it.key()] = it.value();
            } else {
                over[list[a].first] = v;
            }
        }
        out.push_back(apply_overrides(base, over));
        std::size_t a = list.size();
        while (a > 0) {
            --a;
            if (++idx[a] < list[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return out;
        }
    }
}

namespace {

RunRow run_guarded(const RunConfig& cfg, std::size_t index) {
    RunRow row;
    try {
        row = run_single(cfg);
    } catch (const Error& e) {
        row.config = cfg;
        row.policy = cfg.sim.policy.label();
        row.error_kind = e.kind();
        row.error = e.what();
    } catch (const std::exception& e) {
        row.config = cfg;
        row.policy = cfg.sim.policy.label();
        row.error_kind = ErrorKind::simulation;
        row.error = e.what();
    }
    row.index = index;
    return row;
}

}  // namespace

std::vector<RunRow> run_sweep(const std::vector<RunConfig>& configs, int threads) {
    std::vector<RunRow> rows(configs.size());
    const auto n = static_cast<std::ptrdiff_t>(configs.size());
#ifdef TMUSIM_HAVE_OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#pragma omp parallel for schedule(dynamic, 1)
#else
    (void)threads;
#endif
    for (std::ptrdiff_t i = 0; i < n; ++i)
        rows[static_cast<std::size_t>(i)] =
            run_guarded(configs[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
    return rows;
}

std::vector<RunRow> run_sweep_serial(const std::vector<RunConfig>& configs) {
    std::vector<RunRow> rows;
    rows.reserve(configs.size());
    for (std::size_t i = 0; i < configs.size(); ++i) rows.push_back(run_guarded(configs[i], i));
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

std::string num(std::uint64_t v) { return std::to_string(v); }

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

void write_line(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << quote(fields[i]);
    }
    os << '\n';
}

}  // namespace

const std::vector<std::string>& results_columns() {
    static const std::vector<std::string> cols = {
        "schema",        "index",           "status",         "error_kind",      "error",
        "policy",        "workload",        "model",          "group_alloc",     "seq_len",
        "batch",         "n_cores",         "llc_size",       "cycles",          "drain_cycles",
        "committed",     "n_mem",           "n_hit",          "n_mshr_hit",      "n_cold",
        "n_cf",          "n_bypassed",      "bypassed_cold",  "bypassed_conflict", "evictions",
        "dead_evictions", "false_dead",     "dram_reads",     "dram_writes",     "bw_cold",
        "bw_cold_reads", "bw_cold_busy",    "bw_cf",          "bw_cf_reads",     "bw_cf_busy",
        "steady_hit_rate", "reuse_hit_rate", "gear_changes",  "final_mean_gear", "tmu_retirements",
        "tmu_dropped_tiles", "active_cores", "s_work",        "conserves",       "config"};
    return cols;
}

void write_results_csv(std::ostream& os, const std::vector<RunRow>& rows) {
    write_line(os, results_columns());
    for (const auto& r : rows) {
        const auto& c = r.config;
        std::vector<std::string> f = {
            kResultsSchema,
            num(std::uint64_t(r.index)),
            r.ok ? "ok" : "error",
            r.error_kind ? to_string(*r.error_kind) : "",
            r.error,
            r.policy,
            c.workload == WorkloadKind::matmul ? "matmul" : "flashattention",
            c.model.name,
            c.dataflow.group_alloc == GroupAlloc::spatial ? "spatial" : "temporal",
            num(std::uint64_t(c.dataflow.seq_len)),
            num(std::uint64_t(c.dataflow.batch)),
            num(std::uint64_t(c.dataflow.n_cores)),
            num(c.sim.llc.total_size)};
        if (r.ok) {
            const auto& s = r.result;
            const auto& l = s.llc;
            std::uint64_t committed = 0;
            for (auto v : s.committed) committed += v;
            const std::vector<std::string> m = {
                num(s.cycles),
                num(s.drain_cycles),
                num(committed),
                num(r.stats.n_mem),
                num(l.count(AccessOutcome::hit)),
                num(l.count(AccessOutcome::mshr_hit)),
                num(l.count(AccessOutcome::cold_miss)),
                num(l.count(AccessOutcome::conflict_miss)),
                num(l.count(AccessOutcome::bypassed)),
                num(l.bypassed_cold),
                num(l.bypassed_conflict),
                num(l.evictions),
                num(l.dead_evictions),
                num(l.false_dead),
                num(s.dram_reads),
                num(s.dram_writes),
                num(s.bw_cold.lines_per_cycle()),
                num(s.bw_cold.reads),
                num(s.bw_cold.busy_cycles),
                num(s.bw_conflict.lines_per_cycle()),
                num(s.bw_conflict.reads),
                num(s.bw_conflict.busy_cycles),
                num(s.steady_hit_rate),
                num(s.reuse_hit_rate()),
                num(s.gear_changes),
                num(s.mean_gear.empty() ? 0.0 : s.mean_gear.back()),
                num(s.tmu_retirements),
                num(s.tmu_dropped_tiles),
                num(std::uint64_t(r.active_cores)),
                num(r.stats.s_work),
                s.conserves(r.stats.n_mem) ? "1" : "0"};
            f.insert(f.end(), m.begin(), m.end());
        } else {
            f.resize(results_columns().size() - 1);
        }
        f.push_back(to_json(c).dump());
        write_line(os, f);
    }
}

void write_series_csv(std::ostream& os, const std::vector<RunRow>& rows) {
    os << "index,series,window,slice,value\n";
    for (const auto& r : rows) {
        if (!r.ok) continue;
        const auto& s = r.result;
        for (std::size_t w = 0; w < s.window_hits.size(); ++w) {
            if (s.window_accesses[w] == 0) continue;
            os << r.index << ",hit_rate," << w << ",,"
               << num(double(s.window_hits[w]) / s.window_accesses[w]) << '\n';
        }
        for (std::size_t w = 0; w < s.mean_gear.size(); ++w)
            os << r.index << ",mean_gear," << w << ",," << num(s.mean_gear[w]) << '\n';
        for (std::size_t w = 0; w < s.window_evictions.size(); ++w)
            for (std::size_t sl = 0; sl < s.window_evictions[w].size(); ++sl)
                os << r.index << ",evictions," << w << ',' << sl << ',' << s.window_evictions[w][sl]
                   << '\n';
    }
}

std::vector<CsvRecord> read_csv(std::istream& is) {
    std::vector<std::vector<std::string>> lines;
    std::vector<std::string> cur;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (is.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (is.peek() == '"') {
                    is.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty()) fail(ErrorKind::io, "csv: quote inside an unquoted field");
            quoted = true;
        } else if (c == ',') {
            cur.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && is.peek() == '\n') is.get(c);
            cur.push_back(std::move(field));
            field.clear();
            lines.push_back(std::move(cur));
            cur.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (quoted) fail(ErrorKind::io, "csv: unterminated quoted field");
    if (any) {
        cur.push_back(std::move(field));
        lines.push_back(std::move(cur));
    }
    if (lines.empty()) fail(ErrorKind::io, "csv: empty input");
    const auto& header = lines.front();
    std::vector<CsvRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].size() == 1 && lines[i][0].empty()) continue;
        if (lines[i].size() != header.size())
            fail(ErrorKind::io, "csv: line " + std::to_string(i + 1) + " has " +
                                    std::to_string(lines[i].size()) + " fields, header has " +
                                    std::to_string(header.size()));
        CsvRecord rec;
        for (std::size_t k = 0; k < header.size(); ++k) rec[header[k]] = lines[i][k];
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CsvRecord> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    auto rows = read_csv(in);
    for (const auto& r : rows) {
        auto it = r.find("schema");
        if (it == r.end() || it->second != kResultsSchema)
            fail(ErrorKind::io, "'" + path + "' is not a " + std::string(kResultsSchema) + " file");
    }
    return rows;
}

RunConfig record_config(const CsvRecord& rec) {
    auto it = rec.find("config");
    if (it == rec.end()) fail(ErrorKind::io, "results row has no config column");
    try {
        return run_config_from_json(json::parse(it->second));
    } catch (const json::exception& e) {
        fail(ErrorKind::io, std::string("results row config: ") + e.what());
    }
}

double record_number(const CsvRecord& rec, const std::string& column) {
    auto it = rec.find(column);
    if (it == rec.end()) fail(ErrorKind::io, "results row has no '" + column + "' column");
    double v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail(ErrorKind::io, "column '" + column + "': '" + s + "' is not a number");
    return v;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

bool is_ok(const CsvRecord& r) {
    auto it = r.find("status");
    return it != r.end() && it->second == "ok";
}

const std::set<std::string>& policy_keys() {
    static const std::set<std::string> k = {"replacement", "dbp", "bypass_mode", "b_gear"};
    return k;
}

/// Point keys: config minus policy keys; the displayed key keeps only keys
/// that differ somewhere in the table.
struct Points {
    std::vector<std::string> full;
    std::vector<std::string> shown;
};

Points make_points(const std::vector<const CsvRecord*>& rows) {
    std::vector<json> cfgs;
    for (const auto* r : rows) {
        json j = to_json(record_config(*r));
        for (const auto& k : policy_keys()) j.erase(k);
        cfgs.push_back(std::move(j));
    }
    std::set<std::string> varying;
    for (const auto& j : cfgs)
        for (auto it = j.begin(); it != j.end(); ++it)
            if (cfgs.front().value(it.key(), json()) != it.value()) varying.insert(it.key());
    Points p;
    for (const auto& j : cfgs) {
        p.full.push_back(j.dump());
        json s = json::object();
        for (const auto& k : varying) s[k] = j[k];
        p.shown.push_back(s.dump());
    }
    return p;
}

}  // namespace

Report make_report(const std::vector<CsvRecord>& rows, const std::string& baseline) {
    std::vector<const CsvRecord*> ok;
    for (const auto& r : rows)
        if (is_ok(r)) ok.push_back(&r);
    const auto pts = make_points(ok);

    std::map<std::string, double> base;
    for (std::size_t i = 0; i < ok.size(); ++i)
        if (ok[i]->at("policy") == baseline) base.emplace(pts.full[i], record_number(*ok[i], "cycles"));
    if (base.empty()) fail(ErrorKind::config, "baseline policy '" + baseline + "' not found in results");

    Report rep;
    for (std::size_t i = 0; i < ok.size(); ++i) {
        auto b = base.find(pts.full[i]);
        if (b == base.end()) continue;
        const auto cfg = record_config(*ok[i]);
        SpeedupRow s;
        s.point = pts.shown[i];
        s.policy = ok[i]->at("policy");
        s.llc_size = cfg.sim.llc.total_size;
        s.seq_len = cfg.dataflow.seq_len;
        s.cycles = record_number(*ok[i], "cycles");
        s.baseline_cycles = b->second;
        s.speedup = s.baseline_cycles / s.cycles;
        rep.speedups.push_back(s);
    }

    // Best static gear per (point, replacement, dbp); bypass off counts as gear 0.
    struct Best {
        double cycles = 0;
        std::uint32_t gear = 0;
        bool set = false;
    };
    std::map<std::string, Best> best;
    auto family = [&](std::size_t i, const PolicyConfig& p) {
        return pts.full[i] + "|" + to_string(p.replacement) + (p.dbp ? "+dbp" : "");
    };
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const auto p = record_config(*ok[i]).sim.policy;
        if (p.bypass_mode != BypassMode::static_gear && p.bypass_mode != BypassMode::off) continue;
        const double c = record_number(*ok[i], "cycles");
        auto& b = best[family(i, p)];
        if (!b.set || c < b.cycles)
            b = {c, p.bypass_mode == BypassMode::off ? 0u : p.b_gear, true};
    }
    for (std::size_t i = 0; i < ok.size(); ++i) {
        const auto p = record_config(*ok[i]).sim.policy;
        if (p.bypass_mode != BypassMode::dynamic && p.bypass_mode != BypassMode::gqa_dynamic) continue;
        auto b = best.find(family(i, p));
        if (b == best.end()) continue;
        GearGapRow g;
        g.point = pts.shown[i];
        g.dynamic_policy = ok[i]->at("policy");
        g.dynamic_cycles = record_number(*ok[i], "cycles");
        g.best_gear = b->second.gear;
        g.best_static_cycles = b->second.cycles;
        g.gap = g.dynamic_cycles / g.best_static_cycles - 1.0;
        rep.gear_gaps.push_back(g);
    }
    return rep;
}

void write_speedups_csv(std::ostream& os, const Report& r) {
    write_line(os, {"point", "policy", "llc_size", "seq_len", "cycles", "baseline_cycles", "speedup"});
    for (const auto& s : r.speedups)
        write_line(os, {s.point, s.policy, num(s.llc_size), num(std::uint64_t(s.seq_len)), num(s.cycles),
                        num(s.baseline_cycles), num(s.speedup)});
}

void write_gear_gaps_csv(std::ostream& os, const Report& r) {
    write_line(os, {"point", "dynamic_policy", "dynamic_cycles", "best_gear", "best_static_cycles", "gap"});
    for (const auto& g : r.gear_gaps)
        write_line(os, {g.point, g.dynamic_policy, num(g.dynamic_cycles), num(std::uint64_t(g.best_gear)),
                        num(g.best_static_cycles), num(g.gap)});
}

void write_report_text(std::ostream& os, const Report& r) {
    os << std::left << std::setw(44) << "point" << std::setw(22) << "policy" << std::right
       << std::setw(12) << "cycles" << std::setw(10) << "speedup" << '\n';
    for (const auto& s : r.speedups)
        os << std::left << std::setw(44) << s.point << std::setw(22) << s.policy << std::right
           << std::setw(12) << std::uint64_t(s.cycles) << std::setw(10) << std::fixed
           << std::setprecision(3) << s.speedup << '\n';
    if (r.gear_gaps.empty()) return;
    os << '\n'
       << std::left << std::setw(44) << "point" << std::setw(22) << "dynamic" << std::right
       << std::setw(10) << "best_gear" << std::setw(10) << "gap %" << '\n';
    for (const auto& g : r.gear_gaps)
        os << std::left << std::setw(44) << g.point << std::setw(22) << g.dynamic_policy << std::right
           << std::setw(10) << g.best_gear << std::setw(10) << std::fixed << std::setprecision(2)
           << 100.0 * g.gap << '\n';
}

// ---------------------------------------------------------------------------
// Fitting and validation

std::string fit_group(const RunConfig& cfg) {
    return cfg.sim.policy.label() + "/ipc_mem=" + std::to_string(cfg.sim.core.ipc_mem) +
           "/bw=" + std::to_string(cfg.sim.dram.peak_bw_bytes_per_cycle);
}

namespace {

// Fewer measured reads than this make a bandwidth sample too noisy to fit.
constexpr double kMinSampleReads = 64;

AnalyticalInput input_of(const RunConfig& cfg) {
    const auto program = build_program(cfg);
    const double active = double(std::count_if(program.streams.begin(), program.streams.end(),
                                               [](const auto& s) { return !s.empty(); }));
    return derive_input(program, cfg.sim.policy, cfg.sim.llc, active, cfg.sim.core.ipc_mem,
                        cfg.sim.core.ipc_comp,
                        double(cfg.sim.dram.peak_bw_bytes_per_cycle) / cfg.sim.llc.line_size);
}

}  // namespace

FitSample fit_sample(const CsvRecord& rec) {
    FitSample s;
    s.input = input_of(record_config(rec));
    s.cycles = record_number(rec, "cycles");
    s.bw_cold = record_number(rec, "bw_cold");
    s.bw_cf = record_number(rec, "bw_cf");
    s.has_cold = record_number(rec, "bw_cold_reads") >= kMinSampleReads;
    s.has_cf = record_number(rec, "bw_cf_reads") >= kMinSampleReads && s.input.n_cf > 0;
    return s;
}

ParamFile fit_groups(const std::vector<CsvRecord>& rows) {
    std::map<std::string, std::vector<FitSample>> groups;
    for (const auto& r : rows)
        if (is_ok(r)) groups[fit_group(record_config(r))].push_back(fit_sample(r));
    ParamFile pf;
    for (const auto& [key, samples] : groups) {
        try {
            pf.groups[key] = fit_coefficients(samples);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::fit) throw;
            pf.skipped[key] = e.what();
        }
    }
    return pf;
}

json to_json(const ParamFile& p) {
    json j = {{"schema", "tmusim-params/1"}, {"groups", json::object()}, {"skipped", json::object()}};
    for (const auto& [k, f] : p.groups)
        j["groups"][k] = {{"theta1", f.params.theta1},     {"theta2", f.params.theta2},
                          {"theta3", f.params.theta3},     {"lambda", f.params.lambda},
                          {"bw_cold_rmse", f.bw_cold_rmse}, {"bw_cf_rmse", f.bw_cf_rmse},
                          {"n_cold_samples", f.n_cold_samples}, {"n_cf_samples", f.n_cf_samples}};
    for (const auto& [k, why] : p.skipped) j["skipped"][k] = why;
    return j;
}

ParamFile param_file_from_json(const json& j) {
    ParamFile p;
    try {
        if (j.value("schema", "") != "tmusim-params/1")
            fail(ErrorKind::config, "not a tmusim-params/1 file");
        for (auto it = j.at("groups").begin(); it != j.at("groups").end(); ++it) {
            const auto& g = it.value();
            FitResult f;
            f.params = {g.at("theta1").get<double>(), g.at("theta2").get<double>(),
                        g.at("theta3").get<double>(), g.at("lambda").get<double>()};
            f.bw_cold_rmse = g.value("bw_cold_rmse", 0.0);
            f.bw_cf_rmse = g.value("bw_cf_rmse", 0.0);
            f.n_cold_samples = g.value("n_cold_samples", std::size_t{0});
            f.n_cf_samples = g.value("n_cf_samples", std::size_t{0});
            p.groups[it.key()] = f;
        }
        if (j.contains("skipped"))
            for (auto it = j["skipped"].begin(); it != j["skipped"].end(); ++it)
                p.skipped[it.key()] = it.value().get<std::string>();
    } catch (const json::exception& e) {
        fail(ErrorKind::config, std::string("parameter file: ") + e.what());
    }
    return p;
}

ValidationReport validate_rows(const std::vector<CsvRecord>& rows, const ParamFile& params) {
    ValidationReport v;
    std::vector<double> pred, sim;
    for (const auto& r : rows) {
        if (!is_ok(r)) continue;
        const auto cfg = record_config(r);
        const auto key = fit_group(cfg);
        auto g = params.groups.find(key);
        if (g == params.groups.end()) {
            ++v.skipped;
            continue;
        }
        ValidationPoint p;
        p.index = static_cast<std::size_t>(record_number(r, "index"));
        p.group = key;
        p.detail = predict_time(input_of(cfg), g->second.params);
        p.predicted = p.detail.t;
        p.simulated = record_number(r, "cycles");
        pred.push_back(p.predicted);
        sim.push_back(p.simulated);
        v.points.push_back(p);
    }
    v.summary = validate_model(pred, sim);
    return v;
}

void write_validation_csv(std::ostream& os, const ValidationReport& v) {
    write_line(os, {"index", "group", "simulated", "predicted", "t_hit", "t_cold", "t_cf", "t_comp",
                    "bw_cold", "bw_cf"});
    for (const auto& p : v.points)
        write_line(os, {num(std::uint64_t(p.index)), p.group, num(p.simulated), num(p.predicted),
                        num(p.detail.t_hit), num(p.detail.t_cold), num(p.detail.t_cf),
                        num(p.detail.t_comp), num(p.detail.bw_cold), num(p.detail.bw_cf)});
}

}  // namespace tmusim
