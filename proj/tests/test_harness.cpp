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

#include <set>
#include <sstream>

#include "doctest.h"
#include "tmusim/config.hpp"
#include "tmusim/harness.hpp"

using namespace tmusim;
using nlohmann::json;

namespace {

std::string csv_of(const std::vector<RunRow>& rows) {
    std::ostringstream os;
    write_results_csv(os, rows);
    return os.str();
}

std::vector<CsvRecord> records_of(const std::vector<RunRow>& rows) {
    std::istringstream is(csv_of(rows));
    return read_csv(is);
}

RunConfig small() {
    return run_config_from_json({{"seq_len", 128}, {"n_cores", 4}, {"llc_size", "64KB"}});
}

}  // namespace

TEST_CASE("sizes accept KB / MB / GB suffixes") {
    CHECK(parse_size("4096") == 4096);
    CHECK(parse_size("64KB") == 64 * 1024);
    CHECK(parse_size("2 MB") == 2u << 20);
    CHECK(parse_size("1gb") == 1ull << 30);
    CHECK_THROWS_AS(parse_size("12XB"), Error);
    CHECK_THROWS_AS(parse_size("KB"), Error);
}

TEST_CASE("policy labels parse and print back") {
    for (const char* l : {"lru", "at", "lru+dbp", "at+dbp", "at+bypass+dbp", "at+fix3", "lru+gqa_bypass", "at+gqa_bypass+dbp"}) {
        PolicyConfig p;
        apply_policy_label(p, l);
        CHECK(p.label() == l);
    }
    PolicyConfig p;
    CHECK_THROWS_AS(apply_policy_label(p, "mru"), Error);
    CHECK_THROWS_AS(apply_policy_label(p, ""), Error);
}

TEST_CASE("config JSON round trip") {
    const auto c = run_config_from_json({{"model", "qwen3-8b"},
                                         {"policy", "at+fix2+dbp"},
                                         {"llc_size", "128KB"},
                                         {"group_alloc", "spatial"},
                                         {"batch", 2},
                                         {"ipc_mem", 2},
                                         {"seed", 7}});
    const auto j = to_json(c);
    CHECK(to_json(run_config_from_json(j)) == j);
    CHECK(c.model.n_q_heads == 32);
    CHECK(c.model.n_kv_heads == 8);
    CHECK(c.sim.llc.total_size == 128 * 1024);
    CHECK(c.sim.policy.b_gear == 2);
    CHECK(c.sim.policy.dbp);
}

TEST_CASE("unknown keys and bad values are config errors") {
    for (const json& bad : {json{{"llc_sise", "64KB"}}, json{{"model", "gpt-9"}}, json{{"group_alloc", "diagonal"}},
                            json{{"policy", "at+bogus"}}, json{{"bw_window", 0}}}) {
        CAPTURE(bad.dump());
        try {
            validate(run_config_from_json(bad));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::config);
        }
    }
}

TEST_CASE("switching model preset drops the old head counts") {
    const auto a = run_config_from_json({{"model", "llama3-70b"}});
    const auto b = apply_overrides(a, {{"model", "qwen3-8b"}});
    CHECK(b.model.n_q_heads == 32);
    CHECK(b.model.n_kv_heads == 8);
}

TEST_CASE("3 cache sizes x 4 policies make 12 configs") {
    const json axes{{"llc_size", {"64KB", "128KB", "256KB"}}, {"policy", {"lru", "at", "at+bypass", "at+bypass+dbp"}}};
    const auto cfgs = expand_axes(small(), axes);
    REQUIRE(cfgs.size() == 12);
    std::set<std::string> distinct;
    for (const auto& c : cfgs) distinct.insert(to_json(c).dump());
    CHECK(distinct.size() == 12);
}

TEST_CASE("ordered axes vary the first one slowest; grouped axes set keys together") {
    const json axes = json::array({json{{"llc_size", {"64KB", "128KB"}}},
                                   json{{"_shape", {json{{"seq_len", 128}, {"n_cores", 4}},
                                                    json{{"seq_len", 256}, {"n_cores", 8}}}}}});
    const auto cfgs = expand_axes(small(), axes);
    REQUIRE(cfgs.size() == 4);
    CHECK(cfgs[0].sim.llc.total_size == 64 * 1024);
    CHECK(cfgs[1].sim.llc.total_size == 64 * 1024);
    CHECK(cfgs[1].dataflow.seq_len == 256);
    CHECK(cfgs[1].dataflow.n_cores == 8);
    CHECK(cfgs[2].sim.llc.total_size == 128 * 1024);
}

TEST_CASE("a 1 x 1 sweep equals run_single") {
    const auto cfgs = expand_axes(small(), {{"policy", {"at+dbp"}}});
    REQUIRE(cfgs.size() == 1);
    auto one = run_single(cfgs[0]);
    CHECK(csv_of(run_sweep(cfgs)) == csv_of({one}));
}

TEST_CASE("failed runs keep their row and the sweep continues") {
    auto bad = small();
    bad.model.n_q_heads = 4;
    bad.model.n_kv_heads = 4;
    bad.dataflow.group_alloc = GroupAlloc::spatial;  // needs group size >= 2
    const auto rows = run_sweep_serial({small(), bad, small()});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].ok);
    CHECK_FALSE(rows[1].ok);
    CHECK(rows[1].error_kind == ErrorKind::config);
    CHECK(rows[2].ok);
    const auto recs = records_of(rows);
    CHECK(recs[1].at("status") == "error");
    CHECK(recs[1].at("error_kind") == "config");
}

TEST_CASE("results CSV: schema, conservation and reproducible echo") {
    const auto cfgs = expand_axes(small(), {{"policy", {"lru", "at+bypass+dbp"}}});
    const auto rows = run_sweep(cfgs);
    const auto recs = records_of(rows);
    REQUIRE(recs.size() == 2);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        CHECK(r.size() == results_columns().size());
        CHECK(r.at("schema") == kResultsSchema);
        CHECK(r.at("conserves") == "1");
        CHECK(record_number(r, "n_mem") == record_number(r, "n_hit") + record_number(r, "n_mshr_hit") +
                                               record_number(r, "n_cold") + record_number(r, "n_cf") +
                                               record_number(r, "n_bypassed"));
        // Rerunning the echoed config reproduces the row.
        auto again = run_single(record_config(r));
        again.index = i;
        const auto rerun = records_of({again});
        CHECK(rerun[0] == r);
    }
}

TEST_CASE("serial and parallel sweeps write identical tables") {
    const auto cfgs = expand_axes(small(), {{"policy", {"lru", "at", "at+bypass"}}, {"seq_len", {128, 256}}});
    CHECK(csv_of(run_sweep(cfgs, 2)) == csv_of(run_sweep_serial(cfgs)));
}

TEST_CASE("CSV reader handles quotes and rejects broken input") {
    std::istringstream good("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n");
    const auto r = read_csv(good);
    REQUIRE(r.size() == 1);
    CHECK(r[0].at("a") == "x,1");
    CHECK(r[0].at("b") == "say \"hi\"");
    std::istringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(read_csv(ragged), Error);
    std::istringstream open("a\n\"unterminated\n");
    CHECK_THROWS_AS(read_csv(open), Error);
}

TEST_CASE("report: the baseline against itself is exactly 1") {
    const auto cfgs = expand_axes(small(), {{"llc_size", {"64KB", "256KB"}}, {"policy", {"lru", "at", "at+fix0", "at+fix4", "at+bypass"}}});
    const auto rep = make_report(records_of(run_sweep(cfgs)), "lru");
    CHECK(rep.speedups.size() == 10);
    for (const auto& s : rep.speedups) {
        if (s.policy == "lru") CHECK(s.speedup == 1.0);
        CHECK(s.speedup == doctest::Approx(s.baseline_cycles / s.cycles));
    }
    REQUIRE(rep.gear_gaps.size() == 2);
    for (const auto& g : rep.gear_gaps) CHECK(g.dynamic_policy == "at+bypass");
    std::ostringstream text;
    write_report_text(text, rep);
    CHECK(text.str().find("speedup") != std::string::npos);
}

TEST_CASE("report without the baseline is an error") {
    const auto rows = run_sweep_serial({small()});
    CHECK_THROWS_AS(make_report(records_of(rows), "at+bypass"), Error);
}

TEST_CASE("fit groups are keyed by policy, ipc_mem and bandwidth") {
    auto c = small();
    apply_policy_label(c.sim.policy, "at+bypass+dbp");
    CHECK(fit_group(c) == "at+bypass+dbp/ipc_mem=1/bw=128.000000");
}

TEST_CASE("param file JSON round trip") {
    ParamFile p;
    p.groups["lru/ipc_mem=1/bw=128.000000"] = FitResult{{0.7, 0.3, 0.8, 1.5}, 0.01, 0.02, 10, 8};
    p.skipped["at/ipc_mem=1/bw=128.000000"] = "too few runs";
    const auto back = param_file_from_json(to_json(p));
    REQUIRE(back.groups.size() == 1);
    const auto& g = back.groups.begin()->second;
    CHECK(g.params.theta1 == 0.7);
    CHECK(g.params.lambda == 1.5);
    CHECK(g.n_cf_samples == 8);
    CHECK(back.skipped == p.skipped);
}
