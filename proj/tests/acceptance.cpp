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

// Acceptance run: one PASS / FAIL line per criterion, exit status 1 if any fails.
//
// Experiments come from configs/ (base configs and sweep axes), so every
// number printed here can be reproduced with `tmusim sweep`.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "test_support.hpp"
#include "tmusim/analytic.hpp"
#include "tmusim/config.hpp"
#include "tmusim/harness.hpp"

#ifndef TMUSIM_SOURCE_DIR
#define TMUSIM_SOURCE_DIR "."
#endif

using namespace tmusim;
using tmusim::testing::RefCache;

namespace {

struct Verdict {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;

    void require(bool ok, const std::string& what) {
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
        pass = pass && ok;
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<RunRow> g_all;  // every simulated run, for the conservation check

const std::vector<RunRow>& sweep(const std::string& base, const std::string& axes) {
    static std::map<std::string, std::vector<RunRow>> cache;
    auto [it, fresh] = cache.try_emplace(base + "|" + axes);
    if (fresh) {
        const std::string dir = TMUSIM_SOURCE_DIR "/configs/";
        it->second = run_sweep(expand_axes(load_run_config(dir + base), load_json(dir + "sweeps/" + axes)));
        g_all.insert(g_all.end(), it->second.begin(), it->second.end());
    }
    return it->second;
}

/// The run matching (seq, llc, policy); fails loudly when absent.
const RunRow& find(const std::vector<RunRow>& rows, std::uint32_t seq, std::uint64_t llc,
                   const std::string& policy) {
    for (const auto& r : rows)
        if (r.ok && r.config.dataflow.seq_len == seq && r.config.sim.llc.total_size == llc && r.policy == policy)
            return r;
    fail(ErrorKind::simulation, fmt("no successful run for seq %u llc %llu %s", seq, (unsigned long long)llc,
                                    policy.c_str()));
}

double cycles(const RunRow& r) { return double(r.result.cycles); }

/// Distinct (seq, llc) points of a sweep in order of appearance.
std::vector<std::pair<std::uint32_t, std::uint64_t>> points(const std::vector<RunRow>& rows) {
    std::vector<std::pair<std::uint32_t, std::uint64_t>> out;
    for (const auto& r : rows) {
        const auto p = std::pair(r.config.dataflow.seq_len, r.config.sim.llc.total_size);
        if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
    return out;
}

std::string kb(std::uint64_t bytes) { return std::to_string(bytes / 1024) + "KB"; }

// ---------------------------------------------------------------------------

Verdict thrashing(const std::vector<RunRow>& rows) {
    Verdict v;
    double worst_hit = 0, worst_spread = 0, slowest = 0;
    std::map<std::uint32_t, std::vector<const RunRow*>> by_seq;
    for (const auto& r : rows)
        if (r.policy == "lru" && r.config.sim.llc.total_size * 2 <= r.stats.s_work)
            by_seq[r.config.dataflow.seq_len].push_back(&r);
    for (const auto& r : rows) slowest = std::max(slowest, r.wall_seconds);
    for (const auto& [seq, lru] : by_seq) {
        double lo = 1e300, hi = 0;
        std::string sizes;
        for (const auto* r : lru) {
            v.require(r->result.steady_hit_rate <= 0.05,
                      fmt("seq %u llc %s: LRU steady hit rate %.4f <= 0.05", seq, kb(r->config.sim.llc.total_size).c_str(),
                          r->result.steady_hit_rate));
            worst_hit = std::max(worst_hit, r->result.steady_hit_rate);
            lo = std::min(lo, cycles(*r));
            hi = std::max(hi, cycles(*r));
            sizes += (sizes.empty() ? "" : ",") + kb(r->config.sim.llc.total_size);
        }
        const double spread = hi / lo - 1;
        worst_spread = std::max(worst_spread, spread);
        v.require(lru.size() >= 3 && spread < 0.03,
                  fmt("seq %u (working set %s) LRU cycles over {%s}: spread %.2f%% < 3%%", seq,
                      kb(lru.front()->stats.s_work).c_str(), sizes.c_str(), 100 * spread));
    }
    v.require(!by_seq.empty(), "at least one workload with LLC <= half the working set");
    v.require(slowest < 60, fmt("slowest run %.1f s < 60 s", slowest));
    v.summary = fmt("max LRU steady hit rate %.3f, max cycle spread %.2f%%", worst_hit, 100 * worst_spread);
    return v;
}

Verdict anti_thrashing(const std::vector<RunRow>& rows) {
    Verdict v;
    double min_gain = 1e300, max_equal = 0;
    for (const auto& [seq, llc] : points(rows)) {
        const auto& lru = find(rows, seq, llc, "lru");
        const auto& at = find(rows, seq, llc, "at");
        const double ws = double(lru.stats.s_work), ratio = double(llc) / ws;
        const double speedup = cycles(lru) / cycles(at);
        if (ratio >= 0.25 && ratio <= 0.5) {
            min_gain = std::min(min_gain, speedup);
            v.require(speedup >= 1.10, fmt("seq %u llc %s (%.2f x working set): at speedup %.3f >= 1.10", seq,
                                           kb(llc).c_str(), ratio, speedup));
        } else if (ratio == 1.0) {
            max_equal = std::max(max_equal, std::abs(speedup - 1));
            v.require(std::abs(speedup - 1) <= 0.02,
                      fmt("seq %u llc %s (= working set): |at / lru - 1| = %.2f%% <= 2%%", seq, kb(llc).c_str(),
                          100 * std::abs(speedup - 1)));
        }
    }
    v.require(min_gain < 1e300, "at least one point at 1/4 to 1/2 of the working set");
    v.summary = fmt("min speedup %.3f in the contended band, max |diff| %.2f%% at the working set", min_gain,
                    100 * max_equal);
    return v;
}

Verdict dynamic_gear(const std::vector<RunRow>& rows) {
    Verdict v;
    double worst = 0;
    for (const auto& [seq, llc] : points(rows)) {
        double best = cycles(find(rows, seq, llc, "at"));
        std::uint32_t best_gear = 0;
        for (std::uint32_t g = 1; g <= 8; ++g) {
            const double c = cycles(find(rows, seq, llc, "at+fix" + std::to_string(g)));
            if (c < best) best = c, best_gear = g;
        }
        const double gap = cycles(find(rows, seq, llc, "at+bypass")) / best - 1;
        worst = std::max(worst, gap);
        v.require(gap <= 0.05, fmt("seq %u llc %s: dynamic vs best static (gear %u) %+.2f%% <= 5%%", seq,
                                   kb(llc).c_str(), best_gear, 100 * gap));
    }
    v.summary = fmt("worst gap to the best static gear %+.2f%%", 100 * worst);
    return v;
}

Verdict gqa_direction(const std::vector<RunRow>& rows) {
    Verdict v;
    double min_gqa = 1e300;
    for (const auto& [seq, llc] : points(rows)) {
        const auto& lru = find(rows, seq, llc, "lru");
        v.require(llc < lru.stats.s_work, fmt("seq %u llc %s is contended", seq, kb(llc).c_str()));
        for (const char* naive : {"at+fix6", "at+fix7", "at+fix8", "lru+fix8"}) {
            const double s = cycles(lru) / cycles(find(rows, seq, llc, naive));
            v.require(s < 1.0, fmt("seq %u llc %s: %s speedup %.3f < 1 (strictly slower than LRU)", seq,
                                   kb(llc).c_str(), naive, s));
        }
        const double g = cycles(lru) / cycles(find(rows, seq, llc, "at+gqa_bypass"));
        min_gqa = std::min(min_gqa, g);
        v.require(g >= 1.0, fmt("seq %u llc %s: at+gqa_bypass speedup %.3f >= 1", seq, kb(llc).c_str(), g));
    }
    v.summary = fmt("static high gears below LRU, min at+gqa_bypass speedup %.3f", min_gqa);
    return v;
}

Verdict dbp_gain(const std::vector<RunRow>& rows) {
    Verdict v;
    double min_moderate = 1e300, max_severe = 0;
    for (const auto& [seq, llc] : points(rows)) {
        const auto& base = find(rows, seq, llc, "at+bypass");
        const double ratio = double(llc) / double(base.stats.s_work);
        const double s = cycles(base) / cycles(find(rows, seq, llc, "at+bypass+dbp"));
        if (ratio >= 0.5 && ratio <= 1.0) {
            min_moderate = std::min(min_moderate, s);
            v.require(s >= 1.05, fmt("seq %u llc %s (%.2f x batch working set): dbp speedup %.3f >= 1.05", seq,
                                     kb(llc).c_str(), ratio, s));
        } else if (ratio <= 0.125) {
            max_severe = std::max(max_severe, std::abs(s - 1));
            v.require(std::abs(s - 1) <= 0.02, fmt("seq %u llc %s (%.3f x batch working set): |dbp gain| %.2f%% <= 2%%",
                                                   seq, kb(llc).c_str(), ratio, 100 * std::abs(s - 1)));
        }
    }
    v.require(min_moderate < 1e300, "at least one moderate cache size");
    v.summary = fmt("min moderate-cache gain %.3f, max severe-cache gap %.2f%%", min_moderate, 100 * max_severe);
    return v;
}

Verdict combined(const std::vector<RunRow>& rows) {
    Verdict v;
    int contended = 0, strictly_best = 0;
    double worst = -1;
    for (const auto& [seq, llc] : points(rows)) {
        const auto& all = find(rows, seq, llc, "at+bypass+dbp");
        double best = 1e300;
        std::string best_name;
        for (const char* p : {"lru", "at", "lru+bypass"}) {
            const double c = cycles(find(rows, seq, llc, p));
            if (c < best) best = c, best_name = p;
        }
        const double rel = cycles(all) / best - 1;
        worst = std::max(worst, rel);
        v.require(rel <= 0.02, fmt("seq %u llc %s: at+bypass+dbp vs best single (%s) %+.2f%% <= +2%%", seq,
                                   kb(llc).c_str(), best_name.c_str(), 100 * rel));
        if (llc < all.stats.s_work) {
            ++contended;
            strictly_best += cycles(all) < best;
        }
    }
    v.require(contended > 0 && 2 * strictly_best >= contended,
              fmt("strictly best in %d of %d contended configurations (>= half)", strictly_best, contended));
    v.summary = fmt("never worse than %+.2f%%, strictly best in %d / %d contended", 100 * worst, strictly_best,
                    contended);
    return v;
}

Verdict model_fidelity(const std::vector<RunRow>& rows) {
    Verdict v;
    std::stringstream csv;
    write_results_csv(csv, rows);
    const auto recs = read_csv(csv);
    const auto params = fit_groups(recs);
    for (const auto& [group, why] : params.skipped) v.details.push_back("note skipped group " + group + ": " + why);
    const auto val = validate_rows(recs, params);
    double lo = 1e300, hi = 0;
    for (const auto& p : val.points) lo = std::min(lo, p.simulated), hi = std::max(hi, p.simulated);
    const double decades = val.points.empty() ? 0 : std::log10(hi / lo);
    for (const auto& [group, f] : params.groups)
        v.details.push_back(fmt("fit  %-38s theta1 %.3f theta2 %.3f theta3 %.3f lambda %.3f", group.c_str(),
                                f.params.theta1, f.params.theta2, f.params.theta3, f.params.lambda));
    v.require(val.summary.n >= 100, fmt("%zu validation points >= 100 (%zu skipped)", val.summary.n, val.skipped));
    v.require(decades >= 1.5, fmt("cycles span %.2f orders of magnitude >= 1.5", decades));
    v.require(val.summary.r2 >= 0.99, fmt("R^2 %.4f >= 0.99", val.summary.r2));
    v.require(val.summary.kendall_tau >= 0.90, fmt("Kendall tau %.4f >= 0.90", val.summary.kendall_tau));
    v.summary = fmt("n %zu, R^2 %.4f, tau %.4f, span %.2f decades", val.summary.n, val.summary.r2,
                    val.summary.kendall_tau, decades);
    return v;
}

// ---------------------------------------------------------------------------
// Property suites

bool conservation(std::string& note) {
    std::size_t bad = 0, failed = 0;
    for (const auto& r : g_all) {
        if (!r.ok) {
            ++failed;
            continue;
        }
        bad += !r.result.conserves(r.stats.n_mem);
    }
    note = fmt("conservation on %zu runs: %zu violations, %zu failed runs", g_all.size(), bad, failed);
    return bad == 0 && failed == 0 && !g_all.empty();
}

bool victim_reference(std::string& note) {
    std::mt19937_64 rng(7);
    int mismatches = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        PolicyConfig cfg;
        cfg.replacement = rng() % 2 ? Replacement::at : Replacement::lru;
        cfg.dbp = rng() % 2;
        cfg.b_bits = 1 + unsigned(rng() % 4);
        const std::size_t assoc = std::size_t(1) << (rng() % 5);
        std::vector<CacheWay> ways(assoc);
        std::vector<std::uint64_t> stamps(assoc);
        for (std::size_t w = 0; w < assoc; ++w) stamps[w] = w;
        std::shuffle(stamps.begin(), stamps.end(), rng);
        std::vector<bool> dead(assoc);
        for (std::size_t w = 0; w < assoc; ++w) {
            ways[w] = {(rng() % 4096) * assoc + w, stamps[w], true, false};
            dead[w] = rng() % 5 == 0;
        }
        auto is_dead = [&](std::uint64_t tag) {
            for (std::size_t w = 0; w < assoc; ++w)
                if (ways[w].tag == tag) return bool(dead[w]);
            return false;
        };
        // Reference: dead ways first (LRU among them), then lowest priority under at, then LRU.
        std::size_t want = 0;
        auto key = [&](std::size_t w) {
            const bool d = cfg.dbp && dead[w];
            const std::uint32_t p =
                !d && cfg.replacement == Replacement::at ? Tmu::priority(ways[w].tag, cfg.b_bits) : 0;
            return std::tuple(d ? 0 : 1, p, ways[w].stamp);
        };
        for (std::size_t w = 1; w < assoc; ++w)
            if (key(w) < key(want)) want = w;
        mismatches += select_victim_with(std::span<const CacheWay>(ways), is_dead, cfg) != want;
    }
    note = fmt("select_victim vs brute force on %d random sets: %d mismatches", n, mismatches);
    return mismatches == 0;
}

bool kept_set_statistics(std::string& note) {
    LlcConfig llc;
    llc.total_size = 64 * 1024;
    llc.n_slices = 4;
    int cases = 0, bad = 0;
    double worst = 0;
    for (unsigned b_bits : {2u, 3u, 4u}) {
        for (double ratio : {2.0, 3.0, 4.0}) {
            if (std::fmod(ratio * llc.associativity, double(1u << b_bits)) != 0) continue;
            PolicyConfig cfg;
            cfg.replacement = Replacement::at;
            cfg.b_bits = b_bits;
            RefCache cache(llc, cfg);
            const auto lines = std::uint64_t(ratio * double(llc.total_size) / llc.line_size);
            const Addr base = llc.address_map().line_of(0x100000);
            std::uint64_t hits = 0;
            for (int pass = 0; pass < 4; ++pass)
                for (Addr l = 0; l < lines; ++l) {
                    const bool h = cache.access(base + l);
                    if (pass == 3) hits += h;
                }
            const double s_work = double(lines * llc.line_size);
            const auto m = estimate_kept_set(s_work, b_bits, double(llc.total_size), llc.associativity).m;
            const double want = double(m) / double(1u << b_bits);
            const double got = double(hits) / double(lines);
            const double rel = want > 0 ? std::abs(got / want - 1) : got;
            worst = std::max(worst, rel);
            ++cases;
            bad += rel > 0.05;
        }
    }
    note = fmt("kept fraction vs M / 2^B_BITS on %d streamed cases: worst deviation %.2f%%", cases, 100 * worst);
    return bad == 0 && cases > 0;
}

bool gear_invariants(std::string& note) {
    std::mt19937_64 rng(99);
    int violations = 0, windows = 0;
    for (auto mode : {BypassMode::dynamic, BypassMode::gqa_dynamic}) {
        PolicyConfig cfg;
        cfg.bypass_mode = mode;
        PolicyEngine eng(cfg, 32, {{0, 1}, {2, 3}}, 4);
        std::vector<std::uint32_t> prev(eng.gears().begin(), eng.gears().end());
        for (int w = 0; w < 5000; ++w, ++windows) {
            std::vector<std::uint64_t> ev(32), commits(4);
            for (auto& e : ev) e = rng() % (3 * cfg.bypass_ub);
            for (auto& c : commits) c = rng() % 3;
            eng.on_window(ev, commits);
            for (std::size_t s = 0; s < 32; ++s) {
                const auto g = eng.gear(std::uint32_t(s));
                violations += g > cfg.max_gear() || (g > prev[s] ? g - prev[s] : prev[s] - g) > 1;
                prev[s] = g;
            }
        }
    }
    for (const auto& r : g_all)
        for (double g : r.result.mean_gear) violations += g < 0 || g > r.config.sim.policy.max_gear();
    note = fmt("gear bounds and +-1 steps over %d random windows and all simulated runs: %d violations", windows,
               violations);
    return violations == 0;
}

bool tmu_replay(std::string& note) {
    const auto p = build_matmul_dataflow(4, 4, 2, 1024, 3);
    const auto map = LlcConfig{}.address_map();
    const std::uint64_t line = p.line_size;
    std::mt19937_64 rng(11);
    int tiles = 0, bad = 0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Addr> order;
        std::vector<std::size_t> pc(p.n_cores(), 0);
        for (;;) {
            std::vector<std::size_t> ready;
            for (std::size_t c = 0; c < p.n_cores(); ++c)
                if (pc[c] < p.streams[c].size()) ready.push_back(c);
            if (ready.empty()) break;
            const auto c = ready[rng() % ready.size()];
            const auto& ins = p.streams[c][pc[c]++];
            if (ins.kind == InstKind::compute) continue;
            for (std::uint64_t l = 0; l < ins.length / line; ++l) order.push_back(ins.base / line + l);
        }
        Tmu tmu({}, map);
        std::vector<TensorId> ids;
        for (const auto& r : p.registrations) ids.push_back(tmu.register_tensor(r));
        std::map<std::pair<TensorId, std::uint64_t>, std::vector<std::size_t>> got;
        for (std::size_t i = 0; i < order.size(); ++i)
            if (auto r = tmu.notify_access(order[i])) got[{r->tensor, r->tile_index}].push_back(i);
        std::map<std::pair<TensorId, std::uint64_t>, std::size_t> want;
        for (std::size_t t = 0; t < p.registrations.size(); ++t) {
            const auto& m = p.registrations[t];
            std::map<Addr, std::uint32_t> seen;
            for (std::size_t i = 0; i < order.size(); ++i) {
                const Addr a = order[i] * line;
                if (!m.contains(a) || (a - m.base) % m.tile_size != m.tile_size - line) continue;
                if (++seen[a] == m.n_acc) want[{ids[t], (a - m.base) / m.tile_size}] = i;
            }
        }
        bad += got.size() != want.size();
        for (const auto& [key, pos] : want) {
            ++tiles;
            auto it = got.find(key);
            bad += it == got.end() || it->second.size() != 1 || it->second[0] != pos;
        }
    }
    note = fmt("TMU retirement positions vs functional replay: %d tiles, %d mismatches", tiles, bad);
    return bad == 0 && tiles > 0;
}

bool worked_examples(std::string& note) {
    AnalyticalInput a;
    a.n_hit = a.n_mem = 1000;
    a.n_cores = 16;
    a.v_llc = 32;
    const double t_hit = predict_time(a, {}).t_hit;

    AnalyticalInput b;
    b.n_hit = 10, b.n_cold = 20, b.n_cf = 60, b.n_comp = 100;
    b.n_mem = 90, b.n_cold_mem = 20, b.n_cf_mem = 60;
    b.v_llc = b.bw = 1e9;
    const double t = predict_time(b, {}).t;

    const auto k = estimate_kept_set(8.0 * (1 << 20), 3, 4.0 * (1 << 20), 8);
    note = fmt("t_hit %.2f (62.5), t %.2f (130), kept set M=%u S_kept=%.1fMB (3, 3MB)", t_hit, t, k.m,
               k.s_kept / (1 << 20));
    return std::abs(t_hit - 62.5) < 1e-9 && std::abs(t - 130) < 1e-9 && k.m == 3 &&
           std::abs(k.s_kept - 3.0 * (1 << 20)) < 1e-6;
}

bool kept_set_maximality(std::string& note) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> size(1e3, 1e9);
    int bad = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double w = size(rng), c = size(rng);
        const unsigned b = 1 + unsigned(rng() % 8);
        const std::uint32_t assoc = 2 + std::uint32_t(rng() % 31);
        const auto r = estimate_kept_set(w, b, c, assoc);
        const double tiers = double(1u << b), bound = c * (assoc - 1) / assoc;
        bad += r.m > (1u << b) || w * r.m / tiers > bound || (r.m < (1u << b) && w * (r.m + 1) / tiers <= bound);
    }
    note = fmt("estimate_kept_set inequality and maximality on %d random inputs: %d violations", n, bad);
    return bad == 0;
}

Verdict properties() {
    Verdict v;
    int passed = 0, total = 0;
    for (auto* check : {conservation, victim_reference, kept_set_statistics, gear_invariants, tmu_replay,
                        worked_examples, kept_set_maximality}) {
        std::string note;
        const bool ok = check(note);
        v.require(ok, note);
        passed += ok;
        ++total;
    }
    v.summary = fmt("%d / %d property suites hold", passed, total);
    return v;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {"thrashing baseline", [] { return thrashing(sweep("qwen3-8b.json", "thrashing.json")); }},
        {"anti-thrashing gain", [] { return anti_thrashing(sweep("qwen3-8b.json", "thrashing.json")); }},
        {"dynamic bypass near-optimality", [] { return dynamic_gear(sweep("qwen3-8b.json", "gear.json")); }},
        {"gqa_bypass direction", [] { return gqa_direction(sweep("qwen3-8b.json", "gqa.json")); }},
        {"DBP multi-batch gain", [] { return dbp_gain(sweep("qwen3-8b.json", "dbp.json")); }},
        {"combined-policy dominance", [] { return combined(sweep("qwen3-8b.json", "combined.json")); }},
        {"analytical model fidelity", [] { return model_fidelity(sweep("qwen3-8b.json", "validation.json")); }},
        {"property suites", [] { return properties(); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].run();
        } catch (const std::exception& e) {
            v.pass = false;
            v.summary = std::string("error: ") + e.what();
        }
        for (const auto& d : v.details) std::cout << "    " << d << '\n';
        std::cout << "criterion " << i + 1 << " (" << criteria[i].name << "): " << (v.pass ? "PASS" : "FAIL")
                  << " -- " << v.summary << std::endl;
        failed += !v.pass;
    }
    return failed ? 1 : 0;
}
