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

#include "tmusim/simulator.hpp"

#include <algorithm>
#include <numeric>

namespace tmusim {

void validate(const SimConfig& cfg) {
    validate(cfg.llc);
    validate(cfg.dram);
    validate(cfg.core);
    validate(cfg.policy);
    if (cfg.tmu.b_bits != cfg.policy.b_bits)
        fail(ErrorKind::config, "tmu and policy b_bits differ");
    if (cfg.hit_rate_window == 0) fail(ErrorKind::config, "hit_rate_window must be > 0");
    if (cfg.bw_window == 0) fail(ErrorKind::config, "bw_window must be > 0");
    if (cfg.warmup_fraction < 0.0 || cfg.warmup_fraction >= 1.0)
        fail(ErrorKind::config, "warmup_fraction must lie in [0, 1)");
}

double SimResult::reuse_hit_rate() const {
    const std::uint64_t reuses = cacheable_accesses - cacheable_cold;
    return reuses ? double(cacheable_hits) / double(reuses) : 0.0;
}

namespace {

/// Registers and clears per-batch tensors and gates core issue accordingly.
class EpochDriver {
public:
    EpochDriver(const DataflowProgram& p, Tmu& tmu, std::size_t capacity)
        : p_(p), tmu_(tmu), capacity_(capacity) {
        const std::uint32_t n = std::max<std::uint32_t>(1, p.n_epochs());
        by_epoch_.resize(n);
        lo_.assign(n, ~Addr{0});
        hi_.assign(n, 0);
        for (std::size_t i = 0; i < p.registrations.size(); ++i) {
            const auto& r = p.registrations[i];
            by_epoch_[r.epoch].push_back(i);
            lo_[r.epoch] = std::min(lo_[r.epoch], r.base);
            hi_[r.epoch] = std::max(hi_[r.epoch], r.end());
        }
        for (const auto& e : by_epoch_)
            if (e.size() > capacity_)
                fail(ErrorKind::tmu, "a single batch needs " + std::to_string(e.size()) +
                                         " tensor entries, TMU holds " + std::to_string(capacity_));
        pending_.assign(n, 0);
        ids_.resize(n);
        register_ready();
    }

    std::uint32_t epoch_of_line(Addr line) const {
        const Addr a = line * p_.line_size;
        for (std::uint32_t e = first_live_; e < lo_.size(); ++e)
            if (a >= lo_[e] && a < hi_[e]) return e;
        return ~0u;
    }

    void on_issue(Addr line) {
        const auto e = epoch_of_line(line);
        if (e != ~0u) ++pending_[e];
    }
    void on_processed(Addr line) {
        const auto e = epoch_of_line(line);
        if (e != ~0u) --pending_[e];
    }

    /// Index one past the last instruction core `c` may issue.
    std::size_t issue_limit(CoreId c) const {
        if (next_ >= by_epoch_.size()) return ~std::size_t{0};
        return next_ == 0 ? 0 : p_.epoch_ends[c][next_ - 1];
    }

    /// Clears finished batches and registers the next ones. True if anything changed.
    bool update(const std::vector<Core>& cores) {
        bool changed = false;
        while (first_live_ < next_ && pending_[first_live_] == 0 &&
               std::all_of(cores.begin(), cores.end(), [&](const Core& c) {
                   return c.pc() >= p_.epoch_ends[c.id()][first_live_] &&
                          c.in_flight() == 0;
               })) {
            for (TensorId id : ids_[first_live_]) tmu_.clear_tensor(id);
            ++first_live_;
            changed = true;
        }
        return register_ready() || changed;
    }

private:
    bool register_ready() {
        bool changed = false;
        while (next_ < by_epoch_.size() &&
               tmu_.registered() + by_epoch_[next_].size() <= capacity_) {
            for (std::size_t i : by_epoch_[next_])
                ids_[next_].push_back(tmu_.register_tensor(p_.registrations[i]));
            ++next_;
            changed = true;
        }
        return changed;
    }

    const DataflowProgram& p_;
    Tmu& tmu_;
    std::size_t capacity_;
    std::vector<std::vector<std::size_t>> by_epoch_;
    std::vector<Addr> lo_, hi_;
    std::vector<std::int64_t> pending_;
    std::vector<std::vector<TensorId>> ids_;
    std::uint32_t next_ = 0;        // first batch not yet registered
    std::uint32_t first_live_ = 0;  // oldest batch not yet cleared
};

}  // namespace

SimResult simulate(const DataflowProgram& program, const SimConfig& cfg) {
    validate(cfg);
    if (program.line_size != cfg.llc.line_size)
        fail(ErrorKind::config, "trace line size differs from the LLC line size");
    const auto n_cores = static_cast<std::uint32_t>(program.n_cores());
    if (program.epoch_ends.size() != n_cores)
        fail(ErrorKind::config, "dataflow program lacks per-core batch boundaries");

    const AddressMap map = cfg.llc.address_map();
    Tmu tmu(cfg.tmu, map, cfg.tmu_capacity);
    PolicyEngine policy(cfg.policy, cfg.llc.n_slices, program.sharing_groups, n_cores);
    Dram dram(cfg.dram, cfg.llc.line_size);
    Llc llc(cfg.llc, tmu, policy, dram);
    EpochDriver epochs(program, tmu, cfg.tmu_capacity.tensor_entries);

    std::vector<Core> cores;
    cores.reserve(n_cores);
    for (CoreId c = 0; c < n_cores; ++c) {
        cores.emplace_back(c, cfg.core, program.streams[c], program.line_size);
        cores.back().set_issue_limit(epochs.issue_limit(c));
    }

    SimResult r;
    Cycle now = 0;
    std::uint32_t hr_hits = 0, hr_acc = 0;
    llc.set_observer([&](const MemRequest& req, AccessOutcome o, bool first_fetch) {
        epochs.on_processed(req.line);
        if (tmu.lookup_bypass_flag(map.addr_of_line(req.line))) return;
        ++hr_acc;
        ++r.cacheable_accesses;
        if (o == AccessOutcome::hit || o == AccessOutcome::mshr_hit) {
            ++hr_hits;
            ++r.cacheable_hits;
        } else if (first_fetch) {
            ++r.cacheable_cold;
        }
    });

    // Bandwidth phases: completion counts at the start of the current phase.
    std::uint64_t phase_cold = 0, phase_cf = 0, phase_all = 0, phase_busy = 0;
    auto close_phase = [&] {
        const std::uint64_t cold = dram.completed(TrafficClass::cold) - phase_cold;
        const std::uint64_t cf = dram.completed(TrafficClass::conflict) - phase_cf;
        const std::uint64_t all = dram.completed() - phase_all;
        if (cold + cf > 0) {
            auto& s = cold >= cf ? r.bw_cold : r.bw_conflict;
            s.reads += all;
            s.busy_cycles += phase_busy;
        }
        phase_cold += cold;
        phase_cf += cf;
        phase_all += all;
        phase_busy = 0;
    };

    std::vector<std::uint64_t> commits(n_cores);
    std::uint64_t progress_mark = 0;
    Cycle last_progress = 0;
    auto all_done = [&] {
        return std::all_of(cores.begin(), cores.end(), [](const Core& c) { return c.done(); });
    };

    while (!(all_done() && llc.idle() && dram.idle())) {
        dram.step(now, [&](const DramRequest& f) {
            return llc.push_fill(f);
        });
        llc.deliver(now, [&](const CoreResponse& resp) { cores[resp.core].on_response(now); });
        llc.step(now);
        for (auto& core : cores) {
            core.step(now, [&](const MemRequest& req) {
                if (!llc.push_request(req)) return false;
                epochs.on_issue(req.line);
                return true;
            });
        }
        if (!dram.idle()) ++phase_busy;

        ++now;
        if (now % cfg.bw_window == 0) close_phase();
        if (now % cfg.policy.window == 0) {
            for (CoreId c = 0; c < n_cores; ++c) commits[c] = cores[c].committed();
            const auto ev = llc.take_window_evictions();
            policy.on_window(ev, commits);
            r.window_evictions.emplace_back(ev.begin(), ev.end());
            const auto g = policy.gears();
            r.mean_gear.push_back(double(std::accumulate(g.begin(), g.end(), std::uint64_t{0})) /
                                  double(g.size()));
        }
        if (now % cfg.hit_rate_window == 0) {
            r.window_hits.push_back(hr_hits);
            r.window_accesses.push_back(hr_acc);
            hr_hits = hr_acc = 0;
        }
        if (epochs.update(cores))
            for (CoreId c = 0; c < n_cores; ++c) cores[c].set_issue_limit(epochs.issue_limit(c));

        const std::uint64_t mark = llc.stats().accesses() + llc.stats().fills + dram.completed() +
                                   std::accumulate(cores.begin(), cores.end(), std::uint64_t{0},
                                                   [](std::uint64_t a, const Core& c) {
                                                       return a + c.committed();
                                                   });
        if (mark != progress_mark) {
            progress_mark = mark;
            last_progress = now;
        } else if (now - last_progress > cfg.stall_limit) {
            fail(ErrorKind::simulation,
                 "no progress for " + std::to_string(cfg.stall_limit) + " cycles at cycle " +
                     std::to_string(now));
        }
    }
    close_phase();
    if (hr_acc > 0) {
        r.window_hits.push_back(hr_hits);
        r.window_accesses.push_back(hr_acc);
    }

    r.drain_cycles = now;
    for (const auto& c : cores) {
        r.committed.push_back(c.committed());
        r.core_finish.push_back(c.finish_cycle());
        r.cycles = std::max(r.cycles, c.finish_cycle());
    }
    r.llc = llc.stats();
    r.dram_reads = dram.reads();
    r.dram_writes = dram.writes();
    r.dram_sequential = dram.sequential_hits();
    r.tmu_retirements = tmu.retirements();
    r.tmu_dropped_tiles = tmu.dropped_live_tiles();
    r.tmu_warnings = tmu.warnings();
    r.gear_changes = policy.gear_changes();

    // Steady state: after warmup and before the first active core finishes.
    Cycle first_finish = r.cycles;
    for (std::size_t c = 0; c < cores.size(); ++c)
        if (r.committed[c] > 0) first_finish = std::min(first_finish, r.core_finish[c]);
    std::size_t end = std::min<std::size_t>(r.window_accesses.size(), first_finish / cfg.hit_rate_window);
    const std::size_t skip = static_cast<std::size_t>(cfg.warmup_fraction * double(end));
    if (skip >= end) end = r.window_accesses.size();  // too short to have a steady phase
    std::uint64_t h = 0, a = 0;
    for (std::size_t i = skip; i < end; ++i) {
        h += r.window_hits[i];
        a += r.window_accesses[i];
    }
    r.steady_hit_rate = a ? double(h) / double(a) : 0.0;
    return r;
}

}  // namespace tmusim
