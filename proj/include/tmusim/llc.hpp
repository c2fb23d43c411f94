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
 * @file llc.hpp
 * @brief Sliced, set-associative, write-back / write-allocate shared cache.
 *
 * Every slice owns a request queue fed by the cores, a response queue fed by
 * DRAM, a handful of MSHRs and a table of in-flight bypassed reads. Each
 * cycle a slice performs one action, draining its response queue first.
 *
 * Misses are classified on the way to DRAM: a line that was never fetched
 * in this run is a cold miss, anything else a conflict miss. Bypassed reads
 * never merge, not even with each other.
 *
 * `num_target` bounds the DRAM reads (MSHR fills plus bypassed reads) a
 * slice may have outstanding.
 */

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_set>
#include <vector>

#include "tmusim/common.hpp"
#include "tmusim/dram.hpp"
#include "tmusim/policy.hpp"
#include "tmusim/tmu.hpp"

namespace tmusim {

struct LlcConfig {
    std::uint64_t total_size = 256 * 1024;
    std::uint32_t n_slices = 32;
    std::uint32_t associativity = 8;
    std::uint32_t line_size = 64;
    Cycle data_latency = 25;
    std::uint32_t mshr_entries = 6;  // per slice
    std::uint32_t req_q_size = 12;
    std::uint32_t resp_q_size = 64;
    std::uint32_t num_target = 8;

    std::uint64_t sets_per_slice() const {
        return total_size / (std::uint64_t(n_slices) * associativity * line_size);
    }
    AddressMap address_map() const { return {line_size, sets_per_slice(), n_slices}; }
};

void validate(const LlcConfig& cfg);

enum class AccessOutcome : std::uint8_t { hit, mshr_hit, cold_miss, conflict_miss, bypassed };

const char* to_string(AccessOutcome o);

struct MemRequest {
    std::uint64_t id = 0;
    CoreId core = 0;
    Addr line = 0;
    bool write = false;
};

struct CoreResponse {
    CoreId core;
    std::uint64_t id;
    Cycle ready;
};

struct LlcStats {
    std::array<std::uint64_t, 5> outcomes{};  // indexed by AccessOutcome
    std::uint64_t bypassed_cold = 0;          // bypassed requests to never-fetched lines
    std::uint64_t bypassed_conflict = 0;
    std::uint64_t bypassed_stores = 0;
    std::uint64_t bypassed_reads = 0;
    std::uint64_t evictions = 0;
    std::uint64_t dead_evictions = 0;
    std::uint64_t false_dead = 0;  // a dead-evicted line was requested again
    std::uint64_t writebacks = 0;
    std::uint64_t fills = 0;
    std::uint64_t stalled_requests = 0;
    std::uint64_t stalled_fills = 0;

    std::uint64_t count(AccessOutcome o) const { return outcomes[static_cast<int>(o)]; }
    std::uint64_t accesses() const;
};

/// What the slice did in one cycle.
enum class SliceAction : std::uint8_t { idle, fill, request, stall };

class Llc {
public:
    Llc(const LlcConfig& cfg, Tmu& tmu, PolicyEngine& policy, Dram& dram);

    const LlcConfig& config() const { return cfg_; }
    const AddressMap& address_map() const { return map_; }
    std::uint32_t slice_of(Addr line) const { return map_.slice_of_line(line); }

    bool can_accept(Addr line) const;
    /// Places a core request at the slice input. False when req_q is full.
    bool push_request(const MemRequest& req);

    /// DRAM read completion. False when the slice's response queue is full.
    bool push_fill(const DramRequest& fill);

    /// One cycle of every slice in slice order.
    void step(Cycle now);
    SliceAction step_slice(std::uint32_t slice, Cycle now);

    /// Hands every response due by `now` to `sink(const CoreResponse&)`.
    template <class Sink>
    void deliver(Cycle now, Sink&& sink) {
        for (auto& s : slices_) {
            while (!s.hit_pipe.empty() && s.hit_pipe.front().ready <= now) {
                sink(s.hit_pipe.front());
                s.hit_pipe.pop_front();
            }
            while (!s.fill_pipe.empty() && s.fill_pipe.front().ready <= now) {
                sink(s.fill_pipe.front());
                s.fill_pipe.pop_front();
            }
        }
    }

    /// Evictions in `slice` during the last `window` cycles up to `now`.
    std::uint64_t eviction_rate(std::uint32_t slice, Cycle window, Cycle now) const;
    /// Evictions per slice since the previous call.
    std::vector<std::uint64_t> take_window_evictions();

    bool idle() const;
    const LlcStats& stats() const { return stats_; }
    /// Outcome of the most recently processed request (for tracing).
    AccessOutcome last_outcome() const { return last_outcome_; }

    std::span<const CacheWay> set_ways(std::uint32_t slice, std::uint32_t set) const;
    bool resident(Addr line) const;
    std::size_t mshr_occupancy(std::uint32_t slice) const { return slices_[slice].mshr.size(); }
    std::size_t req_queue(std::uint32_t slice) const { return slices_[slice].req_q.size(); }
    std::size_t resp_queue(std::uint32_t slice) const { return slices_[slice].resp_q.size(); }

    /// Per-access hook: (request, outcome, first fetch of the line) after each processed request.
    using Observer = std::function<void(const MemRequest&, AccessOutcome, bool)>;
    void set_observer(Observer fn) {
        observer_ = std::move(fn);
    }

private:
    struct Waiter {
        CoreId core;
        std::uint64_t id;
    };
    struct Mshr {
        Addr line;
        std::vector<Waiter> waiters;
        bool dirty;
    };
    struct BypassRead {
        std::uint64_t token;
        Waiter waiter;
    };
    struct Slice {
        std::vector<CacheWay> ways;
        std::deque<MemRequest> req_q;
        std::deque<DramRequest> resp_q;
        std::vector<Mshr> mshr;
        std::vector<BypassRead> bypass;
        std::deque<CoreResponse> hit_pipe;
        std::deque<CoreResponse> fill_pipe;
        std::deque<Cycle> eviction_log;
        std::uint64_t window_evictions = 0;
        std::uint64_t tick = 0;
        std::unordered_set<Addr> fetched;
        std::unordered_set<Addr> dead_evicted;

        std::uint32_t outstanding() const {
            return static_cast<std::uint32_t>(mshr.size() + bypass.size());
        }
    };

    bool handle_fill(Slice& s, std::uint32_t slice, Cycle now);
    bool handle_request(Slice& s, std::uint32_t slice, Cycle now);
    CacheWay* find_way(Slice& s, Addr line);
    void note_eviction(Slice& s, Cycle now);

    LlcConfig cfg_;
    AddressMap map_;
    Tmu& tmu_;
    PolicyEngine& policy_;
    Dram& dram_;
    std::vector<Slice> slices_;
    LlcStats stats_;
    std::uint64_t next_token_ = 1;
    Cycle eviction_history_;
    AccessOutcome last_outcome_ = AccessOutcome::hit;
    Observer observer_;
};

}  // namespace tmusim
