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
 * @file simulator.hpp
 * @brief Cycle loop tying cores, LLC, TMU, policy engine and DRAM together.
 *
 * Order of events inside one cycle:
 *   1. DRAM retires due requests into the slices' response queues,
 *   2. the LLC hands due responses back to the cores,
 *   3. every slice performs one action,
 *   4. every core issues,
 *   5. window bookkeeping (gears, slower cores, series),
 *   6. tensor registration / clearing between batches.
 *
 * Tensors of a batch are registered before any core may issue an
 * instruction of that batch. A batch is cleared once every core has moved
 * past it and the LLC has processed all of its requests.
 */

#pragma once

#include <cstdint>
#include <vector>

#include "tmusim/core.hpp"
#include "tmusim/dram.hpp"
#include "tmusim/llc.hpp"
#include "tmusim/policy.hpp"
#include "tmusim/tmu.hpp"
#include "tmusim/tracegen.hpp"

namespace tmusim {

struct SimConfig {
    LlcConfig llc;
    DramConfig dram;
    CoreConfig core;
    PolicyConfig policy;
    TmuParams tmu;
    TmuCapacity tmu_capacity;
    Cycle hit_rate_window = 4096;
    Cycle bw_window = 256;          // phase length for the bandwidth samples
    double warmup_fraction = 0.25;  // of the steady phase, ignored by the steady-state hit rate
    Cycle stall_limit = 200000;     // cycles without progress before aborting
};

void validate(const SimConfig& cfg);

/// Achieved DRAM throughput while one miss class dominates, in lines per
/// cycle. Time is cut into bw_window phases; a phase belongs to the class
/// with more completed reads. `reads` counts every transfer (reads and
/// writes) completed in the class's phases, `busy_cycles` the cycles of those
/// phases with DRAM work in flight.
struct BandwidthSample {
    std::uint64_t reads = 0;
    std::uint64_t busy_cycles = 0;
    double lines_per_cycle() const { return busy_cycles ? double(reads) / double(busy_cycles) : 0.0; }
};

struct SimResult {
    Cycle cycles = 0;        // completion of the last core
    Cycle drain_cycles = 0;  // until the memory system is idle
    LlcStats llc;
    std::uint64_t dram_reads = 0;
    std::uint64_t dram_writes = 0;
    std::uint64_t dram_sequential = 0;
    BandwidthSample bw_cold;
    BandwidthSample bw_conflict;
    std::vector<std::uint64_t> committed;  // per core
    std::vector<Cycle> core_finish;

    /// Hits (cache + MSHR) and accesses of cacheable tensors per hit-rate window.
    std::vector<std::uint32_t> window_hits;
    std::vector<std::uint32_t> window_accesses;
    /// evictions[w][s]: evictions of slice s during policy window w.
    std::vector<std::vector<std::uint32_t>> window_evictions;
    /// Mean B_GEAR over slices after each policy window.
    std::vector<double> mean_gear;

    std::uint64_t cacheable_accesses = 0;
    std::uint64_t cacheable_hits = 0;
    std::uint64_t cacheable_cold = 0;
    double steady_hit_rate = 0.0;  // cacheable hit rate after warmup, before the first core finishes

    std::uint64_t tmu_retirements = 0;
    std::uint64_t tmu_dropped_tiles = 0;
    std::uint64_t tmu_warnings = 0;
    std::uint64_t gear_changes = 0;

    /// n_mem = hit + mshr_hit + cold + conflict + bypassed.
    bool conserves(std::uint64_t n_mem) const { return llc.accesses() == n_mem; }
    /// Hits per re-reference of cacheable data, excluding first touches.
    double reuse_hit_rate() const;
};

SimResult simulate(const DataflowProgram& program, const SimConfig& cfg);

}  // namespace tmusim
