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
 * @file policy.hpp
 * @brief Replacement and bypass decisions for the shared LLC.
 *
 * Victim selection runs three filters in order:
 *   1. dead block prediction: any way whose tag matches the dead FIFO,
 *   2. anti-thrashing: ways with the smallest tag[B_BITS-1:0],
 *   3. LRU among whatever survived.
 *
 * Bypassing reuses the same tag-bit priority: a missing line whose priority
 * is below the slice's B_GEAR is not allocated. B_GEAR is either fixed or
 * moved by one step per window from the slice's eviction count.
 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmusim/common.hpp"
#include "tmusim/tmu.hpp"

namespace tmusim {

enum class Replacement { lru, at };
enum class BypassMode { off, static_gear, dynamic, gqa_dynamic };

const char* to_string(Replacement r);
const char* to_string(BypassMode m);

struct PolicyConfig {
    Replacement replacement = Replacement::lru;
    bool dbp = false;
    BypassMode bypass_mode = BypassMode::off;
    std::uint32_t b_gear = 0;  // static mode only
    unsigned b_bits = 3;
    std::uint32_t bypass_ub = 16;  // evictions per window per slice
    std::uint32_t bypass_lb = 2;
    Cycle window = 4096;

    std::uint32_t max_gear() const { return 1u << b_bits; }
    /// Short label such as "at+bypass+dbp" or "at+fix3".
    std::string label() const;
};

void validate(const PolicyConfig& cfg);

/// One way of a cache set. `stamp` is the cycle-ordered time of last use;
/// the smallest stamp among valid ways is the LRU way.
struct CacheWay {
    std::uint64_t tag = 0;
    std::uint64_t stamp = 0;
    bool valid = false;
    bool dirty = false;
};

/// Ranks 0..n-1 of the valid ways, 0 = LRU (oldest). Invalid ways get -1.
std::vector<int> recency_ranks(std::span<const CacheWay> ways);

/// Generic victim selection over an arbitrary dead-tag predicate. All ways
/// must be valid.
template <class DeadPred>
std::uint32_t select_victim_with(std::span<const CacheWay> ways, DeadPred&& is_dead,
                                 const PolicyConfig& cfg) {
    constexpr std::uint32_t none = ~0u;
    std::uint32_t best = none;
    if (cfg.dbp) {
        for (std::uint32_t w = 0; w < ways.size(); ++w)
            if (is_dead(ways[w].tag) && (best == none || ways[w].stamp < ways[best].stamp))
                best = w;
        if (best != none) return best;
    }
    if (cfg.replacement == Replacement::at) {
        std::uint32_t best_prio = ~0u;
        for (std::uint32_t w = 0; w < ways.size(); ++w) {
            const auto p = Tmu::priority(ways[w].tag, cfg.b_bits);
            if (p < best_prio || (p == best_prio && ways[w].stamp < ways[best].stamp)) {
                best_prio = p;
                best = w;
            }
        }
        return best;
    }
    best = 0;
    for (std::uint32_t w = 1; w < ways.size(); ++w)
        if (ways[w].stamp < ways[best].stamp) best = w;
    return best;
}

std::uint32_t select_victim(std::span<const CacheWay> ways, const Tmu& tmu,
                            const PolicyConfig& cfg);

/// Inputs of one bypass decision; everything the policy looks at.
struct BypassQuery {
    bool whole_tensor = false;  // owning tensor registered with the bypass flag
    std::uint32_t priority = 0;
    std::uint32_t gear = 0;
    bool core_is_slower = false;   // gqa_dynamic only
    bool slice_contended = false;  // gqa_dynamic only
};

bool should_bypass(const BypassQuery& q, const PolicyConfig& cfg);

/// Applies the eviction-rate feedback rule to one gear value.
std::uint32_t update_gear(std::uint32_t gear, std::uint64_t evictions_in_window,
                          const PolicyConfig& cfg);

/// Per-slice gear state plus the gqa_bypass bookkeeping refreshed each window.
class PolicyEngine {
public:
    PolicyEngine(const PolicyConfig& cfg, std::uint32_t n_slices,
                 std::vector<std::vector<CoreId>> sharing_groups, std::uint32_t n_cores);

    const PolicyConfig& config() const { return cfg_; }
    std::uint32_t gear(std::uint32_t slice) const { return gears_[slice]; }
    std::span<const std::uint32_t> gears() const { return gears_; }
    bool contended(std::uint32_t slice) const { return contended_[slice]; }
    bool slower(CoreId core) const { return slower_[core]; }

    /// Called once per elapsed window with each slice's eviction count and
    /// the cores' commit counters.
    void on_window(std::span<const std::uint64_t> evictions,
                   std::span<const std::uint64_t> commit_counts);

    bool should_bypass(bool whole_tensor, std::uint64_t tag, std::uint32_t slice,
                       CoreId core) const;

    std::uint64_t gear_changes() const { return gear_changes_; }

private:
    PolicyConfig cfg_;
    std::vector<std::uint32_t> gears_;
    std::vector<bool> contended_;
    std::vector<std::vector<CoreId>> groups_;
    std::vector<bool> slower_;
    std::uint64_t gear_changes_ = 0;
};

/// Slower members of each sharing group: strictly fewer commits than the
/// group's fastest core. Ties mark nobody.
std::vector<bool> slower_cores(std::span<const std::vector<CoreId>> groups,
                               std::span<const std::uint64_t> commit_counts);

}  // namespace tmusim
