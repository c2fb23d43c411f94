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

#include "tmusim/policy.hpp"

#include <algorithm>
#include <numeric>

namespace tmusim {

const char* to_string(Replacement r) { return r == Replacement::at ? "at" : "lru"; }

const char* to_string(BypassMode m) {
    switch (m) {
        case BypassMode::off: return "off";
        case BypassMode::static_gear: return "static";
        case BypassMode::dynamic: return "dynamic";
        case BypassMode::gqa_dynamic: return "gqa_dynamic";
    }
    return "off";
}

std::string PolicyConfig::label() const {
    std::string s = to_string(replacement);
    switch (bypass_mode) {
        case BypassMode::off: break;
        case BypassMode::static_gear: s += "+fix" + std::to_string(b_gear); break;
        case BypassMode::dynamic: s += "+bypass"; break;
        case BypassMode::gqa_dynamic: s += "+gqa_bypass"; break;
    }
    if (dbp) s += "+dbp";
    return s;
}

void validate(const PolicyConfig& cfg) {
    if (cfg.b_bits < 1 || cfg.b_bits > 16) fail(ErrorKind::config, "policy: b_bits must be 1..16");
    if (cfg.b_gear > cfg.max_gear())
        fail(ErrorKind::config, "policy: b_gear " + std::to_string(cfg.b_gear) +
                                    " exceeds 2^b_bits = " + std::to_string(cfg.max_gear()));
    if (cfg.bypass_lb >= cfg.bypass_ub)
        fail(ErrorKind::config, "policy: need bypass_lb < bypass_ub");
    if (cfg.window == 0) fail(ErrorKind::config, "policy: window must be > 0");
}

std::vector<int> recency_ranks(std::span<const CacheWay> ways) {
    std::vector<std::uint32_t> order;
    for (std::uint32_t w = 0; w < ways.size(); ++w)
        if (ways[w].valid) order.push_back(w);
    std::sort(order.begin(), order.end(),
              [&](auto a, auto b) { return ways[a].stamp < ways[b].stamp; });
    std::vector<int> rank(ways.size(), -1);
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = static_cast<int>(i);
    return rank;
}

std::uint32_t select_victim(std::span<const CacheWay> ways, const Tmu& tmu,
                            const PolicyConfig& cfg) {
    return select_victim_with(ways, [&](std::uint64_t tag) { return tmu.is_dead(tag); }, cfg);
}

bool should_bypass(const BypassQuery& q, const PolicyConfig& cfg) {
    if (q.whole_tensor) return true;
    switch (cfg.bypass_mode) {
        case BypassMode::off: return false;
        case BypassMode::static_gear:
        case BypassMode::dynamic: return q.priority < q.gear;
        case BypassMode::gqa_dynamic:
            return q.priority < q.gear && q.core_is_slower && q.slice_contended;
    }
    return false;
}

std::uint32_t update_gear(std::uint32_t gear, std::uint64_t evictions, const PolicyConfig& cfg) {
    if (evictions > cfg.bypass_ub) return std::min(gear + 1, cfg.max_gear());
    if (evictions < cfg.bypass_lb) return gear == 0 ? 0 : gear - 1;
    return gear;
}

std::vector<bool> slower_cores(std::span<const std::vector<CoreId>> groups,
                               std::span<const std::uint64_t> commit_counts) {
    std::vector<bool> slower(commit_counts.size(), false);
    for (const auto& g : groups) {
        std::uint64_t fastest = 0;
        for (CoreId c : g) fastest = std::max(fastest, commit_counts[c]);
        for (CoreId c : g) slower[c] = commit_counts[c] < fastest;
    }
    return slower;
}

PolicyEngine::PolicyEngine(const PolicyConfig& cfg, std::uint32_t n_slices,
                           std::vector<std::vector<CoreId>> sharing_groups, std::uint32_t n_cores)
    : cfg_(cfg),
      gears_(n_slices, cfg.bypass_mode == BypassMode::static_gear ? cfg.b_gear : 0),
      contended_(n_slices, false),
      groups_(std::move(sharing_groups)),
      slower_(n_cores, false) {
    validate(cfg_);
}

void PolicyEngine::on_window(std::span<const std::uint64_t> evictions,
                             std::span<const std::uint64_t> commit_counts) {
    const bool adaptive = cfg_.bypass_mode == BypassMode::dynamic ||
                          cfg_.bypass_mode == BypassMode::gqa_dynamic;
    for (std::size_t s = 0; s < gears_.size(); ++s) {
        contended_[s] = evictions[s] > cfg_.bypass_ub;
        if (!adaptive) continue;
        const auto g = update_gear(gears_[s], evictions[s], cfg_);
        if (g != gears_[s]) ++gear_changes_;
        gears_[s] = g;
    }
    if (cfg_.bypass_mode == BypassMode::gqa_dynamic) slower_ = slower_cores(groups_, commit_counts);
}

bool PolicyEngine::should_bypass(bool whole_tensor, std::uint64_t tag, std::uint32_t slice,
                                 CoreId core) const {
    BypassQuery q;
    q.whole_tensor = whole_tensor;
    q.priority = Tmu::priority(tag, cfg_.b_bits);
    q.gear = gears_[slice];
    q.core_is_slower = slower_[core];
    q.slice_contended = contended_[slice];
    return tmusim::should_bypass(q, cfg_);
}

}  // namespace tmusim
