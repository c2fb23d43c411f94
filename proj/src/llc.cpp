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

#include "tmusim/llc.hpp"

#include <algorithm>
#include <numeric>

namespace tmusim {

const char* to_string(AccessOutcome o) {
    switch (o) {
        case AccessOutcome::hit: return "hit";
        case AccessOutcome::mshr_hit: return "mshr_hit";
        case AccessOutcome::cold_miss: return "cold_miss";
        case AccessOutcome::conflict_miss: return "conflict_miss";
        case AccessOutcome::bypassed: return "bypassed";
    }
    return "hit";
}

std::uint64_t LlcStats::accesses() const {
    return std::accumulate(outcomes.begin(), outcomes.end(), std::uint64_t{0});
}

void validate(const LlcConfig& cfg) {
    if (cfg.n_slices == 0 || cfg.associativity == 0 || cfg.line_size == 0 || cfg.total_size == 0)
        fail(ErrorKind::config, "llc: sizes must be positive");
    const std::uint64_t unit = std::uint64_t(cfg.n_slices) * cfg.associativity * cfg.line_size;
    if (cfg.total_size % unit != 0)
        fail(ErrorKind::config, "llc: total_size must be divisible by n_slices * associativity * "
                                "line_size");
    if (!is_pow2(cfg.sets_per_slice()) || !is_pow2(cfg.n_slices) || !is_pow2(cfg.line_size))
        fail(ErrorKind::config, "llc: sets per slice, slices and line size must be powers of two");
    if (cfg.data_latency == 0 || cfg.mshr_entries == 0 || cfg.req_q_size == 0 ||
        cfg.resp_q_size == 0 || cfg.num_target == 0)
        fail(ErrorKind::config, "llc: latency, MSHR, queue sizes and num-target must be positive");
}

Llc::Llc(const LlcConfig& cfg, Tmu& tmu, PolicyEngine& policy, Dram& dram)
    : cfg_(cfg), tmu_(tmu), policy_(policy), dram_(dram) {
    validate(cfg_);
    map_ = cfg_.address_map();
    slices_.resize(cfg_.n_slices);
    for (auto& s : slices_) s.ways.resize(cfg_.sets_per_slice() * cfg_.associativity);
    eviction_history_ = std::max<Cycle>(policy_.config().window, 4096) * 2;
}

bool Llc::can_accept(Addr line) const {
    return slices_[slice_of(line)].req_q.size() < cfg_.req_q_size;
}

bool Llc::push_request(const MemRequest& req) {
    auto& s = slices_[slice_of(req.line)];
    if (s.req_q.size() >= cfg_.req_q_size) return false;
    s.req_q.push_back(req);
    return true;
}

bool Llc::push_fill(const DramRequest& fill) {
    auto& s = slices_[fill.slice];
    if (s.resp_q.size() >= cfg_.resp_q_size) return false;
    s.resp_q.push_back(fill);
    return true;
}

void Llc::step(Cycle now) {
    for (std::uint32_t i = 0; i < slices_.size(); ++i) step_slice(i, now);
}

SliceAction Llc::step_slice(std::uint32_t slice, Cycle now) {
    auto& s = slices_[slice];
    if (!s.resp_q.empty()) {
        if (handle_fill(s, slice, now)) return SliceAction::fill;
        ++stats_.stalled_fills;
    }
    if (!s.req_q.empty()) {
        if (handle_request(s, slice, now)) return SliceAction::request;
        ++stats_.stalled_requests;
        return SliceAction::stall;
    }
    return SliceAction::idle;
}

CacheWay* Llc::find_way(Slice& s, Addr line) {
    const std::uint64_t tag = map_.tag_of_line(line);
    CacheWay* base = s.ways.data() + std::size_t(map_.set_of_line(line)) * cfg_.associativity;
    for (std::uint32_t w = 0; w < cfg_.associativity; ++w)
        if (base[w].valid && base[w].tag == tag) return base + w;
    return nullptr;
}

bool Llc::handle_request(Slice& s, std::uint32_t slice, Cycle now) {
    const MemRequest req = s.req_q.front();
    AccessOutcome outcome;
    bool first = false;

    if (CacheWay* way = find_way(s, req.line)) {
        way->stamp = ++s.tick;
        if (req.write)
            way->dirty = true;
        else
            s.hit_pipe.push_back({req.core, req.id, now + cfg_.data_latency});
        outcome = AccessOutcome::hit;
    } else if (auto m = std::find_if(s.mshr.begin(), s.mshr.end(),
                                     [&](const Mshr& e) { return e.line == req.line; });
               m != s.mshr.end()) {
        if (req.write)
            m->dirty = true;
        else
            m->waiters.push_back({req.core, req.id});
        outcome = AccessOutcome::mshr_hit;
    } else {
        first = !s.fetched.contains(req.line);
        const TrafficClass cls = first ? TrafficClass::cold : TrafficClass::conflict;
        const bool whole = tmu_.lookup_bypass_flag(map_.addr_of_line(req.line));
        const bool bypass =
            policy_.should_bypass(whole, map_.tag_of_line(req.line), slice, req.core);
        if (!dram_.can_accept(req.line)) return false;
        if (bypass) {
            if (req.write) {
                dram_.enqueue({req.line, true, slice, 0, TrafficClass::write}, now);
                ++stats_.bypassed_stores;
            } else {
                if (s.outstanding() >= cfg_.num_target) return false;
                const std::uint64_t token = next_token_++;
                dram_.enqueue({req.line, false, slice, token, cls}, now);
                s.bypass.push_back({token, {req.core, req.id}});
                ++stats_.bypassed_reads;
            }
            ++(first ? stats_.bypassed_cold : stats_.bypassed_conflict);
            outcome = AccessOutcome::bypassed;
        } else {
            if (s.mshr.size() >= cfg_.mshr_entries || s.outstanding() >= cfg_.num_target)
                return false;
            Mshr e{req.line, {}, req.write};
            if (!req.write) e.waiters.push_back({req.core, req.id});
            s.mshr.push_back(std::move(e));
            dram_.enqueue({req.line, false, slice, 0, cls}, now);
            outcome = first ? AccessOutcome::cold_miss : AccessOutcome::conflict_miss;
        }
        s.fetched.insert(req.line);
        if (!s.dead_evicted.empty() && s.dead_evicted.erase(req.line)) ++stats_.false_dead;
    }

    tmu_.notify_access(req.line);
    ++stats_.outcomes[static_cast<int>(outcome)];
    last_outcome_ = outcome;
    s.req_q.pop_front();
    if (observer_) observer_(req, outcome, first);
    return true;
}

bool Llc::handle_fill(Slice& s, std::uint32_t slice, Cycle now) {
    const DramRequest f = s.resp_q.front();
    if (f.token != 0) {
        auto b = std::find_if(s.bypass.begin(), s.bypass.end(),
                              [&](const BypassRead& r) { return r.token == f.token; });
        if (b == s.bypass.end()) fail(ErrorKind::simulation, "llc: bypassed fill without requester");
        s.fill_pipe.push_back({b->waiter.core, b->waiter.id, now + 1});
        s.bypass.erase(b);
        s.resp_q.pop_front();
        return true;
    }

    auto m = std::find_if(s.mshr.begin(), s.mshr.end(),
                          [&](const Mshr& e) { return e.line == f.line; });
    if (m == s.mshr.end())
        fail(ErrorKind::simulation, "llc: fill for line without MSHR entry (slice " +
                                        std::to_string(slice) + ")");

    CacheWay* set = s.ways.data() + std::size_t(map_.set_of_line(f.line)) * cfg_.associativity;
    std::span<CacheWay> ways(set, cfg_.associativity);
    auto inv = std::find_if(ways.begin(), ways.end(), [](const CacheWay& w) { return !w.valid; });
    CacheWay* target;
    if (inv != ways.end()) {
        target = &*inv;
    } else {
        const std::uint32_t v = select_victim(ways, tmu_, policy_.config());
        target = &ways[v];
        const Addr victim_line = map_.line_from(target->tag, slice, map_.set_of_line(f.line));
        if (target->dirty) {
            if (!dram_.can_accept(victim_line)) return false;
            dram_.enqueue({victim_line, true, slice, 0, TrafficClass::write}, now);
            ++stats_.writebacks;
        }
        if (policy_.config().dbp && tmu_.is_dead(target->tag)) {
            ++stats_.dead_evictions;
            s.dead_evicted.insert(victim_line);
        }
        note_eviction(s, now);
    }
    target->tag = map_.tag_of_line(f.line);
    target->valid = true;
    target->dirty = m->dirty;
    target->stamp = ++s.tick;
    for (const auto& w : m->waiters) s.fill_pipe.push_back({w.core, w.id, now + 1});
    s.mshr.erase(m);
    s.resp_q.pop_front();
    ++stats_.fills;
    return true;
}

void Llc::note_eviction(Slice& s, Cycle now) {
    ++stats_.evictions;
    ++s.window_evictions;
    s.eviction_log.push_back(now);
    while (!s.eviction_log.empty() && s.eviction_log.front() + eviction_history_ < now)
        s.eviction_log.pop_front();
}

std::uint64_t Llc::eviction_rate(std::uint32_t slice, Cycle window, Cycle now) const {
    const auto& log = slices_[slice].eviction_log;
    return static_cast<std::uint64_t>(std::count_if(
        log.begin(), log.end(), [&](Cycle c) { return c <= now && c + window > now; }));
}

std::vector<std::uint64_t> Llc::take_window_evictions() {
    std::vector<std::uint64_t> out(slices_.size());
    for (std::size_t i = 0; i < slices_.size(); ++i) {
        out[i] = slices_[i].window_evictions;
        slices_[i].window_evictions = 0;
    }
    return out;
}

bool Llc::idle() const {
    for (const auto& s : slices_)
        if (!s.req_q.empty() || !s.resp_q.empty() || !s.mshr.empty() || !s.bypass.empty() ||
            !s.hit_pipe.empty() || !s.fill_pipe.empty())
            return false;
    return true;
}

std::span<const CacheWay> Llc::set_ways(std::uint32_t slice, std::uint32_t set) const {
    return {slices_[slice].ways.data() + std::size_t(set) * cfg_.associativity,
            cfg_.associativity};
}

bool Llc::resident(Addr line) const {
    const auto ways = set_ways(slice_of(line), map_.set_of_line(line));
    const std::uint64_t tag = map_.tag_of_line(line);
    return std::any_of(ways.begin(), ways.end(),
                       [&](const CacheWay& w) { return w.valid && w.tag == tag; });
}

}  // namespace tmusim
