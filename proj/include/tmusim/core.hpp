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
 * @file core.hpp
 * @brief In-order AI core issuing line requests and compute blocks.
 *
 * A core walks its instruction stream in program order:
 *  - load_tile / store_tile expand into one request per cache line, up to
 *    ipc_mem per cycle. Loads hold an instruction-window slot until their
 *    response arrives; stores commit once the LLC accepts them.
 *  - compute waits until every earlier load has returned (the tile must be
 *    in the scratchpad), then occupies the issue stage for
 *    ceil(slots / ipc_comp) cycles.
 *
 * `committed` counts retired line requests plus retired compute blocks.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "tmusim/common.hpp"
#include "tmusim/llc.hpp"
#include "tmusim/tracegen.hpp"

namespace tmusim {

struct CoreConfig {
    std::uint32_t inst_window_depth = 128;
    std::uint32_t num_inst_windows = 1;
    std::uint32_t ipc_mem = 1;
    std::uint32_t ipc_comp = 1;
};

void validate(const CoreConfig& cfg);

class Core {
public:
    Core(CoreId id, const CoreConfig& cfg, std::span<const Instruction> stream,
         std::uint32_t line_size);

    /// Advances one cycle. `issue(const MemRequest&) -> bool` offers a request
    /// to the memory system; false stalls the core for the rest of the cycle.
    template <class Issue>
    void step(Cycle now, Issue&& issue);

    void on_response(Cycle now);

    bool done() const { return pc_ >= stream_.size() && loads_in_flight_ == 0; }
    std::uint64_t committed() const { return committed_; }
    std::uint32_t in_flight() const { return loads_in_flight_; }
    std::size_t pc() const { return pc_; }
    CoreId id() const { return id_; }
    std::uint64_t issued() const { return issued_; }
    std::uint64_t stall_cycles() const { return stalls_; }
    Cycle finish_cycle() const { return finish_; }

    /// Instructions at or beyond `pc` may not issue yet.
    void set_issue_limit(std::size_t pc) { limit_ = pc; }

    /// When enabled, records the cycle each line request was issued.
    void record_issue_cycles(bool on) { record_ = on; }
    const std::vector<Cycle>& issue_cycles() const { return issue_log_; }

private:
    CoreId id_;
    CoreConfig cfg_;
    std::span<const Instruction> stream_;
    std::uint32_t line_size_;
    std::size_t pc_ = 0;
    std::uint32_t cursor_ = 0;  // next line within the current memory instruction
    std::uint64_t compute_left_ = 0;
    std::uint32_t loads_in_flight_ = 0;
    std::uint64_t committed_ = 0;
    std::uint64_t issued_ = 0;
    std::uint64_t next_id_ = 0;
    std::uint64_t stalls_ = 0;
    Cycle finish_ = 0;
    std::size_t limit_ = ~std::size_t{0};
    bool record_ = false;
    std::vector<Cycle> issue_log_;
};

template <class Issue>
void Core::step(Cycle now, Issue&& issue) {
    if (compute_left_ > 0) {
        if (--compute_left_ == 0) {
            ++committed_;
            ++pc_;
            if (done()) finish_ = now + 1;
        }
        return;
    }
    std::uint32_t budget = cfg_.ipc_mem;
    const std::size_t end = std::min(stream_.size(), limit_);
    while (pc_ < end) {
        const Instruction& ins = stream_[pc_];
        if (ins.kind == InstKind::compute) {
            if (loads_in_flight_ > 0 || budget < cfg_.ipc_mem) {
                if (budget == cfg_.ipc_mem) ++stalls_;
                return;
            }
            compute_left_ = (ins.slots + cfg_.ipc_comp - 1) / cfg_.ipc_comp;
            if (--compute_left_ == 0) {
                ++committed_;
                ++pc_;
                if (done()) finish_ = now + 1;
            }
            return;
        }
        const std::uint32_t lines = ins.length / line_size_;
        const bool write = ins.kind == InstKind::store_tile;
        while (cursor_ < lines) {
            if (budget == 0) return;
            if (loads_in_flight_ >= cfg_.inst_window_depth) {
                if (budget == cfg_.ipc_mem) ++stalls_;
                return;
            }
            const MemRequest req{next_id_, id_, ins.base / line_size_ + cursor_, write};
            if (!issue(req)) {
                if (budget == cfg_.ipc_mem) ++stalls_;
                return;
            }
            ++next_id_;
            ++issued_;
            ++cursor_;
            --budget;
            if (record_) issue_log_.push_back(now);
            if (write)
                ++committed_;
            else
                ++loads_in_flight_;
        }
        cursor_ = 0;
        ++pc_;
        if (done()) finish_ = now + 1;
    }
}

}  // namespace tmusim
