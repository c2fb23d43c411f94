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
 * @file dram.hpp
 * @brief Channel-FIFO main memory with a two-level efficiency factor.
 *
 * Lines are interleaved over channels on the low line-address bits. Each
 * channel serves its queue in order; request k completes at
 *
 *     done_k = max(enqueue_k + min_latency, done_{k-1} + 1 / (bw_ch * eff_k))
 *
 * where eff_k is eff_seq when the request falls in one of the channel's
 * recently used rows and eff_rand otherwise. There are no banks, refresh or
 * row-buffer timings.
 */

#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "tmusim/common.hpp"

namespace tmusim {

struct DramConfig {
    std::uint32_t n_channels = 16;
    double peak_bw_bytes_per_cycle = 128.0;
    Cycle min_latency = 100;
    std::uint32_t queue_depth = 32;  // per channel
    double eff_seq = 0.9;
    double eff_rand = 0.6;
    std::uint32_t row_lines = 32;  // lines per row of one channel
    std::uint32_t open_rows = 16;  // rows per channel that count as "sequential"
};

void validate(const DramConfig& cfg);

/// Which analytical class a DRAM transaction belongs to.
enum class TrafficClass : std::uint8_t { cold, conflict, write };

struct DramRequest {
    Addr line = 0;
    bool write = false;
    std::uint32_t slice = 0;
    std::uint64_t token = 0;
    TrafficClass cls = TrafficClass::cold;
};

class Dram {
public:
    Dram(const DramConfig& cfg, std::uint32_t line_size);

    std::uint32_t channel_of(Addr line) const {
        return static_cast<std::uint32_t>(line % cfg_.n_channels);
    }

    bool can_accept(Addr line) const {
        return channels_[channel_of(line)].queue.size() < cfg_.queue_depth;
    }

    /// False means backpressure; the caller retries later.
    bool enqueue(const DramRequest& req, Cycle now);

    /// Retires every request whose completion time has come. Reads are handed
    /// to `sink(const DramRequest&) -> bool`; a refused read blocks its channel.
    template <class Sink>
    void step(Cycle now, Sink&& sink) {
        for (auto& ch : channels_) {
            while (!ch.queue.empty() && ch.queue.front().done <= double(now)) {
                const auto& head = ch.queue.front();
                if (!head.req.write && !sink(head.req)) break;
                note_done(head.req);
                ch.queue.pop_front();
            }
        }
    }

    bool idle() const;
    std::size_t queued(std::uint32_t channel) const { return channels_[channel].queue.size(); }
    std::size_t in_flight(TrafficClass cls) const { return in_flight_[static_cast<int>(cls)]; }

    const DramConfig& config() const { return cfg_; }
    double peak_lines_per_cycle() const { return lines_per_cycle_; }

    std::uint64_t reads() const { return reads_; }
    std::uint64_t writes() const { return writes_; }
    std::uint64_t completed() const { return completed_; }
    std::uint64_t completed(TrafficClass cls) const { return completed_by_[static_cast<int>(cls)]; }
    std::uint64_t sequential_hits() const { return seq_; }
    std::uint64_t served_by(std::uint32_t channel) const { return channels_[channel].served; }

private:
    struct Pending {
        DramRequest req;
        double done;
    };
    struct Channel {
        std::deque<Pending> queue;
        std::vector<std::uint64_t> rows;  // most recent last
        double last_done = 0.0;
        std::uint64_t served = 0;
    };

    void note_done(const DramRequest& r) {
        ++completed_;
        ++completed_by_[static_cast<int>(r.cls)];
        --in_flight_[static_cast<int>(r.cls)];
    }

    DramConfig cfg_;
    double lines_per_cycle_;
    std::vector<Channel> channels_;
    std::size_t in_flight_[3] = {0, 0, 0};
    std::uint64_t completed_by_[3] = {0, 0, 0};
    std::uint64_t reads_ = 0;
    std::uint64_t writes_ = 0;
    std::uint64_t completed_ = 0;
    std::uint64_t seq_ = 0;
};

}  // namespace tmusim
