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

#include "tmusim/dram.hpp"

#include <algorithm>

namespace tmusim {

void validate(const DramConfig& cfg) {
    if (cfg.n_channels == 0) fail(ErrorKind::config, "dram: channels must be > 0");
    if (!(cfg.peak_bw_bytes_per_cycle > 0.0))
        fail(ErrorKind::config, "dram: peak_bw_bytes_per_cycle must be > 0");
    if (cfg.min_latency == 0) fail(ErrorKind::config, "dram: min_latency must be > 0");
    if (cfg.queue_depth == 0) fail(ErrorKind::config, "dram: queue_depth must be > 0");
    if (!(cfg.eff_seq > 0.0 && cfg.eff_seq <= 1.0) || !(cfg.eff_rand > 0.0 && cfg.eff_rand <= 1.0))
        fail(ErrorKind::config, "dram: efficiencies must lie in (0, 1]");
    if (cfg.row_lines == 0) fail(ErrorKind::config, "dram: row_lines must be > 0");
}

Dram::Dram(const DramConfig& cfg, std::uint32_t line_size)
    : cfg_(cfg), lines_per_cycle_(cfg.peak_bw_bytes_per_cycle / line_size), channels_(cfg.n_channels) {
    validate(cfg_);
}

bool Dram::enqueue(const DramRequest& req, Cycle now) {
    auto& ch = channels_[channel_of(req.line)];
    if (ch.queue.size() >= cfg_.queue_depth) return false;

    const std::uint64_t row = req.line / (std::uint64_t(cfg_.n_channels) * cfg_.row_lines);
    auto it = std::find(ch.rows.begin(), ch.rows.end(), row);
    const bool sequential = it != ch.rows.end();
    if (sequential) {
        ch.rows.erase(it);
        ++seq_;
    } else if (cfg_.open_rows > 0 && ch.rows.size() >= cfg_.open_rows) {
        ch.rows.erase(ch.rows.begin());
    }
    if (cfg_.open_rows > 0) ch.rows.push_back(row);

    const double per_channel = lines_per_cycle_ / cfg_.n_channels;
    const double service = 1.0 / (per_channel * (sequential ? cfg_.eff_seq : cfg_.eff_rand));
    const double done = std::max(double(now + cfg_.min_latency), ch.last_done + service);
    ch.last_done = done;
    ch.queue.push_back({req, done});
    ++ch.served;
    ++in_flight_[static_cast<int>(req.cls)];
    (req.write ? writes_ : reads_)++;
    return true;
}

bool Dram::idle() const {
    for (const auto& ch : channels_)
        if (!ch.queue.empty()) return false;
    return true;
}

}  // namespace tmusim
