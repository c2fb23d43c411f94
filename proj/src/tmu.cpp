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

#include "tmusim/tmu.hpp"

#include <algorithm>

namespace tmusim {

const char* to_string(Operand op) {
    switch (op) {
        case Operand::left: return "left";
        case Operand::right: return "right";
        case Operand::output: return "output";
        case Operand::other: return "other";
    }
    return "other";
}

Tmu::Tmu(const TmuParams& params, const AddressMap& map, const TmuCapacity& cap)
    : params_(params), map_(map), cap_(cap) {
    if (params_.d_msb < params_.d_lsb || params_.d_msb >= map_.tag_bits())
        fail(ErrorKind::config, "tmu: need d_lsb <= d_msb < tag width (" +
                                    std::to_string(map_.tag_bits()) + ")");
    if (params_.b_bits < 1 || params_.b_bits > map_.tag_bits())
        fail(ErrorKind::config, "tmu: b_bits out of range");
    tensors_.reserve(cap_.tensor_entries);
    live_.reserve(cap_.tile_entries);
    fifo_.reserve(cap_.dead_fifo_depth);
}

TensorId Tmu::register_tensor(const TensorMeta& meta) {
    if (tensors_.size() >= cap_.tensor_entries)
        fail(ErrorKind::tmu, "tmu: tensor table full (" + std::to_string(cap_.tensor_entries) +
                                 " entries), cannot register '" + meta.name + "'");
    if (meta.size == 0 || meta.tile_size == 0 || meta.n_acc == 0)
        fail(ErrorKind::tmu, "tmu: tensor '" + meta.name + "' has zero size, tile or nAcc");
    if (meta.tile_size % map_.line_size() != 0 || meta.size % meta.tile_size != 0)
        fail(ErrorKind::tmu, "tmu: tensor '" + meta.name + "' is not tiled on line boundaries");
    for (const auto& e : tensors_) {
        if (meta.base < e.meta.end() && e.meta.base < meta.end())
            fail(ErrorKind::tmu, "tmu: tensor '" + meta.name + "' overlaps '" + e.meta.name + "'");
    }
    const TensorId id = next_id_++;
    tensors_.push_back({id, meta});
    return id;
}

void Tmu::clear_tensor(TensorId id) {
    auto it = std::find_if(tensors_.begin(), tensors_.end(),
                           [id](const Entry& e) { return e.id == id; });
    if (it == tensors_.end()) {
        ++warnings_;
        return;
    }
    tensors_.erase(it);
    std::erase_if(live_, [id](const TileEntry& t) { return t.tensor == id; });
}

std::optional<TensorId> Tmu::lookup(Addr addr) const {
    for (const auto& e : tensors_)
        if (e.meta.contains(addr)) return e.id;
    return std::nullopt;
}

const TensorMeta* Tmu::meta(TensorId id) const {
    for (const auto& e : tensors_)
        if (e.id == id) return &e.meta;
    return nullptr;
}

bool Tmu::lookup_bypass_flag(Addr addr) const {
    for (const auto& e : tensors_)
        if (e.meta.contains(addr)) return e.meta.bypass_whole;
    return false;
}

std::optional<Retirement> Tmu::notify_access(Addr line) {
    const Addr addr = map_.addr_of_line(line);
    const Entry* owner = nullptr;
    for (const auto& e : tensors_) {
        if (e.meta.contains(addr)) {
            owner = &e;
            break;
        }
    }
    if (!owner || owner->meta.bypass_whole) return std::nullopt;

    const auto& m = owner->meta;
    const std::uint64_t offset = addr - m.base;
    if (offset % m.tile_size != m.tile_size - map_.line_size()) return std::nullopt;

    const std::uint64_t tile = offset / m.tile_size;
    const Retirement ret{owner->id, tile, dead_pattern(map_.tag_of_line(line))};

    auto it = std::find_if(live_.begin(), live_.end(), [&](const TileEntry& t) {
        return t.tensor == owner->id && t.tile == tile;
    });
    if (it == live_.end()) {
        if (m.n_acc == 1) {
            push_dead(ret.pattern);
            return ret;
        }
        if (live_.size() >= cap_.tile_entries) {
            live_.erase(live_.begin());
            ++dropped_live_;
        }
        live_.push_back({owner->id, tile, 1});
        return std::nullopt;
    }
    if (++it->acc_cnt < m.n_acc) return std::nullopt;
    live_.erase(it);
    push_dead(ret.pattern);
    return ret;
}

void Tmu::push_dead(std::uint64_t pattern) {
    ++retirements_;
    if (cap_.dead_fifo_depth == 0) return;
    if (fifo_.size() >= cap_.dead_fifo_depth) fifo_.erase(fifo_.begin());
    fifo_.push_back(pattern);
}

bool Tmu::is_dead(std::uint64_t tag) const {
    const std::uint64_t p = dead_pattern(tag);
    for (std::uint64_t f : fifo_)
        if (f == p) return true;
    return false;
}

}  // namespace tmusim
