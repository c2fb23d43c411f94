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
 * @file tmu.hpp
 * @brief Tensor Management Unit.
 *
 * The TMU holds three structures:
 *  - a small tensor metadata table filled by registration events,
 *  - live tile info: one access counter per tile that has been touched but
 *    not yet used up,
 *  - the dead tile FIFO: tag[D_MSB:D_LSB] of recently retired tiles.
 *
 * Only the tile's last cache line (TLL, the highest-addressed line of a tile)
 * advances the counter. A tile retires when its counter reaches nAcc.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmusim/common.hpp"

namespace tmusim {

enum class Operand { left, right, output, other };

const char* to_string(Operand op);

struct TensorMeta {
    std::string name;
    Addr base = 0;
    std::uint64_t size = 0;       // bytes
    std::uint64_t tile_size = 0;  // bytes, multiple of the line size
    std::uint32_t n_acc = 1;
    bool bypass_whole = false;
    Operand operand = Operand::other;
    std::uint32_t epoch = 0;  // batch the tensor belongs to

    Addr end() const { return base + size; }
    bool contains(Addr addr) const { return addr >= base && addr < end(); }
};

struct TmuParams {
    unsigned d_lsb = 0;
    unsigned d_msb = 15;
    unsigned b_bits = 3;
};

struct TmuCapacity {
    std::size_t tensor_entries = 8;
    std::size_t tile_entries = 256;
    std::size_t dead_fifo_depth = 16;
};

using TensorId = std::uint32_t;

struct Retirement {
    TensorId tensor;
    std::uint64_t tile_index;
    std::uint64_t pattern;  // tag[D_MSB:D_LSB] of the TLL
};

class Tmu {
public:
    Tmu(const TmuParams& params, const AddressMap& map, const TmuCapacity& cap = {});

    /// Throws Error(tmu) when the table is full or the region overlaps.
    TensorId register_tensor(const TensorMeta& meta);

    /// Unknown ids leave the state unchanged and bump warnings().
    void clear_tensor(TensorId id);

    /// Reports one LLC access. Addresses outside every tensor are ignored.
    std::optional<Retirement> notify_access(Addr line);

    bool is_dead(std::uint64_t tag) const;
    std::uint64_t dead_pattern(std::uint64_t tag) const {
        return bit_field(tag, params_.d_msb, params_.d_lsb);
    }

    /// tag[b_bits-1:0]
    static std::uint32_t priority(std::uint64_t tag, unsigned b_bits) {
        return static_cast<std::uint32_t>(tag & ((1ull << b_bits) - 1));
    }
    std::uint32_t priority(std::uint64_t tag) const { return priority(tag, params_.b_bits); }

    bool lookup_bypass_flag(Addr addr) const;
    std::optional<TensorId> lookup(Addr addr) const;
    const TensorMeta* meta(TensorId id) const;

    std::span<const std::uint64_t> dead_fifo() const { return fifo_; }
    std::size_t live_tiles() const { return live_.size(); }
    std::size_t registered() const { return tensors_.size(); }
    const TmuParams& params() const { return params_; }
    const AddressMap& address_map() const { return map_; }

    std::uint64_t dropped_live_tiles() const { return dropped_live_; }
    std::uint64_t warnings() const { return warnings_; }
    std::uint64_t retirements() const { return retirements_; }

private:
    struct Entry {
        TensorId id;
        TensorMeta meta;
    };
    struct TileEntry {
        TensorId tensor;
        std::uint64_t tile;
        std::uint32_t acc_cnt;
    };

    void push_dead(std::uint64_t pattern);

    TmuParams params_;
    AddressMap map_;
    TmuCapacity cap_;
    std::vector<Entry> tensors_;
    std::vector<TileEntry> live_;  // oldest first
    std::vector<std::uint64_t> fifo_;  // oldest first
    TensorId next_id_ = 0;
    std::uint64_t dropped_live_ = 0;
    std::uint64_t warnings_ = 0;
    std::uint64_t retirements_ = 0;
};

}  // namespace tmusim
