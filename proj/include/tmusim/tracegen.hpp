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
 * @file tracegen.hpp
 * @brief Dataflow -> per-core instruction streams.
 *
 * Two dataflows are supported: the classic tiled MatMul loop nest and GQA
 * FlashAttention-2. Tensors are placed back to back at `tensor_align`
 * boundaries and stored tile-major. FlashAttention tensors order their tiles
 * as [seq_tile][head], i.e. the tiles of one sequence block of every head are
 * adjacent, which is how a [seq, head, dim] KV cache looks at tile
 * granularity.
 */

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmusim/common.hpp"
#include "tmusim/tmu.hpp"

namespace tmusim {

enum class InstKind : std::uint8_t { load_tile, store_tile, compute };

const char* to_string(InstKind kind);

struct Instruction {
    InstKind kind = InstKind::compute;
    CoreId core = 0;
    Addr base = 0;            // unused for compute
    std::uint32_t length = 0;  // bytes; unused for compute
    std::uint32_t slots = 0;   // compute issue slots; zero for memory
};

struct ModelConfig {
    std::string name = "custom";
    std::uint32_t n_q_heads = 8;
    std::uint32_t n_kv_heads = 4;
    std::uint32_t head_dim = 64;
    std::uint32_t dtype_bytes = 2;

    std::uint32_t group_size() const { return n_q_heads / n_kv_heads; }
};

enum class GroupAlloc { spatial, temporal };

struct DataflowConfig {
    std::uint32_t seq_len = 256;
    std::uint32_t batch = 1;
    GroupAlloc group_alloc = GroupAlloc::temporal;
    std::uint32_t tile_rows = 64;  // rows of a Q / O tile
    std::uint32_t tile_cols = 64;  // rows of a K / V tile (columns of the score block)
    std::uint32_t n_cores = 8;
};

/// Where tensors live and how compute maps to issue slots.
struct LayoutConfig {
    Addr base = 0x1000'0000;
    std::uint64_t tensor_align = 1ull << 20;
    std::uint32_t line_size = 64;
    std::uint64_t flops_per_slot = 4096;
};

struct TensorStats {
    std::string name;
    std::uint32_t n_acc = 0;
    bool bypassed = false;
    std::uint64_t lines = 0;     // distinct lines touched
    std::uint64_t requests = 0;  // line requests
};

struct DataflowStats {
    std::uint64_t n_comp = 0;  // compute issue slots
    std::uint64_t n_mem = 0;   // line requests (loads + stores)
    std::uint64_t n_load = 0;
    std::uint64_t n_store = 0;
    std::uint64_t n_cold = 0;  // distinct lines
    std::uint64_t s_work = 0;  // bytes of cached data streamed concurrently (one batch, one round)
    std::uint64_t n_compute_insts = 0;
    std::vector<TensorStats> tensors;
};

struct DataflowProgram {
    std::vector<std::vector<Instruction>> streams;  // one per core
    std::vector<TensorMeta> registrations;
    /// epoch_ends[c][e]: index one past the last instruction of epoch e in core c's stream.
    std::vector<std::vector<std::size_t>> epoch_ends;
    /// Cores that stream the same K/V data; empty for dataflows without sharing.
    std::vector<std::vector<CoreId>> sharing_groups;
    std::uint32_t line_size = 64;
    /// Sequential K/V rounds per core within a batch; cached bytes of a batch
    /// divided by this give the concurrently streamed working set.
    std::uint32_t rounds = 1;
    DataflowStats stats;

    std::size_t n_cores() const { return streams.size(); }
    std::uint32_t n_epochs() const;
};

DataflowProgram build_matmul_dataflow(std::uint32_t m_tiles, std::uint32_t n_tiles,
                                      std::uint32_t k_tiles, std::uint64_t tile_bytes,
                                      std::uint32_t n_cores, const LayoutConfig& layout = {});

DataflowProgram build_flashattention_dataflow(const ModelConfig& model, const DataflowConfig& df,
                                              const LayoutConfig& layout = {});

DataflowStats compute_dataflow_stats(const DataflowProgram& p);

/// Number of requests to each distinct line, ordered by line address.
std::vector<std::pair<Addr, std::uint64_t>> line_access_counts(const DataflowProgram& p);

/// Writes the `cycle-less: <core> <kind> <hex addr> <len>` debug format.
void write_trace(std::ostream& os, const DataflowProgram& p);

void validate(const ModelConfig& model);
void validate(const DataflowConfig& df);

}  // namespace tmusim
