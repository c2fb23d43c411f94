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

#include "tmusim/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace tmusim {

const char* to_string(InstKind kind) {
    switch (kind) {
        case InstKind::load_tile: return "load_tile";
        case InstKind::store_tile: return "store_tile";
        case InstKind::compute: return "compute";
    }
    return "compute";
}

std::uint32_t DataflowProgram::n_epochs() const {
    std::uint32_t n = 0;
    for (const auto& t : registrations) n = std::max(n, t.epoch + 1);
    return n;
}

namespace {

std::uint64_t round_up(std::uint64_t v, std::uint64_t to) { return (v + to - 1) / to * to; }
std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Hands out aligned, non-overlapping tensor regions.
class Allocator {
public:
    explicit Allocator(const LayoutConfig& layout) : layout_(layout), next_(layout.base) {}

    TensorMeta place(std::string name, std::uint64_t n_tiles, std::uint64_t tile_bytes,
                     std::uint32_t n_acc, bool bypass, Operand op, std::uint32_t epoch) {
        TensorMeta m;
        m.name = std::move(name);
        m.base = round_up(next_, layout_.tensor_align);
        m.tile_size = tile_bytes;
        m.size = n_tiles * tile_bytes;
        m.n_acc = n_acc;
        m.bypass_whole = bypass;
        m.operand = op;
        m.epoch = epoch;
        next_ = m.base + m.size;
        return m;
    }

private:
    LayoutConfig layout_;
    Addr next_;
};

Instruction mem(InstKind kind, CoreId core, Addr base, std::uint64_t len) {
    return Instruction{kind, core, base, static_cast<std::uint32_t>(len), 0};
}

Instruction compute(CoreId core, std::uint64_t slots) {
    return Instruction{InstKind::compute, core, 0, 0,
                       static_cast<std::uint32_t>(std::max<std::uint64_t>(1, slots))};
}

void check_layout(const LayoutConfig& layout) {
    if (!is_pow2(layout.line_size)) fail(ErrorKind::config, "line_size must be a power of two");
    if (layout.tensor_align % layout.line_size != 0)
        fail(ErrorKind::config, "tensor_align must be a multiple of the line size");
    if (layout.flops_per_slot == 0) fail(ErrorKind::config, "flops_per_slot must be positive");
}

}  // namespace

void validate(const ModelConfig& model) {
    if (model.n_kv_heads == 0 || model.n_q_heads == 0 || model.n_q_heads % model.n_kv_heads != 0)
        fail(ErrorKind::config, "model '" + model.name +
                                    "': n_q_heads must be a positive multiple of n_kv_heads");
    if (model.head_dim == 0 || model.dtype_bytes == 0)
        fail(ErrorKind::config, "model '" + model.name + "': head_dim and dtype_bytes must be > 0");
}

void validate(const DataflowConfig& df) {
    if (df.n_cores == 0) fail(ErrorKind::config, "dataflow: n_cores must be > 0");
    if (df.seq_len == 0 || df.batch == 0 || df.tile_rows == 0 || df.tile_cols == 0)
        fail(ErrorKind::config, "dataflow: seq_len, batch and tile sizes must be > 0");
}

DataflowProgram build_matmul_dataflow(std::uint32_t m_tiles, std::uint32_t n_tiles,
                                      std::uint32_t k_tiles, std::uint64_t tile_bytes,
                                      std::uint32_t n_cores, const LayoutConfig& layout) {
    check_layout(layout);
    if (m_tiles == 0 || n_tiles == 0 || k_tiles == 0 || n_cores == 0 || tile_bytes == 0)
        fail(ErrorKind::config, "matmul: all counts must be positive");
    if (tile_bytes % layout.line_size != 0)
        fail(ErrorKind::config, "matmul: tile_bytes must be a multiple of the line size");

    Allocator alloc(layout);
    DataflowProgram p;
    p.line_size = layout.line_size;
    const auto a = alloc.place("A", std::uint64_t(m_tiles) * k_tiles, tile_bytes, n_tiles, false,
                               Operand::left, 0);
    const auto b = alloc.place("B", std::uint64_t(k_tiles) * n_tiles, tile_bytes, m_tiles, false,
                               Operand::right, 0);
    const auto c = alloc.place("C", std::uint64_t(m_tiles) * n_tiles, tile_bytes, 1, false,
                               Operand::output, 0);
    p.registrations = {a, b, c};

    // Square tiles of 2-byte elements: 2*s^3 flops per tile product.
    const double side = std::sqrt(double(tile_bytes) / 2.0);
    const auto slots = static_cast<std::uint64_t>(
        std::ceil(2.0 * side * side * side / double(layout.flops_per_slot)));

    p.streams.resize(n_cores);
    std::uint64_t out = 0;
    for (std::uint32_t m = 0; m < m_tiles; ++m) {
        for (std::uint32_t n = 0; n < n_tiles; ++n, ++out) {
            const CoreId core = static_cast<CoreId>(out % n_cores);
            auto& s = p.streams[core];
            for (std::uint32_t k = 0; k < k_tiles; ++k) {
                s.push_back(mem(InstKind::load_tile, core,
                                a.base + (std::uint64_t(m) * k_tiles + k) * tile_bytes, tile_bytes));
                s.push_back(mem(InstKind::load_tile, core,
                                b.base + (std::uint64_t(k) * n_tiles + n) * tile_bytes, tile_bytes));
                s.push_back(compute(core, slots));
            }
            s.push_back(mem(InstKind::store_tile, core,
                            c.base + (std::uint64_t(m) * n_tiles + n) * tile_bytes, tile_bytes));
        }
    }
    p.epoch_ends.resize(n_cores);
    for (std::uint32_t c2 = 0; c2 < n_cores; ++c2) p.epoch_ends[c2] = {p.streams[c2].size()};
    p.stats = compute_dataflow_stats(p);
    return p;
}

DataflowProgram build_flashattention_dataflow(const ModelConfig& model, const DataflowConfig& df,
                                              const LayoutConfig& layout) {
    validate(model);
    validate(df);
    check_layout(layout);

    const std::uint32_t group = model.group_size();
    const std::uint32_t n_cores = df.n_cores;
    std::uint32_t team = 1;
    if (df.group_alloc == GroupAlloc::spatial) {
        if (group < 2) fail(ErrorKind::config, "spatial group allocation needs group size >= 2");
        team = std::min(group, n_cores);
        if (group % team != 0 || n_cores % team != 0)
            fail(ErrorKind::config, "spatial group allocation: group size " +
                                        std::to_string(group) + " and n_cores " +
                                        std::to_string(n_cores) + " must share the team size");
    }
    const std::uint32_t n_teams = n_cores / team;
    const std::uint32_t heads_per_core = group / team;

    const std::uint64_t row_bytes = std::uint64_t(model.head_dim) * model.dtype_bytes;
    const std::uint64_t q_tile = round_up(row_bytes * df.tile_rows, layout.line_size);
    const std::uint64_t kv_tile = round_up(row_bytes * df.tile_cols, layout.line_size);
    const std::uint64_t n_q_tiles = ceil_div(df.seq_len, df.tile_rows);
    const std::uint64_t n_kv_tiles = ceil_div(df.seq_len, df.tile_cols);
    const std::uint32_t kv_nacc = static_cast<std::uint32_t>(group * n_q_tiles);

    const double flops = 4.0 * df.tile_rows * df.tile_cols * model.head_dim;
    const auto slots =
        static_cast<std::uint64_t>(std::ceil(flops / double(layout.flops_per_slot)));

    Allocator alloc(layout);
    DataflowProgram p;
    p.line_size = layout.line_size;
    p.streams.resize(n_cores);
    p.epoch_ends.resize(n_cores);
    p.rounds = static_cast<std::uint32_t>(ceil_div(model.n_kv_heads, n_teams));

    for (std::uint32_t b = 0; b < df.batch; ++b) {
        const std::string sfx = df.batch > 1 ? std::to_string(b) : "";
        const auto q = alloc.place("Q" + sfx, n_q_tiles * model.n_q_heads, q_tile, 1, true,
                                   Operand::left, b);
        const auto k = alloc.place("K" + sfx, n_kv_tiles * model.n_kv_heads, kv_tile, kv_nacc,
                                   false, Operand::right, b);
        const auto v = alloc.place("V" + sfx, n_kv_tiles * model.n_kv_heads, kv_tile, kv_nacc,
                                   false, Operand::right, b);
        const auto o = alloc.place("O" + sfx, n_q_tiles * model.n_q_heads, q_tile, 1, true,
                                   Operand::output, b);
        p.registrations.insert(p.registrations.end(), {q, k, v, o});

        auto q_addr = [&](std::uint64_t head, std::uint64_t i) {
            return q.base + (i * model.n_q_heads + head) * q_tile;
        };
        auto o_addr = [&](std::uint64_t head, std::uint64_t i) {
            return o.base + (i * model.n_q_heads + head) * q_tile;
        };
        auto kv_off = [&](std::uint64_t head, std::uint64_t j) {
            return (j * model.n_kv_heads + head) * kv_tile;
        };

        for (CoreId core = 0; core < n_cores; ++core) {
            auto& s = p.streams[core];
            const std::uint32_t t = core / team;  // team index
            const std::uint32_t lane = core % team;
            for (std::uint32_t kvh = t; kvh < model.n_kv_heads; kvh += n_teams) {
                for (std::uint32_t r = 0; r < heads_per_core; ++r) {
                    const std::uint64_t qh = std::uint64_t(kvh) * group + lane * heads_per_core + r;
                    for (std::uint64_t i = 0; i < n_q_tiles; ++i) {
                        s.push_back(mem(InstKind::load_tile, core, q_addr(qh, i), q_tile));
                        for (std::uint64_t j = 0; j < n_kv_tiles; ++j) {
                            s.push_back(mem(InstKind::load_tile, core, k.base + kv_off(kvh, j), kv_tile));
                            s.push_back(mem(InstKind::load_tile, core, v.base + kv_off(kvh, j), kv_tile));
                            s.push_back(compute(core, slots));
                        }
                        s.push_back(mem(InstKind::store_tile, core, o_addr(qh, i), q_tile));
                    }
                }
            }
            p.epoch_ends[core].push_back(s.size());
        }
    }

    if (df.group_alloc == GroupAlloc::spatial && team > 1) {
        for (std::uint32_t t = 0; t < n_teams; ++t) {
            std::vector<CoreId> g;
            for (std::uint32_t l = 0; l < team; ++l) g.push_back(t * team + l);
            p.sharing_groups.push_back(std::move(g));
        }
    }
    p.stats = compute_dataflow_stats(p);
    return p;
}

DataflowStats compute_dataflow_stats(const DataflowProgram& p) {
    DataflowStats st;
    const std::uint64_t line = p.line_size;
    std::unordered_set<Addr> distinct;
    std::vector<std::unordered_set<Addr>> per_tensor(p.registrations.size());
    st.tensors.resize(p.registrations.size());
    for (std::size_t i = 0; i < p.registrations.size(); ++i) {
        const auto& r = p.registrations[i];
        st.tensors[i].name = r.name;
        st.tensors[i].n_acc = r.n_acc;
        st.tensors[i].bypassed = r.bypass_whole;
        if (!r.bypass_whole && r.epoch == 0) st.s_work += r.size;
    }
    st.s_work /= std::max<std::uint32_t>(1, p.rounds);

    auto owner = [&](Addr a) -> std::size_t {
        for (std::size_t i = 0; i < p.registrations.size(); ++i)
            if (p.registrations[i].contains(a)) return i;
        return p.registrations.size();
    };

    for (const auto& stream : p.streams) {
        for (const auto& ins : stream) {
            if (ins.kind == InstKind::compute) {
                st.n_comp += ins.slots;
                ++st.n_compute_insts;
                continue;
            }
            const std::uint64_t lines = ins.length / line;
            st.n_mem += lines;
            (ins.kind == InstKind::load_tile ? st.n_load : st.n_store) += lines;
            const std::size_t t = owner(ins.base);
            for (std::uint64_t l = 0; l < lines; ++l) {
                const Addr la = ins.base / line + l;
                distinct.insert(la);
                if (t < per_tensor.size()) {
                    per_tensor[t].insert(la);
                    ++st.tensors[t].requests;
                }
            }
        }
    }
    st.n_cold = distinct.size();
    for (std::size_t i = 0; i < per_tensor.size(); ++i) st.tensors[i].lines = per_tensor[i].size();
    return st;
}

std::vector<std::pair<Addr, std::uint64_t>> line_access_counts(const DataflowProgram& p) {
    std::map<Addr, std::uint64_t> counts;
    for (const auto& stream : p.streams)
        for (const auto& ins : stream)
            if (ins.kind != InstKind::compute)
                for (std::uint64_t l = 0; l < ins.length / p.line_size; ++l)
                    ++counts[ins.base / p.line_size + l];
    return {counts.begin(), counts.end()};
}

void write_trace(std::ostream& os, const DataflowProgram& p) {
    for (const auto& t : p.registrations) {
        os << "# tensor " << t.name << " base=0x" << std::hex << t.base << std::dec
           << " size=" << t.size << " tile=" << t.tile_size << " nAcc=" << t.n_acc
           << " bypass=" << (t.bypass_whole ? 1 : 0) << " operand=" << to_string(t.operand)
           << " epoch=" << t.epoch << '\n';
    }
    for (const auto& stream : p.streams) {
        for (const auto& ins : stream) {
            os << "cycle-less: " << ins.core << ' ' << to_string(ins.kind) << ' ';
            if (ins.kind == InstKind::compute)
                os << "- " << ins.slots << '\n';
            else
                os << "0x" << std::hex << ins.base << std::dec << ' ' << ins.length << '\n';
        }
    }
}

}  // namespace tmusim
