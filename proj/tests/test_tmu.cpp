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

#include <map>
#include <set>
#include <random>

#include "doctest.h"
#include "tmusim/llc.hpp"
#include "tmusim/tmu.hpp"
#include "tmusim/tracegen.hpp"

using namespace tmusim;

namespace {

const AddressMap kMap = LlcConfig{}.address_map();

TensorMeta tensor(const std::string& name, Addr base, std::uint64_t size, std::uint64_t tile,
                  std::uint32_t n_acc, bool bypass = false) {
    TensorMeta m;
    m.name = name;
    m.base = base;
    m.size = size;
    m.tile_size = tile;
    m.n_acc = n_acc;
    m.bypass_whole = bypass;
    return m;
}

Addr tll(const TensorMeta& m, std::uint64_t tile) {
    return kMap.line_of(m.base + (tile + 1) * m.tile_size) - 1;
}

}  // namespace

TEST_CASE("register then lookup resolves to the same tensor") {
    Tmu tmu({}, kMap);
    const auto id = tmu.register_tensor(tensor("K", 0x100000, 4096, 1024, 2));
    CHECK(tmu.lookup(0x100000) == id);
    CHECK(tmu.lookup(0x100000 + 4095) == id);
    CHECK_FALSE(tmu.lookup(0x100000 + 4096).has_value());
}

TEST_CASE("the ninth registration fails with the default table") {
    Tmu tmu({}, kMap);
    for (int i = 0; i < 8; ++i) tmu.register_tensor(tensor("T", 0x100000 * (i + 1), 1024, 1024, 1));
    CHECK(tmu.registered() == 8);
    try {
        tmu.register_tensor(tensor("T9", 0x1000000, 1024, 1024, 1));
        FAIL("ninth registration accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::tmu);
    }
}

TEST_CASE("overlapping regions are rejected") {
    Tmu tmu({}, kMap);
    tmu.register_tensor(tensor("A", 0x10000, 4096, 1024, 1));
    CHECK_THROWS_AS(tmu.register_tensor(tensor("B", 0x10000 + 2048, 4096, 1024, 1)), Error);
    CHECK_NOTHROW(tmu.register_tensor(tensor("C", 0x10000 + 4096, 4096, 1024, 1)));
}

TEST_CASE("clear frees the slot and the region") {
    Tmu tmu({}, kMap);
    std::vector<TensorId> ids;
    for (int i = 0; i < 8; ++i) ids.push_back(tmu.register_tensor(tensor("T", 0x100000 * (i + 1), 1024, 1024, 1)));
    tmu.clear_tensor(ids[3]);
    CHECK_NOTHROW(tmu.register_tensor(tensor("T3again", 0x400000, 1024, 1024, 1)));
    CHECK(tmu.registered() == 8);
}

TEST_CASE("clearing an unknown id only warns") {
    Tmu tmu({}, kMap);
    tmu.register_tensor(tensor("A", 0x10000, 4096, 1024, 1));
    tmu.clear_tensor(42);
    CHECK(tmu.warnings() == 1);
    CHECK(tmu.registered() == 1);
}

TEST_CASE("nAcc = 1 retires on the first TLL touch") {
    Tmu tmu({}, kMap);
    const auto m = tensor("C", 0x10000, 4096, 1024, 1);
    tmu.register_tensor(m);
    CHECK_FALSE(tmu.notify_access(kMap.line_of(m.base)).has_value());  // not the TLL
    const auto r = tmu.notify_access(tll(m, 0));
    REQUIRE(r.has_value());
    CHECK(r->tile_index == 0);
    CHECK(tmu.dead_fifo().size() == 1);
}

TEST_CASE("nAcc = 4 retires on exactly the fourth TLL access") {
    Tmu tmu({}, kMap);
    const auto m = tensor("A", 0x10000, 4096, 1024, 4);
    tmu.register_tensor(m);
    for (int i = 0; i < 3; ++i) CHECK_FALSE(tmu.notify_access(tll(m, 1)).has_value());
    CHECK(tmu.live_tiles() == 1);
    CHECK(tmu.notify_access(tll(m, 1)).has_value());
    CHECK(tmu.live_tiles() == 0);
}

TEST_CASE("seventeen retirements into a depth-16 FIFO drop the first") {
    Tmu tmu({0, 15, 3}, kMap);
    // One tile per tag value: tile size equals the tag stride.
    const std::uint64_t stride = kMap.tag_stride();
    const auto m = tensor("C", 0, 17 * stride, stride, 1);
    tmu.register_tensor(m);
    std::vector<std::uint64_t> patterns;
    for (std::uint64_t t = 0; t < 17; ++t) {
        const auto r = tmu.notify_access(tll(m, t));
        REQUIRE(r.has_value());
        patterns.push_back(r->pattern);
    }
    const auto fifo = tmu.dead_fifo();
    REQUIRE(fifo.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(fifo[i] == patterns[i + 1]);
    CHECK_FALSE(tmu.is_dead(kMap.tag_of_line(tll(m, 0))));
    CHECK(tmu.is_dead(kMap.tag_of_line(tll(m, 16))));
}

TEST_CASE("is_dead compares tag[D_MSB:D_LSB] against the FIFO") {
    Tmu tmu({0, 3, 3}, kMap);
    CHECK_FALSE(tmu.is_dead(0b1010));  // empty FIFO
    const std::uint64_t stride = kMap.tag_stride();
    const auto m = tensor("C", 0, 16 * stride, stride, 1);
    tmu.register_tensor(m);
    tmu.notify_access(tll(m, 0b0110));
    tmu.notify_access(tll(m, 0b1010));
    CHECK(tmu.is_dead(0b1010));
    CHECK(tmu.is_dead(0b11010));  // only bits [3:0] count
    CHECK_FALSE(tmu.is_dead(0b1111));
}

TEST_CASE("priority is tag[B_BITS-1:0]") {
    CHECK(Tmu::priority(0b101101, 3) == 5);
    CHECK(Tmu::priority(0b101101, 1) == 1);
    std::set<std::uint32_t> levels;
    for (std::uint64_t t = 0; t < 64; ++t) levels.insert(Tmu::priority(t, 3));
    CHECK(levels.size() == 8);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t t = rng() >> 20;
        const unsigned b = 1 + unsigned(rng() % 8);
        CHECK(Tmu::priority(t, b) == Tmu::priority(t + (std::uint64_t(rng() % 100) << b), b));
    }
}

TEST_CASE("priorities of a large tensor are uniform") {
    // 2^17 lines; fraction below each gear must be within 2% of G / 2^B.
    const std::uint64_t lines = 1ull << 17;
    for (unsigned b : {1u, 3u, 4u}) {
        std::vector<std::uint64_t> below(1u << b, 0);
        for (Addr l = 0; l < lines; ++l) ++below[Tmu::priority(kMap.tag_of_line(0x40000 + l), b)];
        std::uint64_t acc = 0;
        for (std::uint32_t g = 1; g <= (1u << b); ++g) {
            acc += below[g - 1];
            CHECK(double(acc) / double(lines) == doctest::Approx(double(g) / (1u << b)).epsilon(0.02));
        }
    }
}

TEST_CASE("bypass flag follows the owning tensor") {
    ModelConfig model;
    DataflowConfig df;
    df.seq_len = 128;
    df.n_cores = 2;
    const auto p = build_flashattention_dataflow(model, df);
    Tmu tmu({}, kMap);
    for (const auto& r : p.registrations) tmu.register_tensor(r);
    for (const auto& r : p.registrations) {
        const bool is_qo = r.name == "Q" || r.name == "O";
        CHECK(tmu.lookup_bypass_flag(r.base) == is_qo);
    }
    CHECK_FALSE(tmu.lookup_bypass_flag(0x10));
}

TEST_CASE("the live tile table drops its oldest entry when full") {
    Tmu tmu({}, kMap, TmuCapacity{8, 2, 16});
    const auto m = tensor("A", 0x10000, 4 * 1024, 1024, 3);
    tmu.register_tensor(m);
    for (std::uint64_t t = 0; t < 3; ++t) tmu.notify_access(tll(m, t));
    CHECK(tmu.live_tiles() == 2);
    CHECK(tmu.dropped_live_tiles() == 1);
}

TEST_CASE("retirements match a functional replay of the trace") {
    // Every tile retires once, at the trace position of its nAcc-th TLL access.
    const auto p = build_matmul_dataflow(4, 4, 2, 1024, 3);
    const std::uint64_t line = p.line_size;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        // Random interleaving of the per-core streams, instruction by instruction.
        std::vector<Addr> order;
        std::vector<std::size_t> pc(p.n_cores(), 0);
        while (true) {
            std::vector<std::size_t> ready;
            for (std::size_t c = 0; c < p.n_cores(); ++c)
                if (pc[c] < p.streams[c].size()) ready.push_back(c);
            if (ready.empty()) break;
            const auto c = ready[rng() % ready.size()];
            const auto& ins = p.streams[c][pc[c]++];
            if (ins.kind == InstKind::compute) continue;
            for (std::uint64_t l = 0; l < ins.length / line; ++l) order.push_back(ins.base / line + l);
        }

        Tmu tmu({}, kMap);
        std::vector<TensorId> ids;
        for (const auto& r : p.registrations) ids.push_back(tmu.register_tensor(r));
        std::map<std::pair<TensorId, std::uint64_t>, std::vector<std::size_t>> got;
        for (std::size_t i = 0; i < order.size(); ++i)
            if (auto r = tmu.notify_access(order[i])) got[{r->tensor, r->tile_index}].push_back(i);

        std::map<std::pair<TensorId, std::uint64_t>, std::size_t> want;
        for (std::size_t t = 0; t < p.registrations.size(); ++t) {
            const auto& m = p.registrations[t];
            std::map<Addr, std::uint32_t> seen;
            for (std::size_t i = 0; i < order.size(); ++i) {
                const Addr a = order[i] * line;
                if (!m.contains(a) || (a - m.base) % m.tile_size != m.tile_size - line) continue;
                if (++seen[a] == m.n_acc) want[{ids[t], (a - m.base) / m.tile_size}] = i;
            }
        }
        REQUIRE(got.size() == want.size());
        for (const auto& [key, pos] : want) {
            REQUIRE(got.count(key) == 1);
            CHECK(got[key].size() == 1);
            CHECK(got[key][0] == pos);
        }
        CHECK(tmu.dropped_live_tiles() == 0);
    }
}
