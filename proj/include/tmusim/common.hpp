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
 * @file common.hpp
 * @brief Basic vocabulary shared by every simulator module.
 *
 * Physical addresses are split as
 *
 *     | tag | slice | set | offset |
 *
 * The tag starts right above the slice bits, which makes tag[B_BITS-1:0]
 * change every (LLC size / associativity) bytes. The physical slice is the
 * slice field XORed with the low set bits, so consecutive lines spread over
 * slices instead of filling every set of one slice first.
 */

#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tmusim {

using Addr = std::uint64_t;
using Cycle = std::uint64_t;
using CoreId = std::uint32_t;

constexpr unsigned kPhysAddrBits = 48;

/// Error category; the CLI maps each to a distinct exit code.
enum class ErrorKind { config, io, simulation, fit, validation, tmu };

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }
inline unsigned log2u(std::uint64_t v) { return static_cast<unsigned>(std::bit_width(v) - 1); }

/// Splits addresses into line / set / slice / tag fields.
class AddressMap {
public:
    AddressMap() = default;
    AddressMap(std::uint64_t line_size, std::uint64_t sets_per_slice, std::uint64_t n_slices);

    std::uint64_t line_size() const { return 1ull << line_bits_; }
    std::uint64_t sets_per_slice() const { return 1ull << set_bits_; }
    std::uint64_t n_slices() const { return 1ull << slice_bits_; }
    unsigned line_bits() const { return line_bits_; }
    unsigned set_bits() const { return set_bits_; }
    unsigned slice_bits() const { return slice_bits_; }
    unsigned tag_bits() const { return kPhysAddrBits - line_bits_ - set_bits_ - slice_bits_; }

    /// Bytes covered by one increment of the tag.
    std::uint64_t tag_stride() const { return 1ull << (line_bits_ + set_bits_ + slice_bits_); }

    Addr line_of(Addr addr) const { return addr >> line_bits_; }
    Addr addr_of_line(Addr line) const { return line << line_bits_; }

    std::uint32_t set_of_line(Addr line) const {
        return static_cast<std::uint32_t>(line & (sets_per_slice() - 1));
    }
    std::uint32_t slice_of_line(Addr line) const {
        return static_cast<std::uint32_t>(((line >> set_bits_) ^ set_of_line(line)) &
                                          (n_slices() - 1));
    }
    std::uint64_t tag_of_line(Addr line) const { return line >> (set_bits_ + slice_bits_); }
    Addr line_from(std::uint64_t tag, std::uint32_t slice, std::uint32_t set) const {
        const Addr field = (slice ^ set) & (n_slices() - 1);
        return (tag << (set_bits_ + slice_bits_)) | (field << set_bits_) | set;
    }

private:
    unsigned line_bits_ = 6;
    unsigned set_bits_ = 0;
    unsigned slice_bits_ = 0;
};

/// Value of bits [msb:lsb] of `v`.
inline std::uint64_t bit_field(std::uint64_t v, unsigned msb, unsigned lsb) {
    const unsigned width = msb - lsb + 1;
    const std::uint64_t mask = width >= 64 ? ~0ull : ((1ull << width) - 1);
    return (v >> lsb) & mask;
}

}  // namespace tmusim
