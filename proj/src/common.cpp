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

#include "tmusim/common.hpp"

namespace tmusim {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
        case ErrorKind::simulation: return "simulation";
        case ErrorKind::fit: return "fit";
        case ErrorKind::validation: return "validation";
        case ErrorKind::tmu: return "tmu";
    }
    return "unknown";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

AddressMap::AddressMap(std::uint64_t line_size, std::uint64_t sets_per_slice,
                       std::uint64_t n_slices) {
    if (!is_pow2(line_size) || !is_pow2(sets_per_slice) || !is_pow2(n_slices))
        fail(ErrorKind::config, "address map: line size, sets per slice and slice count "
                                "must be powers of two");
    line_bits_ = log2u(line_size);
    set_bits_ = log2u(sets_per_slice);
    slice_bits_ = log2u(n_slices);
    if (line_bits_ + set_bits_ + slice_bits_ >= kPhysAddrBits)
        fail(ErrorKind::config, "address map: no tag bits left");
}

}  // namespace tmusim
