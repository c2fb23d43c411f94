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

#include "tmusim/core.hpp"

namespace tmusim {

void validate(const CoreConfig& cfg) {
    if (cfg.inst_window_depth == 0 || cfg.ipc_mem == 0 || cfg.ipc_comp == 0 ||
        cfg.num_inst_windows == 0)
        fail(ErrorKind::config, "core: inst_window_depth, ipc_mem, ipc_comp and "
                                "num_inst_windows must be positive");
}

Core::Core(CoreId id, const CoreConfig& cfg, std::span<const Instruction> stream,
           std::uint32_t line_size)
    : id_(id), cfg_(cfg), stream_(stream), line_size_(line_size) {
    validate(cfg_);
}

void Core::on_response(Cycle now) {
    if (loads_in_flight_ == 0) fail(ErrorKind::simulation, "core: response without a pending load");
    --loads_in_flight_;
    ++committed_;
    if (done()) finish_ = now;
}

}  // namespace tmusim
