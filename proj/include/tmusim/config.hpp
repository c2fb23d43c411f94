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
 * @file config.hpp
 * @brief Run configuration: one flat JSON object per simulation.
 *
 * Every key is optional and falls back to the built-in default. Sizes accept
 * plain integers or strings with a KB / MB / GB suffix. `model` names a
 * built-in preset; explicit head keys override it. `policy` is a shorthand
 * label such as "at+bypass+dbp" and is applied after the individual policy
 * keys, so it wins when both are present.
 *
 * to_json() writes the fully resolved configuration, so a run can always be
 * reproduced from its echo.
 */

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "tmusim/simulator.hpp"
#include "tmusim/tracegen.hpp"

namespace tmusim {

enum class WorkloadKind { flashattention, matmul };

struct MatmulConfig {
    std::uint32_t m_tiles = 8;
    std::uint32_t n_tiles = 8;
    std::uint32_t k_tiles = 8;
    std::uint64_t tile_bytes = 8192;
};

struct RunConfig {
    WorkloadKind workload = WorkloadKind::flashattention;
    ModelConfig model;
    DataflowConfig dataflow;
    MatmulConfig matmul;
    LayoutConfig layout;
    SimConfig sim;
    std::uint64_t seed = 0;  // echoed only; the simulator has no random state
};

/// Built-in model presets (attention shapes only).
std::vector<ModelConfig> model_presets();
ModelConfig find_model(const std::string& name);

/// Parses "lru", "at+bypass+dbp", "at+fix3", "lru+gqa_bypass", ... into `cfg`.
void apply_policy_label(PolicyConfig& cfg, const std::string& label);

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Checks cross-module consistency; throws Error(config).
void validate(const RunConfig& cfg);

/// Returns `base` with the keys of `overrides` replaced.
RunConfig apply_overrides(const RunConfig& base, const nlohmann::json& overrides);

DataflowProgram build_program(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);
nlohmann::json load_json(const std::string& path);

/// Parses "64KB", "1MB", "4096" into bytes.
std::uint64_t parse_size(const std::string& text);

}  // namespace tmusim
