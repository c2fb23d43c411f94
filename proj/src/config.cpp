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

#include "tmusim/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace tmusim {

using nlohmann::json;

std::vector<ModelConfig> model_presets() {
    // Attention shapes from the public model cards.
    return {
        {"gemma3-27b", 32, 16, 128, 2},
        {"llama3-70b", 64, 8, 128, 2},
        {"llama3-405b", 128, 8, 128, 2},
        {"qwen3-8b", 32, 8, 128, 2},
    };
}

ModelConfig find_model(const std::string& name) {
    for (const auto& m : model_presets())
        if (m.name == name) return m;
    if (name == "custom") return ModelConfig{};
    fail(ErrorKind::config, "unknown model preset '" + name + "'");
}

std::uint64_t parse_size(const std::string& text) {
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        fail(ErrorKind::config, "bad size '" + text + "'");
    }
    std::string unit = text.substr(pos);
    std::erase_if(unit, [](unsigned char c) { return std::isspace(c); });
    std::transform(unit.begin(), unit.end(), unit.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (unit.empty() || unit == "B") return v;
    if (unit == "KB" || unit == "K" || unit == "KIB") return v << 10;
    if (unit == "MB" || unit == "M" || unit == "MIB") return v << 20;
    if (unit == "GB" || unit == "G" || unit == "GIB") return v << 30;
    fail(ErrorKind::config, "bad size unit in '" + text + "'");
}

void apply_policy_label(PolicyConfig& cfg, const std::string& label) {
    cfg.replacement = Replacement::lru;
    cfg.dbp = false;
    cfg.bypass_mode = BypassMode::off;
    cfg.b_gear = 0;
    std::stringstream ss(label);
    std::string tok;
    bool any = false;
    while (std::getline(ss, tok, '+')) {
        any = true;
        if (tok == "lru") {
            cfg.replacement = Replacement::lru;
        } else if (tok == "at") {
            cfg.replacement = Replacement::at;
        } else if (tok == "dbp") {
            cfg.dbp = true;
        } else if (tok == "bypass") {
            cfg.bypass_mode = BypassMode::dynamic;
        } else if (tok == "gqa_bypass") {
            cfg.bypass_mode = BypassMode::gqa_dynamic;
        } else if (tok.rfind("fix", 0) == 0 && tok.size() > 3 &&
                   std::all_of(tok.begin() + 3, tok.end(),
                               [](unsigned char c) { return std::isdigit(c); })) {
            cfg.bypass_mode = BypassMode::static_gear;
            cfg.b_gear = static_cast<std::uint32_t>(std::stoul(tok.substr(3)));
        } else {
            fail(ErrorKind::config, "unknown policy token '" + tok + "' in '" + label + "'");
        }
    }
    if (!any) fail(ErrorKind::config, "empty policy label");
}

namespace {

Replacement parse_replacement(const std::string& s) {
    if (s == "lru") return Replacement::lru;
    if (s == "at") return Replacement::at;
    fail(ErrorKind::config, "replacement must be lru or at, got '" + s + "'");
}

BypassMode parse_bypass(const std::string& s) {
    if (s == "off") return BypassMode::off;
    if (s == "static") return BypassMode::static_gear;
    if (s == "dynamic") return BypassMode::dynamic;
    if (s == "gqa_dynamic") return BypassMode::gqa_dynamic;
    fail(ErrorKind::config, "bypass_mode must be off, static, dynamic or gqa_dynamic");
}

GroupAlloc parse_alloc(const std::string& s) {
    if (s == "spatial") return GroupAlloc::spatial;
    if (s == "temporal") return GroupAlloc::temporal;
    fail(ErrorKind::config, "group_alloc must be spatial or temporal");
}

WorkloadKind parse_workload(const std::string& s) {
    if (s == "flashattention") return WorkloadKind::flashattention;
    if (s == "matmul") return WorkloadKind::matmul;
    fail(ErrorKind::config, "workload must be flashattention or matmul");
}

/// Typed reads with the key name in every error message.
class Reader {
public:
    explicit Reader(const json& j) : j_(j) {
        if (!j_.is_object()) fail(ErrorKind::config, "run config must be a JSON object");
    }

    template <class T>
    void num(const char* key, T& out) {
        if (!take(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(ErrorKind::config, std::string("key '") + key + "' must be a number");
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
                fail(ErrorKind::config,
                     std::string("key '") + key + "' must be a non-negative integer");
            out = v.get<T>();
        } else {
            out = v.get<T>();
        }
    }

    void size(const char* key, std::uint64_t& out) {
        if (!take(key)) return;
        const auto& v = j_.at(key);
        if (v.is_string())
            out = parse_size(v.get<std::string>());
        else if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
            out = v.get<std::uint64_t>();
        else
            fail(ErrorKind::config, std::string("key '") + key + "' must be a size");
    }

    void flag(const char* key, bool& out) {
        if (!take(key)) return;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(ErrorKind::config, std::string("key '") + key + "' must be a boolean");
        out = v.get<bool>();
    }

    bool str(const char* key, std::string& out) {
        if (!take(key)) return false;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(ErrorKind::config, std::string("key '") + key + "' must be a string");
        out = v.get<std::string>();
        return true;
    }

    const json& raw(const char* key) {
        take(key);
        return j_.at(key);
    }
    bool has(const char* key) const { return j_.contains(key); }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                fail(ErrorKind::config, "unknown config key '" + it.key() + "'");
    }

private:
    bool take(const char* key) {
        if (!j_.contains(key)) return false;
        seen_.insert(key);
        return true;
    }
    const json& j_;
    std::set<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    Reader r(j);
    std::string s;

    if (r.str("workload", s)) c.workload = parse_workload(s);
    if (r.str("model", s)) c.model = find_model(s);
    r.num("n_q_heads", c.model.n_q_heads);
    r.num("n_kv_heads", c.model.n_kv_heads);
    r.num("head_dim", c.model.head_dim);
    r.num("dtype_bytes", c.model.dtype_bytes);

    r.num("seq_len", c.dataflow.seq_len);
    r.num("batch", c.dataflow.batch);
    if (r.str("group_alloc", s)) c.dataflow.group_alloc = parse_alloc(s);
    if (r.has("tiling")) {
        const auto& t = r.raw("tiling");
        if (!t.is_array() || t.size() != 2 || !t[0].is_number_unsigned() || !t[1].is_number_unsigned())
            fail(ErrorKind::config, "tiling must be [tile_rows, tile_cols]");
        c.dataflow.tile_rows = t[0].get<std::uint32_t>();
        c.dataflow.tile_cols = t[1].get<std::uint32_t>();
    }
    r.num("tile_rows", c.dataflow.tile_rows);
    r.num("tile_cols", c.dataflow.tile_cols);
    r.num("n_cores", c.dataflow.n_cores);

    r.num("m_tiles", c.matmul.m_tiles);
    r.num("n_tiles", c.matmul.n_tiles);
    r.num("k_tiles", c.matmul.k_tiles);
    r.size("tile_bytes", c.matmul.tile_bytes);

    r.size("tensor_base", c.layout.base);
    r.size("tensor_align", c.layout.tensor_align);
    r.num("flops_per_slot", c.layout.flops_per_slot);

    auto& llc = c.sim.llc;
    r.size("llc_size", llc.total_size);
    r.num("n_slices", llc.n_slices);
    r.num("associativity", llc.associativity);
    r.num("line_size", llc.line_size);
    r.num("data-latency", llc.data_latency);
    r.num("mshr-num-entry", llc.mshr_entries);
    r.num("resp_q_size", llc.resp_q_size);
    r.num("req_q_size", llc.req_q_size);
    r.num("num-target", llc.num_target);
    c.layout.line_size = llc.line_size;

    auto& d = c.sim.dram;
    r.num("channels", d.n_channels);
    r.num("peak_bw_bytes_per_cycle", d.peak_bw_bytes_per_cycle);
    r.num("min_latency", d.min_latency);
    r.num("queue_depth", d.queue_depth);
    r.num("eff_seq", d.eff_seq);
    r.num("eff_rand", d.eff_rand);
    r.num("row_lines", d.row_lines);
    r.num("open_rows", d.open_rows);

    auto& core = c.sim.core;
    r.num("inst_window_depth", core.inst_window_depth);
    r.num("num_inst_windows", core.num_inst_windows);
    r.num("ipc_mem", core.ipc_mem);
    r.num("ipc_comp", core.ipc_comp);

    auto& p = c.sim.policy;
    if (r.str("replacement", s)) p.replacement = parse_replacement(s);
    r.flag("dbp", p.dbp);
    if (r.str("bypass_mode", s)) p.bypass_mode = parse_bypass(s);
    r.num("b_gear", p.b_gear);
    r.num("b_bits", p.b_bits);
    r.num("bypass_ub", p.bypass_ub);
    r.num("bypass_lb", p.bypass_lb);
    r.num("window", p.window);
    if (r.str("policy", s)) apply_policy_label(p, s);

    auto& t = c.sim.tmu;
    r.num("d_lsb", t.d_lsb);
    r.num("d_msb", t.d_msb);
    t.b_bits = p.b_bits;
    r.num("tensor_entries", c.sim.tmu_capacity.tensor_entries);
    r.num("tile_entries", c.sim.tmu_capacity.tile_entries);
    r.num("dead_fifo_depth", c.sim.tmu_capacity.dead_fifo_depth);

    r.num("hit_rate_window", c.sim.hit_rate_window);
    r.num("bw_window", c.sim.bw_window);
    r.num("warmup_fraction", c.sim.warmup_fraction);
    r.num("stall_limit", c.sim.stall_limit);
    r.num("seed", c.seed);
    r.finish();
    return c;
}

json to_json(const RunConfig& c) {
    const auto& llc = c.sim.llc;
    const auto& d = c.sim.dram;
    const auto& core = c.sim.core;
    const auto& p = c.sim.policy;
    json j = json::object();
    j["workload"] = c.workload == WorkloadKind::matmul ? "matmul" : "flashattention";
    j["model"] = c.model.name;
    j["n_q_heads"] = c.model.n_q_heads;
    j["n_kv_heads"] = c.model.n_kv_heads;
    j["head_dim"] = c.model.head_dim;
    j["dtype_bytes"] = c.model.dtype_bytes;
    j["seq_len"] = c.dataflow.seq_len;
    j["batch"] = c.dataflow.batch;
    j["group_alloc"] = c.dataflow.group_alloc == GroupAlloc::spatial ? "spatial" : "temporal";
    j["tile_rows"] = c.dataflow.tile_rows;
    j["tile_cols"] = c.dataflow.tile_cols;
    j["n_cores"] = c.dataflow.n_cores;
    j["m_tiles"] = c.matmul.m_tiles;
    j["n_tiles"] = c.matmul.n_tiles;
    j["k_tiles"] = c.matmul.k_tiles;
    j["tile_bytes"] = c.matmul.tile_bytes;
    j["tensor_base"] = c.layout.base;
    j["tensor_align"] = c.layout.tensor_align;
    j["flops_per_slot"] = c.layout.flops_per_slot;
    j["llc_size"] = llc.total_size;
    j["n_slices"] = llc.n_slices;
    j["associativity"] = llc.associativity;
    j["line_size"] = llc.line_size;
    j["data-latency"] = llc.data_latency;
    j["mshr-num-entry"] = llc.mshr_entries;
    j["resp_q_size"] = llc.resp_q_size;
    j["req_q_size"] = llc.req_q_size;
    j["num-target"] = llc.num_target;
    j["channels"] = d.n_channels;
    j["peak_bw_bytes_per_cycle"] = d.peak_bw_bytes_per_cycle;
    j["min_latency"] = d.min_latency;
    j["queue_depth"] = d.queue_depth;
    j["eff_seq"] = d.eff_seq;
    j["eff_rand"] = d.eff_rand;
    j["row_lines"] = d.row_lines;
    j["open_rows"] = d.open_rows;
    j["inst_window_depth"] = core.inst_window_depth;
    j["num_inst_windows"] = core.num_inst_windows;
    j["ipc_mem"] = core.ipc_mem;
    j["ipc_comp"] = core.ipc_comp;
    j["replacement"] = to_string(p.replacement);
    j["dbp"] = p.dbp;
    j["bypass_mode"] = to_string(p.bypass_mode);
    j["b_gear"] = p.b_gear;
    j["b_bits"] = p.b_bits;
    j["bypass_ub"] = p.bypass_ub;
    j["bypass_lb"] = p.bypass_lb;
    j["window"] = p.window;
    j["d_lsb"] = c.sim.tmu.d_lsb;
    j["d_msb"] = c.sim.tmu.d_msb;
    j["tensor_entries"] = c.sim.tmu_capacity.tensor_entries;
    j["tile_entries"] = c.sim.tmu_capacity.tile_entries;
    j["dead_fifo_depth"] = c.sim.tmu_capacity.dead_fifo_depth;
    j["hit_rate_window"] = c.sim.hit_rate_window;
    j["bw_window"] = c.sim.bw_window;
    j["warmup_fraction"] = c.sim.warmup_fraction;
    j["stall_limit"] = c.sim.stall_limit;
    j["seed"] = c.seed;
    return j;
}

void validate(const RunConfig& c) {
    validate(c.sim);
    if (c.layout.line_size != c.sim.llc.line_size)
        fail(ErrorKind::config, "layout and LLC line sizes differ");
    if (c.workload == WorkloadKind::flashattention) {
        validate(c.model);
        validate(c.dataflow);
        const std::uint64_t kv_tile =
            std::uint64_t(c.model.head_dim) * c.model.dtype_bytes * c.dataflow.tile_cols;
        const std::uint64_t q_tile =
            std::uint64_t(c.model.head_dim) * c.model.dtype_bytes * c.dataflow.tile_rows;
        if (kv_tile % c.sim.llc.line_size != 0 || q_tile % c.sim.llc.line_size != 0)
            fail(ErrorKind::config, "tile bytes must be a multiple of the line size");
    } else if (c.dataflow.n_cores == 0) {
        fail(ErrorKind::config, "n_cores must be > 0");
    }
}

RunConfig apply_overrides(const RunConfig& base, const json& overrides) {
    if (!overrides.is_object()) fail(ErrorKind::config, "overrides must be a JSON object");
    json j = to_json(base);
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        // A new preset must not inherit the previous preset's head counts.
        if (it.key() == "model" && !overrides.contains("n_q_heads") && it.value() != "custom") {
            j.erase("n_q_heads");
            j.erase("n_kv_heads");
            j.erase("head_dim");
            j.erase("dtype_bytes");
        }
        j[it.key()] = it.value();
    }
    return run_config_from_json(j);
}

DataflowProgram build_program(const RunConfig& c) {
    validate(c);
    if (c.workload == WorkloadKind::matmul)
        return build_matmul_dataflow(c.matmul.m_tiles, c.matmul.n_tiles, c.matmul.k_tiles,
                                     c.matmul.tile_bytes, c.dataflow.n_cores, c.layout);
    return build_flashattention_dataflow(c.model, c.dataflow, c.layout);
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::config, "'" + path + "': " + e.what());
    }
}

RunConfig load_run_config(const std::string& path) { return run_config_from_json(load_json(path)); }

}  // namespace tmusim
