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
 * @file analytic.hpp
 * @brief Bottleneck model of execution time.
 *
 * Each request class costs the slowest of core issue, LLC throughput and
 * (for misses) DRAM bandwidth:
 *
 *     t_hit  = max(n_hit / (N ipc_mem), n_hit / v_LLC)
 *     t_cold = max(n_cold / (N ipc_mem), n_cold / v_LLC, n'_cold / bw_cold)
 *     t_cf   = max(n_cf / (N ipc_mem), n_cf / v_LLC, n'_cf / bw_cf)
 *     t      = t_hit + t_cold + max(t_comp, t_cf),  t_comp = n_comp / (N ipc_comp)
 *
 * Cold misses come in bursts and see bw_cold = theta1 BW. Conflict misses
 * are spread out, so their bandwidth follows demand:
 *
 *     eta_cf    = (n_cf / ipc_mem) / (n_mem / ipc_mem + n_comp / ipc_comp)
 *     v_cf,dmd  = min(eta_cf N ipc_mem, v_LLC)
 *     bw_cf     = clip(lambda v_cf,dmd, theta2 BW, theta3 BW)
 *
 * All rates are in requests (cache lines) per cycle.
 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmusim/common.hpp"
#include "tmusim/llc.hpp"
#include "tmusim/policy.hpp"
#include "tmusim/tracegen.hpp"

namespace tmusim {

struct AnalyticalInput {
    double n_hit = 0, n_cold = 0, n_cf = 0;
    double n_comp = 0, n_mem = 0;
    double n_cold_mem = 0;  // n'_cold: cold requests reaching DRAM after merging
    double n_cf_mem = 0;    // n'_cf
    double n_cores = 1;
    double ipc_mem = 1, ipc_comp = 1;
    double v_llc = 32;  // requests / cycle
    double bw = 2;      // peak DRAM lines / cycle
};

/// Throws Error(config) on broken invariants or zero denominators.
void validate(const AnalyticalInput& in);

struct AnalyticalParams {
    double theta1 = 0.5;
    double theta2 = 0.3;
    double theta3 = 0.6;
    double lambda = 1.0;
};

struct Prediction {
    double t_hit = 0, t_cold = 0, t_cf = 0, t_comp = 0;
    double bw_cold = 0, bw_cf = 0;
    double t = 0;
};

struct BandwidthEstimate {
    double eta_cf = 0;
    double v_cf_dmd = 0;
    double bw_cold = 0;
    double bw_cf = 0;
};

BandwidthEstimate estimate_bandwidth(const AnalyticalInput& in, const AnalyticalParams& p);

Prediction predict_time(const AnalyticalInput& in, const AnalyticalParams& p);

struct KeptSetResult {
    std::uint32_t m = 0;  // kept priority tiers
    double s_kept = 0;    // bytes
};

/// Largest M with S_work * M / 2^B <= S_LLC * (A - 1) / A, capped at 2^B.
KeptSetResult estimate_kept_set(double s_work, unsigned b_bits, double s_llc, std::uint32_t assoc);

/// Fraction of the streamed working set that stays resident across passes.
double kept_fraction(const PolicyConfig& policy, double s_work, double s_llc, std::uint32_t assoc);

/// Model inputs derived from the dataflow alone (no simulation).
AnalyticalInput derive_input(const DataflowProgram& program, const PolicyConfig& policy,
                             const LlcConfig& llc, double n_cores, double ipc_mem, double ipc_comp,
                             double bw_lines_per_cycle);

/// One simulated run used for coefficient fitting.
struct FitSample {
    AnalyticalInput input;
    double cycles = 0;
    double bw_cold = 0;  // measured, lines / cycle
    double bw_cf = 0;
    bool has_cold = false;  // the run produced cold traffic worth measuring
    bool has_cf = false;
};

struct FitResult {
    AnalyticalParams params;
    double bw_cold_rmse = 0;
    double bw_cf_rmse = 0;
    std::size_t n_cold_samples = 0;
    std::size_t n_cf_samples = 0;
};

/// Least-squares fit of theta1 on burst bandwidth and theta2, theta3,
/// lambda on conflict bandwidth. Throws Error(fit) on degenerate input.
FitResult fit_coefficients(std::span<const FitSample> samples);

struct ValidationResult {
    double r2 = 0;
    double kendall_tau = 0;
    std::size_t n = 0;
};

/// Coefficient of determination 1 - SS_res / SS_tot of `predicted` against
/// `simulated`, and Kendall's tau-b. Throws Error(validation) on < 2 pairs
/// or zero variance.
ValidationResult validate_model(std::span<const double> predicted, std::span<const double> simulated);

double r_squared(std::span<const double> predicted, std::span<const double> observed);
double kendall_tau(std::span<const double> a, std::span<const double> b);

}  // namespace tmusim
