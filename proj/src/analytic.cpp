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

#include "tmusim/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tmusim {

void validate(const AnalyticalInput& in) {
    if (!(in.n_cores > 0 && in.ipc_mem > 0 && in.ipc_comp > 0 && in.v_llc > 0 && in.bw > 0))
        fail(ErrorKind::config, "analytic: N, ipc_mem, ipc_comp, v_LLC and BW must be positive");
    if (in.n_hit < 0 || in.n_cold < 0 || in.n_cf < 0 || in.n_comp < 0)
        fail(ErrorKind::config, "analytic: counts must be non-negative");
    const double sum = in.n_hit + in.n_cold + in.n_cf;
    if (std::abs(sum - in.n_mem) > 1e-6 * std::max(1.0, in.n_mem))
        fail(ErrorKind::config, "analytic: n_mem must equal n_hit + n_cold + n_cf");
    if (in.n_cold_mem > in.n_cold + 1e-9 || in.n_cf_mem > in.n_cf + 1e-9)
        fail(ErrorKind::config, "analytic: merged counts cannot exceed raw counts");
}

BandwidthEstimate estimate_bandwidth(const AnalyticalInput& in, const AnalyticalParams& p) {
    BandwidthEstimate e;
    const double denom = in.n_mem / in.ipc_mem + in.n_comp / in.ipc_comp;
    e.eta_cf = denom > 0 ? (in.n_cf / in.ipc_mem) / denom : 0.0;
    e.v_cf_dmd = std::min(e.eta_cf * in.n_cores * in.ipc_mem, in.v_llc);
    e.bw_cold = p.theta1 * in.bw;
    e.bw_cf = std::clamp(p.lambda * e.v_cf_dmd, p.theta2 * in.bw, p.theta3 * in.bw);
    return e;
}

Prediction predict_time(const AnalyticalInput& in, const AnalyticalParams& p) {
    validate(in);
    if (!(p.theta1 > 0 && p.theta2 > 0 && p.theta3 > 0))
        fail(ErrorKind::config, "analytic: theta coefficients must be positive");
    const auto bw = estimate_bandwidth(in, p);
    const double issue = in.n_cores * in.ipc_mem;
    Prediction r;
    r.bw_cold = bw.bw_cold;
    r.bw_cf = bw.bw_cf;
    r.t_hit = std::max(in.n_hit / issue, in.n_hit / in.v_llc);
    r.t_cold = std::max({in.n_cold / issue, in.n_cold / in.v_llc, in.n_cold_mem / bw.bw_cold});
    r.t_cf = std::max({in.n_cf / issue, in.n_cf / in.v_llc, in.n_cf_mem / bw.bw_cf});
    r.t_comp = in.n_comp / (in.n_cores * in.ipc_comp);
    r.t = r.t_hit + r.t_cold + std::max(r.t_comp, r.t_cf);
    return r;
}

KeptSetResult estimate_kept_set(double s_work, unsigned b_bits, double s_llc, std::uint32_t assoc) {
    if (!(s_work > 0 && s_llc > 0) || assoc < 2 || b_bits < 1 || b_bits > 16)
        fail(ErrorKind::config, "kept set: need S_work, S_LLC > 0, A >= 2, 1 <= B_BITS <= 16");
    const std::uint32_t tiers = 1u << b_bits;
    const double bound = s_llc * double(assoc - 1) / double(assoc);
    // floor(bound * 2^B / S_work), checked against the exact inequality.
    auto m = static_cast<std::uint64_t>(std::floor(bound * tiers / s_work));
    while (m > 0 && s_work * double(m) / tiers > bound) --m;
    while (m < tiers && s_work * double(m + 1) / tiers <= bound) ++m;
    m = std::min<std::uint64_t>(m, tiers);
    return {static_cast<std::uint32_t>(m), s_work * double(m) / tiers};
}

double kept_fraction(const PolicyConfig& policy, double s_work, double s_llc, std::uint32_t assoc) {
    if (s_work <= s_llc) return 1.0;
    const double tiers = double(policy.max_gear());
    const bool at = policy.replacement == Replacement::at;
    const auto m = estimate_kept_set(s_work, policy.b_bits, s_llc, assoc).m;
    switch (policy.bypass_mode) {
        case BypassMode::off:
            return at ? m / tiers : 0.0;
        case BypassMode::static_gear: {
            const double cached = (tiers - policy.b_gear) / tiers;
            if (cached * s_work <= s_llc) return cached;
            return at ? std::min<double>(m, tiers - policy.b_gear) / tiers : 0.0;
        }
        case BypassMode::dynamic:
        case BypassMode::gqa_dynamic:
            // Ideal bypassing keeps a subset of exactly the usable capacity.
            return std::min(1.0, s_llc * double(assoc - 1) / double(assoc) / s_work);
    }
    return 0.0;
}

AnalyticalInput derive_input(const DataflowProgram& program, const PolicyConfig& policy,
                             const LlcConfig& llc, double n_cores, double ipc_mem, double ipc_comp,
                             double bw_lines_per_cycle) {
    const auto& st = program.stats;
    const double team = program.sharing_groups.empty() ? 1.0 : double(program.sharing_groups[0].size());
    const double f = st.s_work > 0 ? kept_fraction(policy, double(st.s_work), double(llc.total_size),
                                                   llc.associativity)
                                   : 1.0;
    AnalyticalInput in;
    for (std::size_t i = 0; i < st.tensors.size(); ++i) {
        const auto& t = st.tensors[i];
        const double lines = double(t.lines);
        const double req = double(t.requests);
        if (lines == 0) continue;
        if (t.bypassed) {
            in.n_cold += lines;
            in.n_cf += req - lines;
            continue;
        }
        const double passes = req / (lines * team);
        const double cross = lines * std::max(0.0, passes - 1.0);
        in.n_cold += lines;
        in.n_hit += lines * passes * (team - 1.0) + f * cross;
        in.n_cf += (1.0 - f) * cross;
    }
    in.n_mem = double(st.n_mem);
    // Requests outside every tensor (none for generated programs) count as cold.
    const double rest = in.n_mem - (in.n_hit + in.n_cold + in.n_cf);
    if (rest > 0) in.n_cold += rest;
    in.n_comp = double(st.n_comp);
    in.n_cold_mem = in.n_cold;
    in.n_cf_mem = in.n_cf;
    in.n_cores = n_cores;
    in.ipc_mem = ipc_mem;
    in.ipc_comp = ipc_comp;
    in.v_llc = double(llc.n_slices);
    in.bw = bw_lines_per_cycle;
    return in;
}

namespace {

double clip_loss(std::span<const FitSample> s, double lambda, double t2, double t3) {
    double loss = 0;
    for (const auto& x : s) {
        if (!x.has_cf) continue;
        const double v = estimate_bandwidth(x.input, {1, t2, t3, lambda}).bw_cf;
        loss += (x.bw_cf - v) * (x.bw_cf - v);
    }
    return loss;
}

}  // namespace

FitResult fit_coefficients(std::span<const FitSample> samples) {
    if (samples.size() < 4) fail(ErrorKind::fit, "fit needs at least 4 runs");
    std::size_t n_cold = 0, n_cf = 0;
    double min_c = std::numeric_limits<double>::infinity(), max_c = 0;
    double min_d = std::numeric_limits<double>::infinity(), max_d = 0;
    for (const auto& s : samples) {
        n_cold += s.has_cold;
        n_cf += s.has_cf;
        min_c = std::min(min_c, s.cycles);
        max_c = std::max(max_c, s.cycles);
        const double d = estimate_bandwidth(s.input, {}).v_cf_dmd;
        if (s.has_cf) {
            min_d = std::min(min_d, d);
            max_d = std::max(max_d, d);
        }
    }
    if (max_c <= min_c) fail(ErrorKind::fit, "fit rejected: all runs have identical cycle counts");
    if (n_cold == 0) fail(ErrorKind::fit, "fit rejected: no run has cold-miss traffic");
    if (n_cf < 2 || !(max_d > min_d))
        fail(ErrorKind::fit, "fit rejected: conflict-miss demand does not vary across runs");

    FitResult r;
    double num = 0, den = 0;
    for (const auto& s : samples) {
        if (!s.has_cold) continue;
        num += s.bw_cold * s.input.bw;
        den += s.input.bw * s.input.bw;
    }
    r.params.theta1 = std::clamp(num / den, 1e-6, 1.0);

    // theta2 < theta3 on a 0.005 grid, lambda on a log grid, coordinate descent inside.
    auto best_for = [&](double lambda, double& t2, double& t3) {
        t2 = 0.005;
        t3 = 1.0;
        double loss = clip_loss(samples, lambda, t2, t3);
        for (int round = 0; round < 4; ++round) {
            for (int i = 1; i < 200; ++i) {
                const double c = i * 0.005;
                if (c >= t3) break;
                const double l = clip_loss(samples, lambda, c, t3);
                if (l < loss) loss = l, t2 = c;
            }
            for (int i = 200; i >= 1; --i) {
                const double c = i * 0.005;
                if (c <= t2) break;
                const double l = clip_loss(samples, lambda, t2, c);
                if (l < loss) loss = l, t3 = c;
            }
        }
        return loss;
    };
    double best = std::numeric_limits<double>::infinity();
    double best_log = 0;
    for (int i = 0; i <= 120; ++i) {
        const double lg = -3.0 + i * 0.05;  // lambda in [1e-3, 1e3]
        double t2, t3;
        const double l = best_for(std::pow(10.0, lg), t2, t3);
        if (l < best) {
            best = l;
            best_log = lg;
            r.params = {r.params.theta1, t2, t3, std::pow(10.0, lg)};
        }
    }
    for (int i = -25; i <= 25; ++i) {
        const double lg = best_log + i * 0.002;
        double t2, t3;
        const double l = best_for(std::pow(10.0, lg), t2, t3);
        if (l < best) {
            best = l;
            r.params = {r.params.theta1, t2, t3, std::pow(10.0, lg)};
        }
    }

    double se_cold = 0;
    for (const auto& s : samples)
        if (s.has_cold) {
            const double e = s.bw_cold - r.params.theta1 * s.input.bw;
            se_cold += e * e;
        }
    r.n_cold_samples = n_cold;
    r.n_cf_samples = n_cf;
    r.bw_cold_rmse = std::sqrt(se_cold / double(n_cold));
    r.bw_cf_rmse = std::sqrt(best / double(n_cf));
    return r;
}

double r_squared(std::span<const double> predicted, std::span<const double> observed) {
    if (predicted.size() != observed.size() || observed.size() < 2)
        fail(ErrorKind::validation, "R^2 needs at least 2 matched pairs");
    const double mean =
        std::accumulate(observed.begin(), observed.end(), 0.0) / double(observed.size());
    double ss_tot = 0, ss_res = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        ss_tot += (observed[i] - mean) * (observed[i] - mean);
        ss_res += (observed[i] - predicted[i]) * (observed[i] - predicted[i]);
    }
    if (ss_tot == 0) fail(ErrorKind::validation, "R^2 undefined: observed values have zero variance");
    return 1.0 - ss_res / ss_tot;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        fail(ErrorKind::validation, "Kendall tau needs at least 2 matched pairs");
    double concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0 && db == 0) continue;
            if (da == 0) {
                ++ties_a;
            } else if (db == 0) {
                ++ties_b;
            } else if ((da > 0) == (db > 0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    const double denom = std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
    if (denom == 0) fail(ErrorKind::validation, "Kendall tau undefined: no untied pairs");
    return (concordant - discordant) / denom;
}

ValidationResult validate_model(std::span<const double> predicted, std::span<const double> simulated) {
    ValidationResult v;
    v.r2 = r_squared(predicted, simulated);
    v.kendall_tau = kendall_tau(predicted, simulated);
    v.n = predicted.size();
    return v;
}

}  // namespace tmusim
