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

// Serial vs OpenMP sweep runner on a fixed policy x capacity grid.
// Checks that both produce identical rows and prints wall times.
//
//   bench_sweep [points_per_axis] [threads]

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "tmusim/harness.hpp"

#ifdef TMUSIM_HAVE_OPENMP
#include <omp.h>
#endif

using namespace tmusim;

namespace {

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string csv(const std::vector<RunRow>& rows) {
    std::ostringstream os;
    write_results_csv(os, rows);
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 4;
    const int threads = argc > 2 ? std::atoi(argv[2]) : 0;
    nlohmann::json sizes = nlohmann::json::array();
    for (int i = 0; i < n; ++i) sizes.push_back(std::uint64_t(64 * 1024) << (i % 4));
    const nlohmann::json axes = {{"llc_size", sizes}, {"policy", {"lru", "at", "at+bypass", "at+bypass+dbp"}}};
    RunConfig base;
    base.model = find_model("qwen3-8b");
    base.dataflow.seq_len = 256;
    const auto cfgs = expand_axes(base, axes);

    std::vector<RunRow> serial, parallel;
    const double ts = seconds([&] { serial = run_sweep_serial(cfgs); });
    const double tp = seconds([&] { parallel = run_sweep(cfgs, threads); });
    int workers = 1;
#ifdef TMUSIM_HAVE_OPENMP
    workers = threads > 0 ? threads : omp_get_max_threads();
#endif
    const bool same = csv(serial) == csv(parallel);
    std::cout << "points    " << cfgs.size() << '\n'
              << "threads   " << workers << '\n'
              << "serial    " << ts << " s\n"
              << "parallel  " << tp << " s\n"
              << "speedup   " << ts / tp << '\n'
              << "identical " << (same ? "yes" : "NO") << '\n';
    return same ? 0 : 1;
}
