// Copyright 2026 The dwarf-sceneflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "dwarf/correlation.hpp"
#include "dwarf/network.hpp"
#include "dwarf/ops.hpp"

using namespace dwarf;

namespace {

Tensor<float> random_tensor(Shape s, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    auto t = Tensor<float>::zeros(s);
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// Args: channels, spatial size.
void BM_Conv3x3(benchmark::State& state) {
    const int64_t c = state.range(0), n = state.range(1);
    const auto x = random_tensor({1, c, n, n}, 1);
    const auto w = random_tensor({c, c, 3, 3}, 2);
    const auto b = random_tensor({c, 1, 1, 1}, 3);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, {1, 1, 1}));
    state.SetItemsProcessed(state.iterations() * 2 * c * c * 9 * n * n);
}
BENCHMARK(BM_Conv3x3)->Args({32, 64})->Args({64, 32})->Args({128, 16})->Unit(benchmark::kMillisecond);

void BM_Corr1d(benchmark::State& state) {
    const auto a = random_tensor({1, 64, 32, 64}, 1), b = random_tensor({1, 64, 32, 64}, 2);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(corr1d(a, b, CorrConfig{}).scores);
}
BENCHMARK(BM_Corr1d)->Unit(benchmark::kMillisecond);

void BM_Corr2d(benchmark::State& state) {
    const auto a = random_tensor({1, 64, 32, 64}, 1), b = random_tensor({1, 64, 32, 64}, 2);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(corr2d(a, b, CorrConfig{}).scores);
}
BENCHMARK(BM_Corr2d)->Unit(benchmark::kMillisecond);

void BM_Corr3d(benchmark::State& state) {
    const auto a = random_tensor({1, 64, 32, 64}, 1), b = random_tensor({1, 64, 32, 64}, 2);
    CorrConfig cfg;
    cfg.rz = 4;
    NoGradGuard guard;
    const auto c1 = corr1d(a, b, cfg), c2 = corr1d(b, a, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(corr3d(c1, c2, cfg).scores);
}
BENCHMARK(BM_Corr3d)->Unit(benchmark::kMillisecond);

// Arg: index into the ablation variants.
void BM_Forward(benchmark::State& state) {
    const auto config = ablation_variants()[static_cast<size_t>(state.range(0))];
    Model<float> model(config);
    model.init_params(0);
    const auto l1 = random_tensor({1, 3, 128, 256}, 1), r1 = random_tensor({1, 3, 128, 256}, 2);
    const auto l2 = random_tensor({1, 3, 128, 256}, 3), r2 = random_tensor({1, 3, 128, 256}, 4);
    NoGradGuard guard;
    state.SetLabel(config.variant_name());
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(l1, r1, l2, r2).full.flow);
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace
BENCHMARK_MAIN();
