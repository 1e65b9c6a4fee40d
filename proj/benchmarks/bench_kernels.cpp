// Copyright 2026 The fairgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "fairgen/embedder.hpp"
#include "fairgen/group_cluster.hpp"
#include "fairgen/losses.hpp"

using namespace fairgen;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 1);
    return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

std::vector<Embedding> random_set(int count, int dim, std::uint64_t seed) {
    const auto m = random_matrix(dim, count, seed);
    std::vector<Embedding> out;
    for (int j = 0; j < count; ++j) out.push_back(m.col(j));
    return out;
}

void BM_SupCon(benchmark::State& state) {
    const int b = int(state.range(0));
    const auto f = random_matrix(32, b, 1);
    std::vector<int> y(b);
    for (int j = 0; j < b; ++j) y[j] = j % 2;
    for (auto _ : state) benchmark::DoNotOptimize(supcon_loss(f, y, 1.0).value);
}
BENCHMARK(BM_SupCon)->Arg(32)->Arg(128);

void BM_Combined(benchmark::State& state) {
    const int b = int(state.range(0));
    const auto f = random_matrix(32, b, 2);
    const auto l = random_matrix(2, b, 3);
    std::vector<int> y(b);
    for (int j = 0; j < b; ++j) y[j] = j % 2;
    for (auto _ : state) benchmark::DoNotOptimize(combined_loss(l, f, y, 0.5, 1.0).value);
}
BENCHMARK(BM_Combined)->Arg(128);

void BM_KMeans(benchmark::State& state) {
    const auto pts = random_set(int(state.range(0)), 64, 4);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(pts, int(state.range(1)), 0, 100).iterations);
}
BENCHMARK(BM_KMeans)->Args({200, 5})->Args({1000, 20});

void BM_Frechet(benchmark::State& state) {
    const int d = int(state.range(0));
    const auto a = random_set(500, d, 5), b = random_set(500, d, 6);
    for (auto _ : state) benchmark::DoNotOptimize(frechet_distance(a, b));
}
BENCHMARK(BM_Frechet)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
