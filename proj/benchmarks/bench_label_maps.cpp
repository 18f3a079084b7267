#include <benchmark/benchmark.h>

#include <random>

#include "mud/label_maps.hpp"

namespace {

mud::AnnotationSet random_set(int heads, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, 224.0 - 1e-3);
    mud::AnnotationSet ann;
    ann.image_width = 224;
    ann.image_height = 224;
    for (int i = 0; i < heads; ++i) ann.heads.push_back({coord(rng), coord(rng)});
    return ann;
}

void BM_IknnMap(benchmark::State& state) {
    const auto ann = random_set(static_cast<int>(state.range(0)), 11);
    const int k = static_cast<int>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mud::iknn_map(ann, k));
    }
}

void BM_DensityMap(benchmark::State& state) {
    const auto ann = random_set(static_cast<int>(state.range(0)), 11);
    mud::MapConfig config;
    for (auto _ : state) {
        benchmark::DoNotOptimize(mud::density_map(ann, config));
    }
}

void BM_DownsampleMap(benchmark::State& state) {
    const auto map = mud::iknn_map(random_set(50, 11), 1);
    const int target = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mud::downsample_map(map, target, mud::PoolMode::kMean));
    }
}

}  // namespace

BENCHMARK(BM_IknnMap)->Args({50, 1})->Args({50, 6})->Args({500, 1});
BENCHMARK(BM_DensityMap)->Arg(50)->Arg(500);
BENCHMARK(BM_DownsampleMap)->Arg(28)->Arg(112);
