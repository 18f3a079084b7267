#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mud/head_index.hpp"

namespace {

std::vector<mud::Point> random_points(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, 1024.0);
    std::vector<mud::Point> pts(n);
    for (auto& p : pts) p = {coord(rng), coord(rng)};
    return pts;
}

void BM_KnnQuery(benchmark::State& state, mud::IndexBackend backend) {
    const auto heads = static_cast<std::size_t>(state.range(0));
    const int k = static_cast<int>(state.range(1));
    const mud::HeadIndex index(random_points(heads, 42), backend);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(0.0, 1024.0);
    for (auto _ : state) {
        const mud::Point q{coord(rng), coord(rng)};
        benchmark::DoNotOptimize(index.knn_distances(q, k));
    }
}

void BM_IndexBuild(benchmark::State& state) {
    const auto pts = random_points(static_cast<std::size_t>(state.range(0)), 42);
    for (auto _ : state) {
        mud::HeadIndex index(pts, mud::IndexBackend::kKdTree);
        benchmark::DoNotOptimize(index.size());
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_KnnQuery, brute, mud::IndexBackend::kBruteForce)
    ->Args({100, 1})
    ->Args({1000, 1})
    ->Args({1000, 6})
    ->Args({10000, 1});
BENCHMARK_CAPTURE(BM_KnnQuery, kdtree, mud::IndexBackend::kKdTree)
    ->Args({100, 1})
    ->Args({1000, 1})
    ->Args({1000, 6})
    ->Args({10000, 1});
BENCHMARK(BM_IndexBuild)->Arg(1000)->Arg(10000);
