#include <benchmark/benchmark.h>

#include <random>

#include "mud/autodiff.hpp"
#include "mud/model.hpp"

namespace {

mud::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
    mud::Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (auto& v : t.values()) v = unit(rng);
    return t;
}

void BM_Conv2d(benchmark::State& state) {
    auto x = mud::constant(random_tensor({16, 56, 56}, 1));
    auto w = mud::constant(random_tensor({32, 16, 2, 2}, 2));
    auto b = mud::constant(mud::Tensor({32}));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mud::conv2d(x, w, b, 2)->value.data());
    }
}

void BM_TransposedConv2d(benchmark::State& state) {
    auto x = mud::constant(random_tensor({64, 7, 7}, 3));
    auto w = mud::constant(random_tensor({64, 1, 32, 32}, 4));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mud::transposed_conv2d(x, w, 32)->value.data());
    }
}

void BM_ModelForward(benchmark::State& state) {
    const mud::Model model(mud::ModelConfig{});
    const auto patch = random_tensor({3, 224, 224}, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.predict(patch).final_count);
    }
}

void BM_ModelForwardBackward(benchmark::State& state) {
    mud::Model model(mud::ModelConfig{});
    const auto patch = random_tensor({3, 224, 224}, 6);
    mud::Tensor truth({28, 28});
    std::fill(truth.values().begin(), truth.values().end(), 0.5f);
    const auto params = model.parameters();
    for (auto _ : state) {
        auto pred = model.forward(mud::constant(patch));
        auto loss = mud::compute_loss(pred, truth, 20.0, mud::MapKind::kIknn);
        mud::backward(loss.total);
        mud::zero_grads(params);
        benchmark::DoNotOptimize(loss.total->value.data());
    }
}

}  // namespace

BENCHMARK(BM_Conv2d);
BENCHMARK(BM_TransposedConv2d);
BENCHMARK(BM_ModelForward);
BENCHMARK(BM_ModelForwardBackward)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
