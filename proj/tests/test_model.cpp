#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mud/error.hpp"
#include "mud/model.hpp"

namespace {

mud::Tensor random_patch(std::uint64_t seed) {
    mud::Tensor patch({3, mud::kPatchSize, mud::kPatchSize});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (auto& v : patch.values()) v = unit(rng);
    return patch;
}

template <typename T>
mud::Var<T> find_param(const mud::ModelT<T>& model, const std::string& name) {
    for (const auto& [n, v] : model.named_parameters()) {
        if (n == name) return v;
    }
    throw std::runtime_error("missing parameter " + name);
}

// Zero every weight so each count estimate collapses to its emitting bias.
mud::NamedTensors biased_state(const mud::Model& model, const std::array<float, 3>& map_biases,
                               float end_bias) {
    auto state = model.state();
    for (auto& [name, tensor] : state) {
        std::fill(tensor.values().begin(), tensor.values().end(), 0.0f);
        if (name == "end.b") tensor.values()[0] = end_bias;
        for (int j = 0; j < 3; ++j) {
            if (name == "map" + std::to_string(j + 1) + ".c4.b") {
                tensor.values()[0] = map_biases[static_cast<std::size_t>(j)];
            }
        }
    }
    return state;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("desk backbone and map modules reproduce the layer table") {
    mud::Model model(mud::ModelConfig{});
    auto patch = mud::constant(random_patch(1));
    const auto stages = model.backbone_forward(patch);
    CHECK(stages[0]->value.shape() == std::vector<int>({16, 28, 28}));
    CHECK(stages[1]->value.shape() == std::vector<int>({32, 14, 14}));
    CHECK(stages[2]->value.shape() == std::vector<int>({64, 7, 7}));

    for (int j = 0; j < mud::kNumMapModules; ++j) {
        auto [map, count] = model.map_module_forward(stages[static_cast<std::size_t>(j)], j);
        CHECK(map->value.shape() == std::vector<int>({1, 224, 224}));
        CHECK(count->value.shape() == std::vector<int>({1}));
    }
    auto end = model.end_count_forward(stages[2]);
    CHECK(end->value.shape() == std::vector<int>({1}));
}

TEST_CASE("count stack walks 8x112 -> 16x56 -> 32x28 -> scalar") {
    mud::Model model(mud::ModelConfig{});
    auto patch = mud::constant(random_patch(2));
    const auto stages = model.backbone_forward(patch);
    auto [map, count] = model.map_module_forward(stages[0], 0);
    (void)count;
    auto h1 = mud::conv2d(map, find_param(model, "map1.c1.w"), find_param(model, "map1.c1.b"), 2);
    CHECK(h1->value.shape() == std::vector<int>({8, 112, 112}));
    auto h2 = mud::conv2d(mud::leaky_relu(h1), find_param(model, "map1.c2.w"),
                          find_param(model, "map1.c2.b"), 2);
    CHECK(h2->value.shape() == std::vector<int>({16, 56, 56}));
    auto h3 = mud::conv2d(mud::leaky_relu(h2), find_param(model, "map1.c3.w"),
                          find_param(model, "map1.c3.b"), 2);
    CHECK(h3->value.shape() == std::vector<int>({32, 28, 28}));
    auto h4 = mud::conv2d(mud::leaky_relu(h3), find_param(model, "map1.c4.w"),
                          find_param(model, "map1.c4.b"), 1);
    CHECK(h4->value.shape() == std::vector<int>({1, 1, 1}));
}

TEST_CASE("paper-scale stage widths and upsampling kernels") {
    mud::ModelConfig config;
    config.backbone = mud::BackboneConfig::paper_scale();
    mud::Model model(config);
    auto patch = mud::constant(random_patch(3));
    const auto stages = model.backbone_forward(patch);
    CHECK(stages[0]->value.shape() == std::vector<int>({128, 28, 28}));
    CHECK(stages[1]->value.shape() == std::vector<int>({256, 14, 14}));
    CHECK(stages[2]->value.shape() == std::vector<int>({896, 7, 7}));
    for (int j = 0; j < mud::kNumMapModules; ++j) {
        auto [map, count] = model.map_module_forward(stages[static_cast<std::size_t>(j)], j);
        CHECK(map->value.shape() == std::vector<int>({1, 224, 224}));
        CHECK(count->value.shape() == std::vector<int>({1}));
    }
    const int strides[] = {8, 16, 32};
    const int widths[] = {128, 256, 896};
    for (int j = 0; j < 3; ++j) {
        auto up = find_param(model, "map" + std::to_string(j + 1) + ".up.w");
        CHECK(up->value.shape() ==
              std::vector<int>({widths[j], 1, strides[j], strides[j]}));
    }
}

TEST_CASE("map module validates its input stage") {
    mud::Model model(mud::ModelConfig{});
    auto wrong = mud::constant(mud::Tensor({8, 28, 28}));
    CHECK_THROWS_AS(model.map_module_forward(wrong, 0), mud::DataError);
    auto stage2_shape = mud::constant(mud::Tensor({16, 14, 14}));
    CHECK_THROWS_AS(model.map_module_forward(stage2_shape, 0), mud::DataError);
    CHECK_THROWS_AS(model.map_module_forward(wrong, 5), mud::DataError);
}

TEST_CASE("final count averages the four estimates") {
    mud::Model model(mud::ModelConfig{});
    const auto patch = random_patch(4);
    const auto pred = model.predict(patch);
    const double mean =
        (pred.end_count + pred.counts[0] + pred.counts[1] + pred.counts[2]) / 4.0;
    CHECK(pred.final_count == doctest::Approx(mean).epsilon(1e-6));
}

TEST_CASE("count fixtures via zeroed weights") {
    mud::Model model(mud::ModelConfig{});
    model.load_state(biased_state(model, {0.0f, 0.0f, 0.0f}, 4.0f));
    const auto pred = model.predict(random_patch(5));
    CHECK(pred.counts[0] == 0.0);
    CHECK(pred.counts[1] == 0.0);
    CHECK(pred.counts[2] == 0.0);
    CHECK(pred.end_count == 4.0);
    CHECK(pred.final_count == 1.0);

    model.load_state(biased_state(model, {2.5f, 2.5f, 2.5f}, 2.5f));
    const auto equal = model.predict(random_patch(6));
    CHECK(equal.final_count == 2.5);
}

TEST_CASE("loss splits into map and count terms") {
    // Hand-built prediction graph in double precision: every map sits at a
    // constant offset delta above the label and every count is exact, so the
    // map term must equal 3 * delta^2 and the count term zero.
    const double delta = 0.1;
    const double truth_count = 12.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    mud::TensorD truth({224, 224});
    for (auto& v : truth.values()) v = unit(rng);

    mud::PredictionGraphT<double> pred;
    for (int j = 0; j < mud::kNumMapModules; ++j) {
        mud::TensorD shifted({1, 224, 224});
        for (std::size_t i = 0; i < truth.size(); ++i) {
            shifted.data()[i] = truth.data()[i] + delta;
        }
        pred.maps[static_cast<std::size_t>(j)] = mud::constant(shifted);
        pred.counts[static_cast<std::size_t>(j)] =
            mud::constant(mud::TensorD::scalar(truth_count));
    }
    pred.end_count = mud::constant(mud::TensorD::scalar(truth_count));
    pred.final_count = mud::constant(mud::TensorD::scalar(truth_count));

    const auto loss = mud::compute_loss(pred, truth, truth_count, mud::MapKind::kIknn);
    const auto values = mud::loss_values(loss);
    CHECK(std::fabs(values.map_loss - 3.0 * delta * delta) < 1e-6);
    CHECK(values.count_loss == 0.0);
    CHECK(values.total == values.map_loss + values.count_loss);
}

TEST_CASE("loss totals add exactly in the graph's own precision") {
    mud::Model model(mud::ModelConfig{});
    auto patch = mud::constant(random_patch(8));
    const auto pred = model.forward(patch);
    mud::Tensor truth({28, 28});
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (auto& v : truth.values()) v = unit(rng);
    const auto loss = mud::compute_loss(pred, truth, 10.0, mud::MapKind::kIknn);
    const auto values = mud::loss_values(loss);
    const float total32 = static_cast<float>(values.map_loss) + static_cast<float>(values.count_loss);
    CHECK(static_cast<float>(values.total) == total32);
    CHECK(values.map_loss > 0.0);
    CHECK(values.count_loss > 0.0);
}

TEST_CASE("density labels pool by sum, others by mean") {
    // A constant predicted map equal to the pooled label gives zero map loss.
    const float c = 0.125f;
    mud::PredictionGraphT<float> pred;
    for (int j = 0; j < mud::kNumMapModules; ++j) {
        mud::Tensor flat({1, 224, 224});
        std::fill(flat.values().begin(), flat.values().end(), c);
        pred.maps[static_cast<std::size_t>(j)] = mud::constant(flat);
        pred.counts[static_cast<std::size_t>(j)] = mud::constant(mud::Tensor::scalar(3.0f));
    }
    pred.end_count = mud::constant(mud::Tensor::scalar(3.0f));
    pred.final_count = mud::constant(mud::Tensor::scalar(3.0f));

    mud::Tensor mean_truth({28, 28});
    std::fill(mean_truth.values().begin(), mean_truth.values().end(), c);
    const auto mean_loss =
        mud::loss_values(mud::compute_loss(pred, mean_truth, 3.0, mud::MapKind::kIknn));
    CHECK(mean_loss.map_loss == doctest::Approx(0.0));

    mud::Tensor sum_truth({28, 28});
    std::fill(sum_truth.values().begin(), sum_truth.values().end(), c * 64.0f);
    const auto sum_loss =
        mud::loss_values(mud::compute_loss(pred, sum_truth, 3.0, mud::MapKind::kDensity));
    CHECK(sum_loss.map_loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("initialization is seed deterministic") {
    mud::ModelConfig a;
    a.init_seed = 7;
    mud::ModelConfig b;
    b.init_seed = 7;
    mud::Model m1(a), m2(b);
    const auto s1 = m1.state();
    const auto s2 = m2.state();
    REQUIRE(s1.size() == s2.size());
    bool identical = true;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        REQUIRE(s1[i].first == s2[i].first);
        if (s1[i].second.values() != s2[i].second.values()) identical = false;
    }
    CHECK(identical);

    mud::ModelConfig c;
    c.init_seed = 8;
    mud::Model m3(c);
    const auto s3 = m3.state();
    bool differs = false;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        if (s1[i].second.values() != s3[i].second.values()) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("biases start at zero") {
    mud::Model model(mud::ModelConfig{});
    for (const auto& [name, var] : model.named_parameters()) {
        if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
            for (float v : var->value.values()) CHECK(v == 0.0f);
        }
    }
}

TEST_CASE("state round trips through load_state") {
    mud::ModelConfig a;
    a.init_seed = 11;
    mud::Model src(a);
    mud::ModelConfig b;
    b.init_seed = 99;
    mud::Model dst(b);
    dst.load_state(src.state());
    const auto patch = random_patch(12);
    CHECK(src.predict(patch).final_count == dst.predict(patch).final_count);

    auto broken = src.state();
    broken.pop_back();
    CHECK_THROWS_AS(dst.load_state(broken), mud::DataError);
}

TEST_CASE("cast to double preserves values and predictions") {
    mud::Model model(mud::ModelConfig{});
    auto dmodel = mud::cast_model<double>(model);
    const auto& fp = model.named_parameters();
    const auto& dp = dmodel.named_parameters();
    REQUIRE(fp.size() == dp.size());
    for (std::size_t i = 0; i < fp.size(); ++i) {
        CHECK(fp[i].first == dp[i].first);
        for (std::size_t k = 0; k < fp[i].second->value.size(); ++k) {
            CHECK(static_cast<double>(fp[i].second->value.data()[k]) ==
                  dp[i].second->value.data()[k]);
        }
    }
    const auto patch = random_patch(13);
    const auto f32 = model.predict(patch);
    const auto f64 = dmodel.predict(patch.cast<double>());
    CHECK(f64.final_count == doctest::Approx(f32.final_count).epsilon(1e-4));
}

TEST_CASE("parameter census stays stable") {
    mud::Model model(mud::ModelConfig{});
    CHECK(model.parameter_count() == 184988);
    CHECK(model.parameters().size() == model.named_parameters().size());
}

TEST_SUITE_END();
