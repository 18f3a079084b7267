#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mud/error.hpp"
#include "mud/synthetic.hpp"
#include "mud/trainer.hpp"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "mud_test_trainer";
    fs::create_directories(dir);
    return dir;
}

std::vector<mud::ImageExample> tiny_set(int n, std::uint64_t base = 300) {
    std::vector<mud::ImageExample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        mud::SceneConfig config;
        config.seed = mud::scene_seed(base, i);
        config.count_lo = 4;
        config.count_hi = 12;
        auto scene = mud::generate_scene(config);
        out.push_back({"s" + std::to_string(i), std::move(scene.image), std::move(scene.ann)});
    }
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("training labels follow the configured kind") {
    const auto set = tiny_set(1);
    mud::TrainConfig config;
    const auto iknn = mud::training_label(set[0].ann, config);
    const auto direct = mud::iknn_map(set[0].ann, config.map.k);
    CHECK(iknn.kind == mud::MapKind::kIknn);
    CHECK(iknn.values == direct.values);

    config.label_kind = mud::MapKind::kDensity;
    const auto density = mud::training_label(set[0].ann, config);
    CHECK(density.kind == mud::MapKind::kDensity);
    CHECK(std::fabs(density.sum() - set[0].ann.count()) < 1e-3);

    config.label_kind = mud::MapKind::kKnn;  // raw distances are not a label
    CHECK_THROWS_AS(mud::training_label(set[0].ann, config), mud::DataError);
}

TEST_CASE("same seed trains to bit-identical weights") {
    const auto set = tiny_set(4);
    mud::TrainConfig config;
    config.epochs = 2;
    config.batch_size = 2;
    config.seed = 5;

    auto [model_a, result_a] = mud::train_new(set, config);
    auto [model_b, result_b] = mud::train_new(set, config);

    REQUIRE(result_a.history.size() == result_b.history.size());
    for (std::size_t i = 0; i < result_a.history.size(); ++i) {
        CHECK(result_a.history[i].total == result_b.history[i].total);
        CHECK(result_a.history[i].map_loss == result_b.history[i].map_loss);
        CHECK(result_a.history[i].count_loss == result_b.history[i].count_loss);
    }
    const auto state_a = model_a.state();
    const auto state_b = model_b.state();
    REQUIRE(state_a.size() == state_b.size());
    for (std::size_t i = 0; i < state_a.size(); ++i) {
        CHECK(state_a[i].second.values() == state_b[i].second.values());
    }

    mud::TrainConfig other = config;
    other.seed = 6;
    auto [model_c, result_c] = mud::train_new(set, other);
    (void)result_c;
    bool differs = false;
    const auto state_c = model_c.state();
    for (std::size_t i = 0; i < state_a.size(); ++i) {
        if (state_a[i].second.values() != state_c[i].second.values()) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("history is one entry per epoch, numbered from one") {
    const auto set = tiny_set(2);
    mud::TrainConfig config;
    config.epochs = 3;
    config.batch_size = 2;
    int hook_calls = 0;
    config.on_epoch = [&hook_calls](const mud::EpochLoss&) { ++hook_calls; };
    auto [model, result] = mud::train_new(set, config);
    (void)model;
    REQUIRE(result.history.size() == 3);
    CHECK(result.history[0].epoch == 1);
    CHECK(result.history[2].epoch == 3);
    CHECK(hook_calls == 3);
    for (const auto& e : result.history) {
        // Per-example totals are float sums; epoch means accumulate in
        // double, so the split recombines to ~float precision.
        CHECK(e.total == doctest::Approx(e.map_loss + e.count_loss).epsilon(1e-6));
        CHECK(std::isfinite(e.total));
    }
}

TEST_CASE("empty dataset refused") {
    mud::TrainConfig config;
    std::vector<mud::ImageExample> empty;
    CHECK_THROWS_AS(mud::train_new(empty, config), mud::DataError);
    mud::TrainConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(mud::train_new(tiny_set(1), bad), mud::DataError);
}

TEST_CASE("divergent training aborts with a numeric error") {
    const auto set = tiny_set(2);
    mud::TrainConfig config;
    config.epochs = 10;
    config.batch_size = 2;
    config.learning_rate = 1e8;
    CHECK_THROWS_AS(mud::train_new(set, config), mud::NumericError);
}

TEST_CASE("a single example is memorized within 500 steps") {
    const auto set = tiny_set(1, 901);
    mud::TrainConfig config;
    config.epochs = 500;
    config.batch_size = 1;
    config.seed = 3;
    auto [model, result] = mud::train_new(set, config);
    (void)model;
    REQUIRE(result.history.size() == 500);
    const double initial = result.history.front().total;
    const double final = result.history.back().total;
    CHECK(final < 0.01 * initial);
}

TEST_CASE("loss history csv layout") {
    std::vector<mud::EpochLoss> history = {{1, 3.5, 1.25, 2.25}, {2, 2.0, 1.0, 1.0}};
    const auto path = temp_dir() / "history.csv";
    mud::write_loss_history_csv(path, history);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,L,L_m,L_c");
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
    int rows = 1;
    while (std::getline(in, line) && !line.empty()) ++rows;
    CHECK(rows == 2);
}

TEST_CASE("save and load a run") {
    const auto set = tiny_set(2);
    mud::TrainConfig config;
    config.epochs = 1;
    config.batch_size = 2;
    config.seed = 11;
    config.label_kind = mud::MapKind::kDensity;
    config.map.beta = 0.4;
    config.map.k = 2;
    config.map.label_resolution = 56;
    auto [model, result] = mud::train_new(set, config);
    (void)result;

    const auto path = temp_dir() / "run.mudw";
    mud::save_run(path, model, config);
    CHECK(fs::exists(path));
    CHECK(fs::exists(temp_dir() / "run.cfg"));

    auto [loaded, loaded_config] = mud::load_run(path);
    CHECK(loaded_config.label_kind == config.label_kind);
    CHECK(loaded_config.map.k == config.map.k);
    CHECK(loaded_config.map.beta == doctest::Approx(config.map.beta));
    CHECK(loaded_config.map.label_resolution == config.map.label_resolution);
    CHECK(loaded_config.seed == config.seed);

    mud::Tensor patch({3, 224, 224});
    for (std::size_t i = 0; i < patch.size(); ++i) {
        patch[i] = static_cast<float>((i % 97) / 97.0);
    }
    CHECK(model.predict(patch).final_count == loaded.predict(patch).final_count);
}

TEST_CASE("evaluation pairs every image") {
    const auto set = tiny_set(3);
    mud::Model model(mud::ModelConfig{});
    const auto metrics = mud::evaluate_model(model, set);
    CHECK(metrics.images == 3);
    CHECK(metrics.mae >= 0.0);
    CHECK(metrics.rmse >= metrics.mae);
}

TEST_SUITE_END();
