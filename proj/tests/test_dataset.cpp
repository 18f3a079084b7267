#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mud/dataset.hpp"
#include "mud/error.hpp"
#include "mud/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "mud_test_dataset" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path small_dataset(const std::string& name, int scenes) {
    mud::SceneConfig config;
    config.seed = 77;
    config.width = 48;
    config.height = 40;
    config.count_lo = 1;
    config.count_hi = 4;
    const auto dir = fresh_dir(name);
    mud::generate_dataset(config, scenes, dir);
    return dir;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("loads sorted stem pairs") {
    const auto dir = small_dataset("ok", 3);
    const auto set = mud::load_dataset(dir);
    REQUIRE(set.size() == 3);
    CHECK(set[0].stem == "0000");
    CHECK(set[1].stem == "0001");
    CHECK(set[2].stem == "0002");
    for (const auto& ex : set) {
        CHECK(ex.image.shape() == std::vector<int>({3, 40, 48}));
        for (float v : ex.image.values()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        CHECK(ex.ann.image_width == 48);
        CHECK(ex.ann.image_height == 40);
    }
}

TEST_CASE("image without annotations is an error") {
    const auto dir = small_dataset("missing_csv", 2);
    fs::remove(dir / "0001.csv");
    CHECK_THROWS_AS(mud::load_dataset(dir), mud::DataError);
}

TEST_CASE("annotations without image is an error") {
    const auto dir = small_dataset("missing_png", 2);
    fs::remove(dir / "0000.png");
    CHECK_THROWS_AS(mud::load_dataset(dir), mud::DataError);
}

TEST_CASE("empty or absent directory is an error") {
    const auto dir = fresh_dir("empty");
    CHECK_THROWS(mud::load_dataset(dir));
    CHECK_THROWS(mud::load_dataset(dir / "nope"));
}

TEST_CASE("out-of-bounds annotations rejected at load") {
    const auto dir = small_dataset("oob", 1);
    std::ofstream(dir / "0000.csv") << "500,10\n";
    CHECK_THROWS_AS(mud::load_dataset(dir), mud::DataError);
}

TEST_CASE("dir stats agree with full load") {
    const auto dir = small_dataset("stats", 4);
    const auto stats = mud::dataset_dir_stats(dir);
    const auto set = mud::load_dataset(dir);
    CHECK(stats.images == 4);
    int total = 0;
    for (const auto& ex : set) total += ex.ann.count();
    CHECK(stats.total_count == total);
    CHECK(stats.mean_width == doctest::Approx(48.0));
    CHECK(stats.mean_height == doctest::Approx(40.0));
}

TEST_SUITE_END();
