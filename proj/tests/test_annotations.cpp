#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mud/annotations.hpp"

namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    auto dir = fs::temp_directory_path() / "mud_test_annotations";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE_BEGIN("annotations");

TEST_CASE("parse basic csv") {
    const auto set = mud::parse_annotations("10.5,3\n0,0\n223,223\n", 224, 224);
    REQUIRE(set.count() == 3);
    CHECK(set.heads[0].x == doctest::Approx(10.5));
    CHECK(set.heads[0].y == doctest::Approx(3.0));
    CHECK(set.image_width == 224);
    CHECK(set.image_height == 224);
}

TEST_CASE("parse tolerates header, blank lines, whitespace") {
    const auto set = mud::parse_annotations("x,y\n 5 , 7 \n\n8,9\n", 100, 100);
    REQUIRE(set.count() == 2);
    CHECK(set.heads[0].x == doctest::Approx(5.0));
    CHECK(set.heads[1].y == doctest::Approx(9.0));
}

TEST_CASE("empty annotation set is allowed") {
    const auto set = mud::parse_annotations("", 64, 64);
    CHECK(set.count() == 0);
}

TEST_CASE("out-of-bounds and malformed rows rejected") {
    CHECK_THROWS_AS(mud::parse_annotations("300,10\n", 224, 224), mud::DataError);
    CHECK_THROWS_AS(mud::parse_annotations("10,-1\n", 224, 224), mud::DataError);
    CHECK_THROWS_AS(mud::parse_annotations("abc,def\n", 224, 224), mud::DataError);
    CHECK_THROWS_AS(mud::parse_annotations("1\n", 224, 224), mud::DataError);
}

TEST_CASE("csv round trip") {
    mud::AnnotationSet set;
    set.image_width = 128;
    set.image_height = 96;
    set.heads = {{1.25, 2.5}, {100.0, 90.0}};
    const auto text = mud::annotations_to_csv(set);
    const auto back = mud::parse_annotations(text, 128, 96);
    REQUIRE(back.count() == 2);
    CHECK(back.heads[0].x == doctest::Approx(1.25));
    CHECK(back.heads[1].y == doctest::Approx(90.0));
}

TEST_CASE("file round trip") {
    const auto path = temp_dir() / "ann.csv";
    mud::AnnotationSet set;
    set.image_width = 50;
    set.image_height = 40;
    set.heads = {{10, 20}};
    mud::save_annotations(set, path);
    const auto back = mud::load_annotations(path, 50, 40);
    REQUIRE(back.count() == 1);
    CHECK(back.heads[0].x == doctest::Approx(10.0));
    CHECK_THROWS_AS(mud::load_annotations(temp_dir() / "missing.csv", 10, 10), mud::IoError);
}

TEST_CASE("dataset stats tally") {
    mud::AnnotationSet a;
    a.image_width = 100;
    a.image_height = 80;
    a.heads = {{1, 1}, {2, 2}};
    mud::AnnotationSet b;
    b.image_width = 200;
    b.image_height = 120;
    b.heads = {{1, 1}, {2, 2}, {3, 3}, {4, 4}};
    const auto stats = mud::dataset_stats({a, b});
    CHECK(stats.images == 2);
    CHECK(stats.total_count == 6);
    CHECK(stats.mean_count == doctest::Approx(3.0));
    CHECK(stats.max_count == 4);
    CHECK(stats.mean_width == doctest::Approx(150.0));
    CHECK(stats.mean_height == doctest::Approx(100.0));
}

TEST_SUITE_END();
