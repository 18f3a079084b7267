#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>

#include "mud/label_maps.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / "mud_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Runs the installed CLI with `args`, capturing stdout + stderr.
std::pair<int, std::string> run_cli(const std::string& args) {
    const std::string cmd = std::string(MUD_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::string out;
    while (fgets(buf.data(), buf.size(), pipe) != nullptr) out += buf.data();
    const int status = pclose(pipe);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, out};
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("help screens") {
    auto [code, out] = run_cli("--help");
    CHECK(code == 0);
    CHECK(out.find("gen-map") != std::string::npos);
    CHECK(out.find("train") != std::string::npos);
    CHECK(out.find("sweep") != std::string::npos);

    auto [gcode, gout] = run_cli("gen-map --help");
    CHECK(gcode == 0);
    CHECK(gout.find("--kind") != std::string::npos);
    CHECK(gout.find("--out") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    CHECK(run_cli("no-such-command").first == 1);
    CHECK(run_cli("gen-map --bogus 3").first == 1);
    CHECK(run_cli("gen-map").first == 1);  // missing required flags
    CHECK(run_cli("gen-map --kind nonsense --image a --heads b --out c").first == 1);
}

TEST_CASE("synthesis, map generation, visualization, stats") {
    const auto dir = fresh_dir("pipeline");
    auto [scode, sout] = run_cli("synth --out " + dir.string() +
                                 " --scenes 2 --seed 9 --width 64 --height 64"
                                 " --count-lo 2 --count-hi 5");
    CHECK(scode == 0);
    CHECK(fs::exists(dir / "0000.png"));
    CHECK(fs::exists(dir / "0001.csv"));

    // Derived maps and renders go to a sibling directory: a dataset dir
    // must hold only image/annotation pairs, and stats rejects strays.
    const auto out = fresh_dir("pipeline_out");
    const auto lmap = (out / "0000.lmap").string();
    auto [gcode, gout] = run_cli("gen-map --kind iknn --k 1 --image " +
                                 (dir / "0000.png").string() + " --heads " +
                                 (dir / "0000.csv").string() + " --out " + lmap);
    CHECK(gcode == 0);
    const auto map = mud::read_lmap(lmap);
    CHECK(map.kind == mud::MapKind::kIknn);
    CHECK(map.width == 64);
    CHECK(map.height == 64);
    for (float v : map.values) {
        CHECK(v > 0.0f);
        CHECK(v <= 1.0f);
    }

    // More neighbors than heads: data error surfaced as exit 2.
    auto [kcode, kout] = run_cli("gen-map --kind knn --k 9 --image " +
                                 (dir / "0000.png").string() + " --heads " +
                                 (dir / "0000.csv").string() + " --out " +
                                 (out / "bad.lmap").string());
    CHECK(kcode == 2);
    CHECK(kout.find("insufficient heads") != std::string::npos);

    auto [vcode, vout] = run_cli("viz --in " + lmap + " --out " +
                                 (out / "0000_map.png").string() + " --log");
    CHECK(vcode == 0);
    CHECK(fs::exists(out / "0000_map.png"));

    auto [tcode, tout] = run_cli("stats --data " + dir.string());
    CHECK(tcode == 0);
    CHECK(tout.find("images: 2") != std::string::npos);
}

TEST_CASE("training errors map to exit codes") {
    const auto small = fresh_dir("small");
    run_cli("synth --out " + small.string() +
            " --scenes 2 --seed 4 --width 64 --height 64 --count-lo 2 --count-hi 4");
    // Images below the 224 patch size: data error.
    auto [dcode, dout] = run_cli("train --data " + small.string() + " --out " +
                                 (small / "w.mudw").string() + " --epochs 1 --batch 2");
    CHECK(dcode == 2);

    const auto full = fresh_dir("full");
    run_cli("synth --out " + full.string() +
            " --scenes 2 --seed 4 --count-lo 2 --count-hi 4");
    // A divergent learning rate must abort with the numeric exit code.
    auto [ncode, nout] = run_cli("train --data " + full.string() + " --out " +
                                 (full / "w.mudw").string() +
                                 " --epochs 6 --batch 2 --lr 1e8");
    CHECK(ncode == 3);

    // Evaluating a missing checkpoint: data error.
    auto [ecode, eout] = run_cli("eval --model " + (full / "nope.mudw").string() +
                                 " --data " + full.string());
    CHECK(ecode == 2);
}

TEST_SUITE_END();
