#include "mud/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mud/checkpoint.hpp"
#include "mud/error.hpp"
#include "mud/png_io.hpp"

namespace mud {
namespace {

void check_config(const SceneConfig& c) {
    if (c.width < 1 || c.height < 1) throw DataError("scene dimensions must be positive");
    if (c.count_lo < 0 || c.count_hi < c.count_lo) {
        throw DataError("scene count range must satisfy 0 <= lo <= hi");
    }
    if (c.radius_min <= 0.0 || c.radius_max < c.radius_min) {
        throw DataError("scene radii must satisfy 0 < min <= max");
    }
    if (c.noise < 0.0) throw DataError("noise amplitude must be non-negative");
}

std::string zero_padded(int v, int width) {
    std::string s = std::to_string(v);
    return std::string(static_cast<std::size_t>(std::max<int>(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

std::uint64_t scene_seed(std::uint64_t base_seed, int scene_index) {
    // splitmix64 over base + index: well-spread, reproducible per scene.
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(scene_index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

Scene generate_scene(const SceneConfig& config) {
    check_config(config);
    std::mt19937_64 rng(config.seed);
    const int W = config.width, H = config.height;

    Scene scene;
    scene.ann.image_width = W;
    scene.ann.image_height = H;
    const int count = std::uniform_int_distribution<int>(config.count_lo, config.count_hi)(rng);
    std::uniform_real_distribution<double> ux(0.0, static_cast<double>(W));
    std::uniform_real_distribution<double> uy(0.0, static_cast<double>(H));
    scene.ann.heads.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        // Annotations are authoritative; rendering follows them exactly.
        double x = std::min(ux(rng), std::nextafter(static_cast<double>(W), 0.0));
        double y = std::min(uy(rng), std::nextafter(static_cast<double>(H), 0.0));
        scene.ann.heads.push_back({x, y});
    }

    std::vector<double> lum(static_cast<std::size_t>(W) * H, 0.1);
    for (const auto& head : scene.ann.heads) {
        const double depth = H > 1 ? head.y / static_cast<double>(H - 1) : 1.0;
        const double radius = config.radius_min + (config.radius_max - config.radius_min) * depth;
        const int x_lo = std::max(0, static_cast<int>(std::floor(head.x - radius - 1.0)));
        const int x_hi = std::min(W - 1, static_cast<int>(std::ceil(head.x + radius + 1.0)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(head.y - radius - 1.0)));
        const int y_hi = std::min(H - 1, static_cast<int>(std::ceil(head.y + radius + 1.0)));
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const double dx = (x + 0.5) - head.x;
                const double dy = (y + 0.5) - head.y;
                const double d = std::sqrt(dx * dx + dy * dy);
                // Soft-edged disk: full strength inside, 1px linear falloff.
                const double cover = std::clamp(radius - d + 0.5, 0.0, 1.0);
                lum[static_cast<std::size_t>(y) * W + x] += 0.75 * cover;
            }
        }
    }
    if (config.noise > 0.0) {
        std::normal_distribution<double> gauss(0.0, config.noise);
        for (auto& v : lum) v += gauss(rng);
    }

    scene.image = Tensor({3, H, W});
    for (std::size_t i = 0; i < lum.size(); ++i) {
        const float v = static_cast<float>(std::clamp(lum[i], 0.0, 1.0));
        scene.image[i] = v;
        scene.image[i + lum.size()] = v;
        scene.image[i + 2 * lum.size()] = v;
    }
    return scene;
}

DatasetStats generate_dataset(const SceneConfig& config, int n_scenes,
                              const std::filesystem::path& dir) {
    check_config(config);
    if (n_scenes < 1) throw DataError("need at least one scene");
    std::filesystem::create_directories(dir);

    std::vector<AnnotationSet> sets;
    sets.reserve(static_cast<std::size_t>(n_scenes));
    for (int i = 0; i < n_scenes; ++i) {
        SceneConfig one = config;
        one.seed = scene_seed(config.seed, i);
        const Scene scene = generate_scene(one);
        const std::string stem = zero_padded(i, 4);

        // 8-bit quantization of the rendered luminance (identical channels).
        const int W = scene.image.dim(2), H = scene.image.dim(1);
        std::vector<unsigned char> pixels(static_cast<std::size_t>(W) * H);
        for (std::size_t p = 0; p < pixels.size(); ++p) {
            pixels[p] = static_cast<unsigned char>(
                std::lround(std::clamp(scene.image[p], 0.0f, 1.0f) * 255.0f));
        }
        write_png_gray8(dir / (stem + ".png"), W, H, pixels);
        save_annotations(scene.ann, dir / (stem + ".csv"));
        sets.push_back(scene.ann);
    }

    std::vector<std::pair<std::string, std::string>> manifest = {
        {"seed", std::to_string(config.seed)},
        {"scenes", std::to_string(n_scenes)},
        {"width", std::to_string(config.width)},
        {"height", std::to_string(config.height)},
        {"count_lo", std::to_string(config.count_lo)},
        {"count_hi", std::to_string(config.count_hi)},
        {"radius_min", std::to_string(config.radius_min)},
        {"radius_max", std::to_string(config.radius_max)},
        {"noise", std::to_string(config.noise)},
    };
    for (int i = 0; i < n_scenes; ++i) {
        manifest.emplace_back("scene." + zero_padded(i, 4) + ".seed",
                              std::to_string(scene_seed(config.seed, i)));
    }
    write_key_values(dir / "manifest.txt", manifest);
    return dataset_stats(sets);
}

}  // namespace mud
