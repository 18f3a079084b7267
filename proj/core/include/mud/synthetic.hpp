#pragma once

#include <cstdint>
#include <filesystem>

#include "mud/annotations.hpp"
#include "mud/tensor.hpp"

namespace mud {

/// Seeded crowd-scene recipe. Head disks shrink linearly toward the top of
/// the frame (radius_min at y = 0 up to radius_max at the bottom edge), a
/// cheap stand-in for perspective.
struct SceneConfig {
    std::uint64_t seed = 1;
    int width = 224;
    int height = 224;
    int count_lo = 5;
    int count_hi = 50;
    double radius_min = 3.0;
    double radius_max = 8.0;
    double noise = 0.05;  // additive Gaussian amplitude
};

struct Scene {
    Tensor image;  // (3,H,W) in [0,1]
    AnnotationSet ann;
};

/// Head positions are drawn first and recorded exactly in the annotation
/// set; rendering then paints soft disks at those points and adds pixel
/// noise. Deterministic in config.seed.
Scene generate_scene(const SceneConfig& config);

/// Writes n_scenes pairs 0000.png/0000.csv, 0001.png/... under dir (created
/// if missing), plus manifest.txt recording the recipe and per-scene seeds.
/// Scene i uses a seed derived from config.seed and i, so any slice can be
/// regenerated independently. Returns the stats of what was written.
DatasetStats generate_dataset(const SceneConfig& config, int n_scenes,
                              const std::filesystem::path& dir);

/// The per-scene seed derivation used by generate_dataset.
std::uint64_t scene_seed(std::uint64_t base_seed, int scene_index);

}  // namespace mud
