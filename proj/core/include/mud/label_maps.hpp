#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mud/annotations.hpp"
#include "mud/head_index.hpp"

namespace mud {

enum class MapKind : std::uint8_t { kDensity = 0, kKnn = 1, kIknn = 2 };

const char* map_kind_name(MapKind kind);
MapKind map_kind_from_name(const std::string& name);

/// A 2D non-negative ground-truth raster. Values are stored as float32;
/// generation accumulates in double.
struct LabelMap {
    MapKind kind = MapKind::kDensity;
    int width = 0;
    int height = 0;
    std::vector<float> values;  // row-major, height * width

    float& at(int row, int col) {
        return values[static_cast<std::size_t>(row) * width + col];
    }
    float at(int row, int col) const {
        return values[static_cast<std::size_t>(row) * width + col];
    }
    double sum() const;
};

/// Per-head Gaussian scale selection. Adaptive mode uses the mean distance
/// to the head's k_sigma nearest *other* heads; when fewer other heads
/// exist, `fallback_sigma` is used.
struct SigmaMode {
    bool adaptive = true;
    int k_sigma = 3;
    double fixed_sigma = 16.0;
    double fallback_sigma = 16.0;

    static SigmaMode adaptive_k(int k) {
        SigmaMode m;
        m.adaptive = true;
        m.k_sigma = k;
        return m;
    }
    static SigmaMode fixed(double sigma) {
        SigmaMode m;
        m.adaptive = false;
        m.fixed_sigma = sigma;
        return m;
    }
};

struct MapConfig {
    int k = 1;           // neighbor count for kNN / ikNN maps
    double beta = 0.3;   // Gaussian scale factor, kernel size f = beta * sigma_h
    SigmaMode sigma_mode;
    int label_resolution = 224;  // 28 | 56 | 112 | 224
};

/// Gaussian scale for one head under the given mode.
double sigma_for_head(const AnnotationSet& ann, int head_index, const SigmaMode& mode);

/// Sum of per-head isotropic Gaussians at pixel centers, each truncated at
/// 4*f(sigma_h) and discretely renormalized to mass exactly 1, so the map
/// sums to the head count.
LabelMap density_map(const AnnotationSet& ann, const MapConfig& config,
                     IndexBackend backend = IndexBackend::kKdTree);

/// Mean distance from each pixel center (col + 0.5, row + 0.5) to its k
/// nearest heads. Requires H >= k.
LabelMap knn_map(const AnnotationSet& ann, int k,
                 IndexBackend backend = IndexBackend::kKdTree, int threads = 0);

/// Element-wise 1 / (K + 1) of the kNN map. All zeros when H == 0; when
/// 0 < H < k the neighbor count is clamped to H.
LabelMap iknn_map(const AnnotationSet& ann, int k,
                  IndexBackend backend = IndexBackend::kKdTree, int threads = 0);

enum class PoolMode { kSum, kMean };

/// Non-overlapping block pooling to target x target. Target must divide
/// both dimensions. Sum pooling preserves the total; mean pooling the range.
LabelMap downsample_map(const LabelMap& map, int target, PoolMode mode);

/// Axis-aligned crop; the rectangle must lie inside the map.
LabelMap crop_map(const LabelMap& map, int x0, int y0, int width, int height);

enum class PngScale { kLinear, kLog };

/// 8-bit grayscale visualization. Linear maps [min, max] to [0, 255];
/// log applies log1p first.
void export_png(const LabelMap& map, const std::filesystem::path& path,
                PngScale scale = PngScale::kLinear);

/// Binary raster: magic "LMAP", u8 version=1, u8 kind, u16 reserved,
/// u32 width, u32 height, float32 values; all little-endian, row-major.
void write_lmap(const LabelMap& map, const std::filesystem::path& path);
LabelMap read_lmap(const std::filesystem::path& path);

}  // namespace mud
