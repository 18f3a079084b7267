#include "mud/label_maps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mud/parallel.hpp"
#include "mud/png_io.hpp"

static_assert(std::endian::native == std::endian::little,
              "lmap serialization assumes a little-endian host");

namespace mud {

namespace {

constexpr char kLmapMagic[4] = {'L', 'M', 'A', 'P'};
constexpr std::uint8_t kLmapVersion = 1;

inline double pixel_cx(int col) { return col + 0.5; }
inline double pixel_cy(int row) { return row + 0.5; }

}  // namespace

const char* map_kind_name(MapKind kind) {
    switch (kind) {
        case MapKind::kDensity: return "density";
        case MapKind::kKnn: return "knn";
        case MapKind::kIknn: return "iknn";
    }
    return "unknown";
}

MapKind map_kind_from_name(const std::string& name) {
    if (name == "density") return MapKind::kDensity;
    if (name == "knn") return MapKind::kKnn;
    if (name == "iknn") return MapKind::kIknn;
    throw DataError("unknown map kind: " + name);
}

double LabelMap::sum() const {
    double s = 0.0;
    for (float v : values) s += v;
    return s;
}

namespace {

double sigma_from_index(const HeadIndex& index, const AnnotationSet& ann, int head_index,
                        const SigmaMode& mode) {
    if (head_index < 0 || head_index >= ann.count()) {
        throw DataError("sigma_for_head: head index out of range");
    }
    if (!mode.adaptive) return mode.fixed_sigma;
    if (mode.k_sigma <= 0) throw DataError("sigma_for_head: k_sigma must be positive");
    const int others = ann.count() - 1;
    if (others < mode.k_sigma) return mode.fallback_sigma;

    // Query k_sigma + 1 neighbors from the head itself and drop one zero
    // (the self match); remaining zeros are genuine coincident heads.
    std::vector<double> d =
        index.knn_distances(ann.heads[static_cast<std::size_t>(head_index)], mode.k_sigma + 1);
    double sum = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) sum += d[i];
    return sum / static_cast<double>(mode.k_sigma);
}

}  // namespace

double sigma_for_head(const AnnotationSet& ann, int head_index, const SigmaMode& mode) {
    if (!mode.adaptive || ann.count() - 1 < std::max(mode.k_sigma, 1) ||
        head_index < 0 || head_index >= ann.count()) {
        // No queries needed (or the index build would be wasted on an error).
        const HeadIndex empty(std::vector<Point>{}, IndexBackend::kBruteForce);
        return sigma_from_index(empty, ann, head_index, mode);
    }
    const HeadIndex index(ann.heads, IndexBackend::kBruteForce);
    return sigma_from_index(index, ann, head_index, mode);
}

LabelMap density_map(const AnnotationSet& ann, const MapConfig& config, IndexBackend backend) {
    if (config.beta <= 0.0) throw DataError("density_map: beta must be positive");
    const int w = ann.image_width;
    const int h = ann.image_height;
    if (w <= 0 || h <= 0) throw DataError("density_map: image dimensions must be positive");

    std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
    std::vector<double> stamp;
    const HeadIndex index(ann.heads, backend);

    for (int hi = 0; hi < ann.count(); ++hi) {
        const Point& head = ann.heads[static_cast<std::size_t>(hi)];
        const double sigma = sigma_from_index(index, ann, hi, config.sigma_mode);
        const double f = config.beta * sigma;

        // Degenerate kernel (coincident heads under adaptive sigma): the
        // zero-spread limit is a unit delta on the nearest pixel.
        const int nearest_col = std::clamp(static_cast<int>(std::floor(head.x)), 0, w - 1);
        const int nearest_row = std::clamp(static_cast<int>(std::floor(head.y)), 0, h - 1);
        if (!(f > 1e-9)) {
            acc[static_cast<std::size_t>(nearest_row) * w + nearest_col] += 1.0;
            continue;
        }

        const double radius = 4.0 * f;
        const double r2 = radius * radius;
        int col0 = static_cast<int>(std::ceil(head.x - radius - 0.5));
        int col1 = static_cast<int>(std::floor(head.x + radius - 0.5));
        int row0 = static_cast<int>(std::ceil(head.y - radius - 0.5));
        int row1 = static_cast<int>(std::floor(head.y + radius - 0.5));
        col0 = std::max(col0, 0);
        row0 = std::max(row0, 0);
        col1 = std::min(col1, w - 1);
        row1 = std::min(row1, h - 1);

        double mass = 0.0;
        const int bw = col1 - col0 + 1;
        const int bh = row1 - row0 + 1;
        if (bw > 0 && bh > 0) {
            stamp.assign(static_cast<std::size_t>(bw) * bh, 0.0);
            const double inv2f2 = 1.0 / (2.0 * f * f);
            for (int r = row0; r <= row1; ++r) {
                const double dy = pixel_cy(r) - head.y;
                for (int c = col0; c <= col1; ++c) {
                    const double dx = pixel_cx(c) - head.x;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 > r2) continue;
                    const double v = std::exp(-d2 * inv2f2);
                    stamp[static_cast<std::size_t>(r - row0) * bw + (c - col0)] = v;
                    mass += v;
                }
            }
        }
        if (mass <= 0.0) {
            acc[static_cast<std::size_t>(nearest_row) * w + nearest_col] += 1.0;
            continue;
        }
        const double inv_mass = 1.0 / mass;
        for (int r = row0; r <= row1; ++r) {
            for (int c = col0; c <= col1; ++c) {
                const double v = stamp[static_cast<std::size_t>(r - row0) * bw + (c - col0)];
                if (v != 0.0) acc[static_cast<std::size_t>(r) * w + c] += v * inv_mass;
            }
        }
    }

    LabelMap map;
    map.kind = MapKind::kDensity;
    map.width = w;
    map.height = h;
    map.values.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) map.values[i] = static_cast<float>(acc[i]);
    return map;
}

LabelMap knn_map(const AnnotationSet& ann, int k, IndexBackend backend, int threads) {
    if (k <= 0) throw DataError("knn_map: k must be positive");
    if (ann.count() < k) throw DataError("insufficient heads for k");
    const int w = ann.image_width;
    const int h = ann.image_height;
    if (w <= 0 || h <= 0) throw DataError("knn_map: image dimensions must be positive");

    LabelMap map;
    map.kind = MapKind::kKnn;
    map.width = w;
    map.height = h;
    map.values.resize(static_cast<std::size_t>(w) * h);

    const HeadIndex index(ann.heads, backend);
    parallel_for(
        static_cast<std::size_t>(h),
        [&](std::size_t row_begin, std::size_t row_end) {
            for (std::size_t row = row_begin; row < row_end; ++row) {
                float* out = map.values.data() + row * static_cast<std::size_t>(w);
                for (int col = 0; col < w; ++col) {
                    const Point q{pixel_cx(col), pixel_cy(static_cast<int>(row))};
                    out[col] = static_cast<float>(index.mean_knn_distance(q, k));
                }
            }
        },
        threads);
    return map;
}

LabelMap iknn_map(const AnnotationSet& ann, int k, IndexBackend backend, int threads) {
    if (k <= 0) throw DataError("iknn_map: k must be positive");
    const int w = ann.image_width;
    const int h = ann.image_height;
    if (w <= 0 || h <= 0) throw DataError("iknn_map: image dimensions must be positive");

    LabelMap map;
    map.kind = MapKind::kIknn;
    map.width = w;
    map.height = h;

    if (ann.count() == 0) {
        // Limit convention: 1 / (K + 1) -> 0 as K -> infinity.
        map.values.assign(static_cast<std::size_t>(w) * h, 0.0f);
        return map;
    }
    const int effective_k = std::min(k, ann.count());
    LabelMap knn = knn_map(ann, effective_k, backend, threads);
    map.values = std::move(knn.values);
    for (float& v : map.values) v = static_cast<float>(1.0 / (static_cast<double>(v) + 1.0));
    return map;
}

LabelMap downsample_map(const LabelMap& map, int target, PoolMode mode) {
    if (target <= 0) throw DataError("downsample_map: target must be positive");
    if (map.width % target != 0 || map.height % target != 0) {
        throw DataError("downsample_map: target must divide map dimensions");
    }
    const int bx = map.width / target;
    const int by = map.height / target;

    LabelMap out;
    out.kind = map.kind;
    out.width = target;
    out.height = target;
    out.values.resize(static_cast<std::size_t>(target) * target);
    const double norm = mode == PoolMode::kMean ? 1.0 / (static_cast<double>(bx) * by) : 1.0;
    for (int r = 0; r < target; ++r) {
        for (int c = 0; c < target; ++c) {
            double s = 0.0;
            for (int i = 0; i < by; ++i) {
                for (int j = 0; j < bx; ++j) {
                    s += map.at(r * by + i, c * bx + j);
                }
            }
            out.at(r, c) = static_cast<float>(s * norm);
        }
    }
    return out;
}

LabelMap crop_map(const LabelMap& map, int x0, int y0, int width, int height) {
    if (width <= 0 || height <= 0 || x0 < 0 || y0 < 0 || x0 + width > map.width ||
        y0 + height > map.height) {
        throw DataError("crop_map: rectangle out of bounds");
    }
    LabelMap out;
    out.kind = map.kind;
    out.width = width;
    out.height = height;
    out.values.resize(static_cast<std::size_t>(width) * height);
    for (int r = 0; r < height; ++r) {
        std::memcpy(out.values.data() + static_cast<std::size_t>(r) * width,
                    map.values.data() + (static_cast<std::size_t>(y0 + r) * map.width + x0),
                    static_cast<std::size_t>(width) * sizeof(float));
    }
    return out;
}

void export_png(const LabelMap& map, const std::filesystem::path& path, PngScale scale) {
    if (map.values.empty()) throw DataError("export_png: empty map");
    for (float v : map.values) {
        if (!std::isfinite(v)) throw DataError("export_png: map contains non-finite values");
    }
    std::vector<double> shown(map.values.begin(), map.values.end());
    if (scale == PngScale::kLog) {
        for (double& v : shown) v = std::log1p(v);
    }
    const auto [mn_it, mx_it] = std::minmax_element(shown.begin(), shown.end());
    const double mn = *mn_it, mx = *mx_it;
    const double range = mx - mn;

    std::vector<std::uint8_t> pixels(shown.size());
    if (range <= 0.0) {
        std::fill(pixels.begin(), pixels.end(), std::uint8_t{0});
    } else {
        for (std::size_t i = 0; i < shown.size(); ++i) {
            const double t = (shown[i] - mn) / range * 255.0;
            pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 255.0)));
        }
    }
    write_png_gray8(path, map.width, map.height, pixels);
}

void write_lmap(const LabelMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write lmap: " + path.string());
    out.write(kLmapMagic, 4);
    const std::uint8_t version = kLmapVersion;
    const std::uint8_t kind = static_cast<std::uint8_t>(map.kind);
    const std::uint16_t reserved = 0;
    const std::uint32_t w = static_cast<std::uint32_t>(map.width);
    const std::uint32_t h = static_cast<std::uint32_t>(map.height);
    out.write(reinterpret_cast<const char*>(&version), 1);
    out.write(reinterpret_cast<const char*>(&kind), 1);
    out.write(reinterpret_cast<const char*>(&reserved), 2);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    out.write(reinterpret_cast<const char*>(map.values.data()),
              static_cast<std::streamsize>(map.values.size() * sizeof(float)));
    if (!out) throw IoError("lmap write failed: " + path.string());
}

LabelMap read_lmap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open lmap: " + path.string());
    char magic[4];
    std::uint8_t version = 0, kind = 0;
    std::uint16_t reserved = 0;
    std::uint32_t w = 0, h = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 1);
    in.read(reinterpret_cast<char*>(&kind), 1);
    in.read(reinterpret_cast<char*>(&reserved), 2);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || std::memcmp(magic, kLmapMagic, 4) != 0) {
        throw DataError("not an lmap file: " + path.string());
    }
    if (version != kLmapVersion) throw DataError("unsupported lmap version");
    if (kind > 2) throw DataError("unknown lmap kind");
    LabelMap map;
    map.kind = static_cast<MapKind>(kind);
    map.width = static_cast<int>(w);
    map.height = static_cast<int>(h);
    map.values.resize(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(map.values.data()),
            static_cast<std::streamsize>(map.values.size() * sizeof(float)));
    if (!in) throw DataError("truncated lmap file: " + path.string());
    return map;
}

}  // namespace mud
