#include "mud/inference.hpp"

#include <algorithm>
#include <cmath>

#include "mud/error.hpp"

namespace mud {

std::vector<int> window_offsets(int dim, int patch, int step) {
    if (patch < 1 || step < 1) throw DataError("window patch and step must be positive");
    if (dim < patch) {
        throw DataError("image extent " + std::to_string(dim) + " smaller than patch " +
                        std::to_string(patch) + "; pad the image first");
    }
    std::vector<int> offsets;
    for (int o = 0; o + patch < dim; o += step) offsets.push_back(o);
    offsets.push_back(dim - patch);  // clamped final window, full coverage
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    return offsets;
}

std::vector<std::pair<int, int>> window_origins(int width, int height, int patch, int step) {
    const auto xs = window_offsets(width, patch, step);
    const auto ys = window_offsets(height, patch, step);
    std::vector<std::pair<int, int>> origins;
    origins.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) origins.emplace_back(x, y);
    }
    return origins;
}

namespace {

// Mirror index into [0, n): ...2,1,0,0,1,2...n-1,n-1,n-2... (period 2n).
int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace

Tensor reflect_pad(const Tensor& image, int min_h, int min_w) {
    if (image.rank() != 3) {
        throw DataError("reflect_pad expects (C,H,W), got " + image.shape_string());
    }
    const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H >= min_h && W >= min_w) return image;
    const int Ho = std::max(H, min_h), Wo = std::max(W, min_w);
    // Center the original image so the mirrored border is split evenly.
    const int y0 = (Ho - H) / 2, x0 = (Wo - W) / 2;
    Tensor out({C, Ho, Wo});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < Ho; ++y) {
            const int sy = mirror(y - y0, H);
            for (int x = 0; x < Wo; ++x) {
                out.at(c, y, x) = image.at(c, sy, mirror(x - x0, W));
            }
        }
    }
    return out;
}

ImagePrediction predict_image(const PatchPredictor& predictor, const Tensor& image,
                              int patch, int step) {
    if (image.rank() != 3) {
        throw DataError("predict_image expects (C,H,W), got " + image.shape_string());
    }
    const int H = image.dim(1), W = image.dim(2);
    const Tensor padded = reflect_pad(image, patch, patch);
    const int Hp = padded.dim(1), Wp = padded.dim(2);
    const int C = padded.dim(0);
    // Offset of the original image inside the padded canvas (reflect_pad
    // centers it).
    const int oy = (Hp - H) / 2, ox = (Wp - W) / 2;

    std::vector<double> map_acc(static_cast<std::size_t>(Hp) * Wp, 0.0);
    std::vector<double> count_acc(map_acc.size(), 0.0);
    std::vector<std::uint32_t> cover(map_acc.size(), 0);

    Tensor window({C, patch, patch});
    for (const auto& [wx, wy] : window_origins(Wp, Hp, patch, step)) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < patch; ++y) {
                const float* src = padded.data() +
                    (static_cast<std::size_t>(c) * Hp + wy + y) * Wp + wx;
                std::copy_n(src, patch, window.data() +
                    (static_cast<std::size_t>(c) * patch + y) * patch);
            }
        }
        const PatchPrediction pred = predictor(window);
        if (pred.map.rank() != 2 || pred.map.dim(0) != patch || pred.map.dim(1) != patch) {
            throw DataError("patch predictor returned map of shape " +
                            pred.map.shape_string() + ", expected (" +
                            std::to_string(patch) + "x" + std::to_string(patch) + ")");
        }
        // The window's count spreads uniformly over its pixels so that
        // overlapping windows blend instead of double counting.
        const double density = pred.count / (static_cast<double>(patch) * patch);
        for (int y = 0; y < patch; ++y) {
            const std::size_t row = static_cast<std::size_t>(wy + y) * Wp + wx;
            const float* src = pred.map.data() + static_cast<std::size_t>(y) * patch;
            for (int x = 0; x < patch; ++x) {
                map_acc[row + x] += static_cast<double>(src[x]);
                count_acc[row + x] += density;
                ++cover[row + x];
            }
        }
    }

    ImagePrediction out;
    out.map.kind = MapKind::kDensity;
    out.map.width = W;
    out.map.height = H;
    out.map.values.resize(static_cast<std::size_t>(W) * H);
    double total = 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t i = static_cast<std::size_t>(oy + y) * Wp + (ox + x);
            const double n = static_cast<double>(cover[i]);
            out.map.values[static_cast<std::size_t>(y) * W + x] =
                static_cast<float>(map_acc[i] / n);
            total += count_acc[i] / n;
        }
    }
    out.count = total;
    return out;
}

}  // namespace mud
