#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mud/label_maps.hpp"
#include "mud/tensor.hpp"

namespace mud {

/// One window's output: the predicted map at patch resolution plus the
/// patch count estimate.
struct PatchPrediction {
    Tensor map;  // (patch, patch)
    double count = 0.0;
};

/// Runs the model (or any stand-in) on one (3,patch,patch) tensor.
using PatchPredictor = std::function<PatchPrediction(const Tensor&)>;

/// Window origins along one axis: 0, step, 2*step, ... with the final
/// origin clamped to dim - patch so coverage is complete without running
/// past the edge. Duplicates collapse. Requires dim >= patch.
std::vector<int> window_offsets(int dim, int patch, int step);

/// All (x, y) window origins for an image, row-major order.
std::vector<std::pair<int, int>> window_origins(int width, int height, int patch = 224,
                                                int step = 128);

struct ImagePrediction {
    LabelMap map;       // overlap-averaged predicted map, image sized
    double count = 0.0; // spread-and-average aggregate over all windows
};

/// Tiles the image with overlapping windows, averaging per-pixel map
/// values where windows overlap. Each window's count is spread uniformly
/// over its pixels, overlaps are averaged the same way, and the total is
/// the sum of the averaged count density. Images smaller than the patch
/// are reflect-padded up to patch size first.
ImagePrediction predict_image(const PatchPredictor& predictor, const Tensor& image,
                              int patch = 224, int step = 128);

/// Mirror padding (edge pixels included) up to at least min_h x min_w.
/// Returns the input unchanged when already large enough.
Tensor reflect_pad(const Tensor& image, int min_h, int min_w);

}  // namespace mud
