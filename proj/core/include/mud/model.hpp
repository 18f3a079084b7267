#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mud/autodiff.hpp"
#include "mud/checkpoint.hpp"
#include "mud/label_maps.hpp"
#include "mud/tensor.hpp"

namespace mud {

/// Input patch edge; every map module upsamples back to this resolution.
constexpr int kPatchSize = 224;
/// Number of map modules (one per backbone stage).
constexpr int kNumMapModules = 3;
/// Upsampling factor of map module j; also the total downsampling of the
/// matching backbone stage (224 -> 28 / 14 / 7).
constexpr std::array<int, kNumMapModules> kMapStrides = {8, 16, 32};

/// Backbone stage widths. The desk-scale default keeps the network small
/// enough to train on a single CPU core; paper_scale() reproduces the
/// published stage widths (128, 256, 896) with densely concatenated
/// growth convolutions inside each block.
struct BackboneConfig {
    int c1 = 16;
    int c2 = 32;
    int c3 = 64;
    bool dense_blocks = false;
    int growth = 32;

    static BackboneConfig desk() { return {}; }
    static BackboneConfig paper_scale() { return {128, 256, 896, true, 32}; }

    int stage_channels(int stage_index) const {  // 0-based
        return stage_index == 0 ? c1 : stage_index == 1 ? c2 : c3;
    }
};

struct ModelConfig {
    BackboneConfig backbone;
    std::uint64_t init_seed = 1;
};

template <typename T>
struct PredictionGraphT {
    std::array<Var<T>, kNumMapModules> maps;    // each (1,224,224), no activation
    std::array<Var<T>, kNumMapModules> counts;  // each (1)
    Var<T> end_count;                           // (1)
    Var<T> final_count;                         // (1): mean of all four counts
};

template <typename T>
struct PredictionResultT {
    std::array<TensorT<T>, kNumMapModules> maps;  // each (224,224)
    std::array<double, kNumMapModules> counts;
    double end_count = 0.0;
    double final_count = 0.0;
};
using PredictionResult = PredictionResultT<float>;

template <typename T>
struct LossGraphT {
    Var<T> total;       // map_loss + count_loss
    Var<T> map_loss;    // sum over modules of MSE against the pooled label
    Var<T> count_loss;  // squared error of the averaged count
};

struct LossValues {
    double total = 0.0;
    double map_loss = 0.0;
    double count_loss = 0.0;
};

/// Multi-scale counting network: a three-stage downsampling backbone, one
/// transposed-convolution map module per stage (each emitting a full
/// resolution density estimate plus a count read off that map), and a
/// global-average-pool count head on the deepest stage. The final count
/// averages all four estimates.
template <typename T>
class ModelT {
public:
    explicit ModelT(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    const std::vector<std::pair<std::string, Var<T>>>& named_parameters() const {
        return params_;
    }
    std::vector<Var<T>> parameters() const;
    std::size_t parameter_count() const;

    /// patch: (3,224,224) in [0,1]. Returns the three stage feature maps
    /// (c1,28,28), (c2,14,14), (c3,7,7).
    std::array<Var<T>, kNumMapModules> backbone_forward(const Var<T>& patch) const;

    /// features must come from the matching stage (module_index 0-based);
    /// checks channel count and spatial size. Returns (map, count).
    std::pair<Var<T>, Var<T>> map_module_forward(const Var<T>& features,
                                                 int module_index) const;

    /// Count head on the deepest stage: global average pool + affine.
    Var<T> end_count_forward(const Var<T>& deepest) const;

    PredictionGraphT<T> forward(const Var<T>& patch) const;

    /// Convenience forward on raw values.
    PredictionResultT<T> predict(const TensorT<T>& patch) const;

    /// Float32 snapshot of all parameters, insertion order.
    NamedTensors state() const;
    /// Strict load: every parameter must be present with matching shape.
    void load_state(const NamedTensors& tensors);

private:
    const Var<T>& p(const std::string& name) const;

    ModelConfig config_;
    std::vector<std::pair<std::string, Var<T>>> params_;
    std::map<std::string, std::size_t> index_;
};

using Model = ModelT<float>;

/// Per-module map losses use the label pooled to the predicted map's
/// resolution divided by (224 / label resolution) blocks: density labels
/// pool by sum (count preserving), nearest-neighbor labels by mean.
/// truth_map: (R,R) with R dividing 224. truth_count: heads in the patch.
template <typename T>
LossGraphT<T> compute_loss(const PredictionGraphT<T>& pred, const TensorT<T>& truth_map,
                           double truth_count, MapKind kind);

template <typename T>
LossValues loss_values(const LossGraphT<T>& loss);

/// Rebuilds the same architecture in another precision, copying values.
template <typename U, typename T>
ModelT<U> cast_model(const ModelT<T>& model) {
    ModelT<U> out(model.config());
    const auto& src = model.named_parameters();
    const auto& dst = out.named_parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i].second->value = src[i].second->value.template cast<U>();
    }
    return out;
}

}  // namespace mud
