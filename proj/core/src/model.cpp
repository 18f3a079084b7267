#include "mud/model.hpp"

#include <cmath>
#include <random>

#include "mud/error.hpp"

namespace mud {
namespace {

// Stage 1 reaches its width over three halving blocks; wide configurations
// ramp up to keep the early high-resolution convolutions affordable.
std::array<int, 3> stage1_widths(const BackboneConfig& b) {
    if (b.c1 <= 32) return {b.c1, b.c1, b.c1};
    return {b.c1 / 4, b.c1 / 2, b.c1};
}

template <typename T>
void check_chw(const Var<T>& x, int c, int h, int w, const std::string& what) {
    const auto& s = x->value.shape();
    if (s.size() != 3 || s[0] != c || s[1] != h || s[2] != w) {
        throw DataError(what + " expects (" + std::to_string(c) + "x" + std::to_string(h) +
                        "x" + std::to_string(w) + "), got " + x->value.shape_string());
    }
}

}  // namespace

template <typename T>
ModelT<T>::ModelT(const ModelConfig& config) : config_(config) {
    const BackboneConfig& bb = config.backbone;
    if (bb.c1 < 1 || bb.c2 < 1 || bb.c3 < 1 || (bb.dense_blocks && bb.growth < 1)) {
        throw DataError("backbone widths must be positive");
    }
    std::mt19937_64 rng(config.init_seed);
    // Weights draw from He-style uniform (+-sqrt(6/fan_in)); biases start at
    // zero. Draws happen in double in declaration order so float and double
    // instantiations of the same seed carry the same values.
    auto add = [&](const std::string& name, std::vector<int> shape, int fan_in) {
        TensorT<T> t(std::move(shape));
        if (fan_in > 0) {
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : t.values()) v = static_cast<T>(dist(rng));
        }
        index_[name] = params_.size();
        params_.emplace_back(name, parameter(std::move(t)));
    };
    auto add_conv = [&](const std::string& prefix, int o, int c, int kh, int kw) {
        add(prefix + ".w", {o, c, kh, kw}, c * kh * kw);
        add(prefix + ".b", {o}, 0);
    };
    auto add_block = [&](const std::string& prefix, int in_ch, int out_ch) {
        if (bb.dense_blocks) {
            add_conv(prefix + ".grow1", bb.growth, in_ch, 1, 1);
            add_conv(prefix + ".grow2", bb.growth, in_ch + bb.growth, 1, 1);
            add_conv(prefix + ".down", out_ch, in_ch + 2 * bb.growth, 2, 2);
        } else {
            add_conv(prefix + ".mix", out_ch, in_ch, 1, 1);
            add_conv(prefix + ".down", out_ch, out_ch, 2, 2);
        }
    };

    const auto w1 = stage1_widths(bb);
    int in_ch = 3;
    for (int b = 0; b < 3; ++b) {
        add_block("backbone.s1.b" + std::to_string(b + 1), in_ch, w1[b]);
        in_ch = w1[b];
    }
    add_block("backbone.s2.b1", in_ch, bb.c2);
    add_block("backbone.s3.b1", bb.c2, bb.c3);

    for (int j = 0; j < kNumMapModules; ++j) {
        const std::string pre = "map" + std::to_string(j + 1);
        const int s = kMapStrides[j];
        const int c = bb.stage_channels(j);
        // Transposed-conv kernel (in_ch, 1, s, s); each output pixel sums
        // over in_ch contributions, so that is the fan-in. No bias: the map
        // output stays a plain linear read of the features.
        add(pre + ".up.w", {c, 1, s, s}, c);
        add_conv(pre + ".c1", 8, 1, 2, 2);
        add_conv(pre + ".c2", 16, 8, 2, 2);
        add_conv(pre + ".c3", 32, 16, 2, 2);
        add_conv(pre + ".c4", 1, 32, 28, 28);
    }
    add("end.w", {1, bb.c3}, bb.c3);
    add("end.b", {1}, 0);
}

template <typename T>
const Var<T>& ModelT<T>::p(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return params_[it->second].second;
}

template <typename T>
std::vector<Var<T>> ModelT<T>::parameters() const {
    std::vector<Var<T>> out;
    out.reserve(params_.size());
    for (const auto& [name, var] : params_) out.push_back(var);
    return out;
}

template <typename T>
std::size_t ModelT<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, var] : params_) n += var->value.size();
    return n;
}

template <typename T>
std::array<Var<T>, kNumMapModules> ModelT<T>::backbone_forward(const Var<T>& patch) const {
    check_chw(patch, 3, kPatchSize, kPatchSize, "backbone");
    const BackboneConfig& bb = config_.backbone;
    auto block = [this, &bb](Var<T> x, const std::string& prefix) {
        if (bb.dense_blocks) {
            auto y1 = leaky_relu(
                conv2d(x, p(prefix + ".grow1.w"), p(prefix + ".grow1.b"), 1));
            auto cat1 = concat_channels<T>({x, y1});
            auto y2 = leaky_relu(
                conv2d(cat1, p(prefix + ".grow2.w"), p(prefix + ".grow2.b"), 1));
            auto cat2 = concat_channels<T>({x, y1, y2});
            return leaky_relu(conv2d(cat2, p(prefix + ".down.w"), p(prefix + ".down.b"), 2));
        }
        auto mixed = leaky_relu(conv2d(x, p(prefix + ".mix.w"), p(prefix + ".mix.b"), 1));
        return leaky_relu(conv2d(mixed, p(prefix + ".down.w"), p(prefix + ".down.b"), 2));
    };

    std::array<Var<T>, kNumMapModules> stages;
    Var<T> x = patch;
    for (int b = 1; b <= 3; ++b) x = block(x, "backbone.s1.b" + std::to_string(b));
    stages[0] = x;
    stages[1] = block(stages[0], "backbone.s2.b1");
    stages[2] = block(stages[1], "backbone.s3.b1");
    return stages;
}

template <typename T>
std::pair<Var<T>, Var<T>> ModelT<T>::map_module_forward(const Var<T>& features,
                                                        int module_index) const {
    if (module_index < 0 || module_index >= kNumMapModules) {
        throw DataError("map module index out of range: " + std::to_string(module_index));
    }
    const int s = kMapStrides[module_index];
    const int side = kPatchSize / s;
    check_chw(features, config_.backbone.stage_channels(module_index), side, side,
              "map module " + std::to_string(module_index + 1));
    const std::string pre = "map" + std::to_string(module_index + 1);

    auto map = transposed_conv2d(features, p(pre + ".up.w"), s);
    auto h = leaky_relu(conv2d(map, p(pre + ".c1.w"), p(pre + ".c1.b"), 2));
    h = leaky_relu(conv2d(h, p(pre + ".c2.w"), p(pre + ".c2.b"), 2));
    h = leaky_relu(conv2d(h, p(pre + ".c3.w"), p(pre + ".c3.b"), 2));
    auto count = reshape(conv2d(h, p(pre + ".c4.w"), p(pre + ".c4.b"), 1), {1});
    return {map, count};
}

template <typename T>
Var<T> ModelT<T>::end_count_forward(const Var<T>& deepest) const {
    check_chw(deepest, config_.backbone.c3, kPatchSize / kMapStrides[2],
              kPatchSize / kMapStrides[2], "end count head");
    return affine(global_avg_pool(deepest), p("end.w"), p("end.b"));
}

template <typename T>
PredictionGraphT<T> ModelT<T>::forward(const Var<T>& patch) const {
    PredictionGraphT<T> out;
    const auto stages = backbone_forward(patch);
    for (int j = 0; j < kNumMapModules; ++j) {
        auto [map, count] = map_module_forward(stages[j], j);
        out.maps[j] = map;
        out.counts[j] = count;
    }
    out.end_count = end_count_forward(stages[2]);
    auto total = add(add(add(out.end_count, out.counts[0]), out.counts[1]), out.counts[2]);
    out.final_count = scale(total, T{1} / T(kNumMapModules + 1));
    return out;
}

template <typename T>
PredictionResultT<T> ModelT<T>::predict(const TensorT<T>& patch) const {
    const auto graph = forward(constant(patch));
    PredictionResultT<T> out;
    for (int j = 0; j < kNumMapModules; ++j) {
        out.maps[j] = TensorT<T>({kPatchSize, kPatchSize}, graph.maps[j]->value.values());
        out.counts[j] = static_cast<double>(graph.counts[j]->value.data()[0]);
    }
    out.end_count = static_cast<double>(graph.end_count->value.data()[0]);
    out.final_count = static_cast<double>(graph.final_count->value.data()[0]);
    return out;
}

template <typename T>
NamedTensors ModelT<T>::state() const {
    NamedTensors out;
    out.reserve(params_.size());
    for (const auto& [name, var] : params_) {
        out.emplace_back(name, var->value.template cast<float>());
    }
    return out;
}

template <typename T>
void ModelT<T>::load_state(const NamedTensors& tensors) {
    if (tensors.size() != params_.size()) {
        throw DataError("checkpoint holds " + std::to_string(tensors.size()) +
                        " tensors, model has " + std::to_string(params_.size()));
    }
    for (const auto& [name, tensor] : tensors) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw DataError("checkpoint tensor does not match any parameter: " + name);
        }
        auto& var = params_[it->second].second;
        if (tensor.shape() != var->value.shape()) {
            throw DataError("shape mismatch for " + name + ": checkpoint " +
                            tensor.shape_string() + ", model " + var->value.shape_string());
        }
        var->value = tensor.template cast<T>();
    }
}

template <typename T>
LossGraphT<T> compute_loss(const PredictionGraphT<T>& pred, const TensorT<T>& truth_map,
                           double truth_count, MapKind kind) {
    std::vector<int> shape = truth_map.shape();
    if (shape.size() == 2) shape = {1, shape[0], shape[1]};
    if (shape.size() != 3 || shape[0] != 1 || shape[1] != shape[2]) {
        throw DataError("truth map must be square single-channel, got " +
                        truth_map.shape_string());
    }
    const int res = shape[1];
    if (res < 1 || kPatchSize % res != 0) {
        throw DataError("label resolution " + std::to_string(res) + " does not divide " +
                        std::to_string(kPatchSize));
    }
    const int block = kPatchSize / res;
    auto truth = constant(TensorT<T>(shape, truth_map.values()));

    LossGraphT<T> out;
    for (int j = 0; j < kNumMapModules; ++j) {
        Var<T> predicted = pred.maps[j];
        if (block > 1) {
            // Density labels carry counts, so blocks pool by sum; the
            // nearest-neighbor label family pools by mean.
            predicted = kind == MapKind::kDensity ? sum_pool2d(predicted, block)
                                                  : mean_pool2d(predicted, block);
        }
        auto term = mse(predicted, truth);
        out.map_loss = j == 0 ? term : add(out.map_loss, term);
    }
    out.count_loss = mse(pred.final_count,
                         constant(TensorT<T>::scalar(static_cast<T>(truth_count))));
    out.total = add(out.map_loss, out.count_loss);
    return out;
}

template <typename T>
LossValues loss_values(const LossGraphT<T>& loss) {
    LossValues v;
    v.total = static_cast<double>(loss.total->value.data()[0]);
    v.map_loss = static_cast<double>(loss.map_loss->value.data()[0]);
    v.count_loss = static_cast<double>(loss.count_loss->value.data()[0]);
    return v;
}

template class ModelT<float>;
template class ModelT<double>;
template LossGraphT<float> compute_loss<float>(const PredictionGraphT<float>&,
                                               const TensorT<float>&, double, MapKind);
template LossGraphT<double> compute_loss<double>(const PredictionGraphT<double>&,
                                                 const TensorT<double>&, double, MapKind);
template LossValues loss_values<float>(const LossGraphT<float>&);
template LossValues loss_values<double>(const LossGraphT<double>&);

}  // namespace mud
