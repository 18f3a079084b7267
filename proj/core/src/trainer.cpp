#include "mud/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mud/error.hpp"
#include "mud/inference.hpp"

namespace mud {
namespace {

MapKind checked_label_kind(MapKind kind) {
    if (kind != MapKind::kDensity && kind != MapKind::kIknn) {
        throw DataError("training labels must be density or iknn maps");
    }
    return kind;
}

Tensor crop_patch(const Tensor& image, int x0, int y0, int side) {
    const int H = image.dim(1), W = image.dim(2), C = image.dim(0);
    Tensor out({C, side, side});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < side; ++y) {
            const float* src = image.data() + (static_cast<std::size_t>(c) * H + y0 + y) * W + x0;
            std::copy_n(src, side, out.data() + (static_cast<std::size_t>(c) * side + y) * side);
        }
    }
    return out;
}

int heads_in_window(const AnnotationSet& ann, int x0, int y0, int side) {
    int n = 0;
    for (const auto& head : ann.heads) {
        if (head.x >= x0 && head.x < x0 + side && head.y >= y0 && head.y < y0 + side) ++n;
    }
    return n;
}

struct AdamState {
    std::vector<double> m, v;
};

}  // namespace

LabelMap training_label(const AnnotationSet& ann, const TrainConfig& config) {
    if (checked_label_kind(config.label_kind) == MapKind::kDensity) {
        return density_map(ann, config.map);
    }
    return iknn_map(ann, config.map.k);
}

TrainResult train(Model& model, const std::vector<ImageExample>& dataset,
                  const TrainConfig& config) {
    if (dataset.empty()) throw DataError("training dataset is empty");
    if (config.epochs < 1 || config.batch_size < 1) {
        throw DataError("epochs and batch size must be positive");
    }
    checked_label_kind(config.label_kind);
    const int res = config.map.label_resolution;
    if (res < 1 || kPatchSize % res != 0) {
        throw DataError("label resolution " + std::to_string(res) + " does not divide " +
                        std::to_string(kPatchSize));
    }
    for (const auto& ex : dataset) {
        if (ex.image.dim(1) < kPatchSize || ex.image.dim(2) < kPatchSize) {
            throw DataError("training image " + ex.stem + " smaller than " +
                            std::to_string(kPatchSize) + ": " + ex.image.shape_string());
        }
    }

    // Ground truth at native resolution, cropped per step.
    std::vector<LabelMap> full_maps;
    full_maps.reserve(dataset.size());
    for (const auto& ex : dataset) full_maps.push_back(training_label(ex.ann, config));
    const PoolMode pool =
        config.label_kind == MapKind::kDensity ? PoolMode::kSum : PoolMode::kMean;

    const auto params = model.parameters();
    std::vector<AdamState> adam(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam[i].m.assign(params[i]->value.size(), 0.0);
        adam[i].v.assign(params[i]->value.size(), 0.0);
    }
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    long long step_count = 0;

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        LossValues epoch_sum;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            zero_grads(params);
            for (std::size_t i = start; i < stop; ++i) {
                const ImageExample& ex = dataset[order[i]];
                const int max_x = ex.image.dim(2) - kPatchSize;
                const int max_y = ex.image.dim(1) - kPatchSize;
                const int x0 = max_x > 0
                    ? std::uniform_int_distribution<int>(0, max_x)(rng) : 0;
                const int y0 = max_y > 0
                    ? std::uniform_int_distribution<int>(0, max_y)(rng) : 0;

                const Tensor patch = crop_patch(ex.image, x0, y0, kPatchSize);
                LabelMap label = crop_map(full_maps[order[i]], x0, y0, kPatchSize, kPatchSize);
                if (res != kPatchSize) label = downsample_map(label, res, pool);
                const Tensor truth({res, res}, label.values);
                const double truth_count = heads_in_window(ex.ann, x0, y0, kPatchSize);

                const auto pred = model.forward(constant(patch));
                const auto loss = compute_loss(pred, truth, truth_count, config.label_kind);
                const LossValues values = loss_values(loss);
                if (!std::isfinite(values.total)) {
                    throw NumericError("loss is not finite at epoch " + std::to_string(epoch) +
                                       ", example " + ex.stem);
                }
                epoch_sum.total += values.total;
                epoch_sum.map_loss += values.map_loss;
                epoch_sum.count_loss += values.count_loss;
                backward(loss.total);
            }

            const double inv_batch = 1.0 / static_cast<double>(stop - start);
            ++step_count;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count));
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                float* w = params[pi]->value.data();
                const float* g = params[pi]->grad.data();
                auto& st = adam[pi];
                const std::size_t n = params[pi]->value.size();
                for (std::size_t i = 0; i < n; ++i) {
                    const double grad = static_cast<double>(g[i]) * inv_batch;
                    st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * grad;
                    st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * grad * grad;
                    const double update = (st.m[i] / bc1) /
                        (std::sqrt(st.v[i] / bc2) + kEps);
                    w[i] = static_cast<float>(static_cast<double>(w[i]) -
                                              config.learning_rate * update);
                }
            }
        }
        const double inv_n = 1.0 / static_cast<double>(order.size());
        result.history.push_back({epoch, epoch_sum.total * inv_n, epoch_sum.map_loss * inv_n,
                                  epoch_sum.count_loss * inv_n});
        if (config.on_epoch) config.on_epoch(result.history.back());
    }
    return result;
}

std::pair<Model, TrainResult> train_new(const std::vector<ImageExample>& dataset,
                                        const TrainConfig& config) {
    Model model(ModelConfig{config.backbone, config.seed});
    TrainResult result = train(model, dataset, config);
    return {std::move(model), std::move(result)};
}

void write_loss_history_csv(const std::filesystem::path& path,
                            const std::vector<EpochLoss>& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "epoch,L,L_m,L_c\n";
    out.precision(10);
    for (const auto& e : history) {
        out << e.epoch << "," << e.total << "," << e.map_loss << "," << e.count_loss << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void save_run(const std::filesystem::path& path, const Model& model,
              const TrainConfig& config) {
    write_checkpoint(path, model.state());
    std::ostringstream lr;
    lr.precision(17);
    lr << config.learning_rate;
    std::ostringstream beta;
    beta.precision(17);
    beta << config.map.beta;
    std::ostringstream fixed_sigma, fallback_sigma;
    fixed_sigma.precision(17);
    fixed_sigma << config.map.sigma_mode.fixed_sigma;
    fallback_sigma.precision(17);
    fallback_sigma << config.map.sigma_mode.fallback_sigma;

    std::filesystem::path cfg_path = path;
    cfg_path.replace_extension(".cfg");
    write_key_values(cfg_path, {
        {"backbone.c1", std::to_string(config.backbone.c1)},
        {"backbone.c2", std::to_string(config.backbone.c2)},
        {"backbone.c3", std::to_string(config.backbone.c3)},
        {"backbone.dense", config.backbone.dense_blocks ? "1" : "0"},
        {"backbone.growth", std::to_string(config.backbone.growth)},
        {"label.kind", map_kind_name(config.label_kind)},
        {"label.k", std::to_string(config.map.k)},
        {"label.beta", beta.str()},
        {"label.sigma_adaptive", config.map.sigma_mode.adaptive ? "1" : "0"},
        {"label.k_sigma", std::to_string(config.map.sigma_mode.k_sigma)},
        {"label.fixed_sigma", fixed_sigma.str()},
        {"label.fallback_sigma", fallback_sigma.str()},
        {"label.resolution", std::to_string(config.map.label_resolution)},
        {"train.epochs", std::to_string(config.epochs)},
        {"train.batch", std::to_string(config.batch_size)},
        {"train.lr", lr.str()},
        {"train.seed", std::to_string(config.seed)},
    });
}

std::pair<Model, TrainConfig> load_run(const std::filesystem::path& path) {
    std::filesystem::path cfg_path = path;
    cfg_path.replace_extension(".cfg");
    const auto kv = read_key_values(cfg_path);
    auto need = [&kv, &cfg_path](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) {
            throw DataError("missing key '" + key + "' in " + cfg_path.string());
        }
        return it->second;
    };

    TrainConfig config;
    config.backbone.c1 = std::stoi(need("backbone.c1"));
    config.backbone.c2 = std::stoi(need("backbone.c2"));
    config.backbone.c3 = std::stoi(need("backbone.c3"));
    config.backbone.dense_blocks = need("backbone.dense") == "1";
    config.backbone.growth = std::stoi(need("backbone.growth"));
    config.label_kind = map_kind_from_name(need("label.kind"));
    config.map.k = std::stoi(need("label.k"));
    config.map.beta = std::stod(need("label.beta"));
    config.map.sigma_mode.adaptive = need("label.sigma_adaptive") == "1";
    config.map.sigma_mode.k_sigma = std::stoi(need("label.k_sigma"));
    config.map.sigma_mode.fixed_sigma = std::stod(need("label.fixed_sigma"));
    config.map.sigma_mode.fallback_sigma = std::stod(need("label.fallback_sigma"));
    config.map.label_resolution = std::stoi(need("label.resolution"));
    config.epochs = std::stoi(need("train.epochs"));
    config.batch_size = std::stoi(need("train.batch"));
    config.learning_rate = std::stod(need("train.lr"));
    config.seed = std::stoull(need("train.seed"));

    Model model(ModelConfig{config.backbone, config.seed});
    model.load_state(read_checkpoint(path));
    return {std::move(model), config};
}

MetricsReport evaluate_model(const Model& model, const std::vector<ImageExample>& dataset,
                             int step) {
    if (dataset.empty()) throw DataError("evaluation dataset is empty");
    PatchPredictor predictor = [&model](const Tensor& patch) {
        const PredictionResult pred = model.predict(patch);
        // The image-level map blends the three module maps; they regress
        // the same label, and the blend matches the averaged count.
        Tensor map({kPatchSize, kPatchSize});
        for (std::size_t i = 0; i < map.size(); ++i) {
            map[i] = (pred.maps[0][i] + pred.maps[1][i] + pred.maps[2][i]) / 3.0f;
        }
        return PatchPrediction{std::move(map), pred.final_count};
    };
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(dataset.size());
    for (const auto& ex : dataset) {
        const auto prediction = predict_image(predictor, ex.image, kPatchSize, step);
        pairs.emplace_back(ex.ann.count(), prediction.count);
    }
    return compute_metrics(pairs);
}

}  // namespace mud
