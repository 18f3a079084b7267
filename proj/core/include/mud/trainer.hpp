#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "mud/dataset.hpp"
#include "mud/label_maps.hpp"
#include "mud/metrics.hpp"
#include "mud/model.hpp"

namespace mud {

/// Full recipe for one training run. The seed fixes initialization, epoch
/// shuffles, and crop sampling, so a run is deterministic given the data.
struct EpochLoss {
    int epoch = 0;       // 1-based
    double total = 0.0;  // means over the epoch's examples
    double map_loss = 0.0;
    double count_loss = 0.0;
};

struct TrainConfig {
    MapKind label_kind = MapKind::kIknn;  // kDensity or kIknn
    MapConfig map;                        // k / beta / sigma mode / label resolution
    int epochs = 10;
    int batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    BackboneConfig backbone;
    // Progress hook, invoked after each epoch; not part of the recipe.
    std::function<void(const EpochLoss&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochLoss> history;
};

/// Trains in place. Ground-truth maps are generated once per image at full
/// resolution; each step crops a random 224 window of image and map, pools
/// the label to the configured resolution, and regresses map and count.
/// Throws NumericError when the loss stops being finite.
TrainResult train(Model& model, const std::vector<ImageExample>& dataset,
                  const TrainConfig& config);

/// Builds a model seeded from config.seed and trains it.
std::pair<Model, TrainResult> train_new(const std::vector<ImageExample>& dataset,
                                        const TrainConfig& config);

/// CSV with header "epoch,L,L_m,L_c".
void write_loss_history_csv(const std::filesystem::path& path,
                            const std::vector<EpochLoss>& history);

/// Weights at `path` plus the run configuration as key=value text at
/// `path` with extension ".cfg".
void save_run(const std::filesystem::path& path, const Model& model,
              const TrainConfig& config);
std::pair<Model, TrainConfig> load_run(const std::filesystem::path& path);

/// Sliding-window evaluation of a trained model over a labeled set;
/// pairs each image's head count with the predicted count.
MetricsReport evaluate_model(const Model& model, const std::vector<ImageExample>& dataset,
                             int step = 128);

/// Ground truth map for one image under the configured labeling.
LabelMap training_label(const AnnotationSet& ann, const TrainConfig& config);

}  // namespace mud
