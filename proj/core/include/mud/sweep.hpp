#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mud/metrics.hpp"
#include "mud/trainer.hpp"

namespace mud {

enum class SweepAxis { kBeta, kK, kResolution };

SweepAxis sweep_axis_from_name(const std::string& name);

struct SweepRow {
    std::string method;
    double value = 0.0;
    MetricsReport metrics;  // per-metric median over the seed set
};

/// One train+eval run per (value, seed): the beta axis trains density-map
/// labels with that kernel scale, the k axis trains ikNN labels with that
/// neighbor count, and the resolution axis trains the base labeling at
/// that label resolution. Each row reports the per-metric median over the
/// seeds.
std::vector<SweepRow> ablation_sweep(const std::vector<ImageExample>& train_set,
                                     const std::vector<ImageExample>& test_set,
                                     const TrainConfig& base, SweepAxis axis,
                                     const std::vector<double>& values,
                                     const std::vector<std::uint64_t>& seeds);

/// Rows as CSV with header "method,mae,nae,rmse".
std::string sweep_csv(const std::vector<SweepRow>& rows);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

/// Row label for a run, e.g. "MUD-i1NN", "MUD-density-b0.3", "MUD-i1NN-r28"
/// (the resolution suffix appears when it differs from the default 224).
std::string method_label(const TrainConfig& config);

}  // namespace mud
