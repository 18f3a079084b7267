#include "mud/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mud/error.hpp"

namespace mud {
namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string trimmed_number(double v) {
    std::ostringstream out;
    out << v;  // default precision strips trailing zeros for config-style values
    return out.str();
}

TrainConfig apply_axis(TrainConfig config, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::kBeta:
            config.label_kind = MapKind::kDensity;
            config.map.beta = value;
            break;
        case SweepAxis::kK:
            config.label_kind = MapKind::kIknn;
            config.map.k = static_cast<int>(std::llround(value));
            if (config.map.k < 1) throw DataError("k values must be >= 1");
            break;
        case SweepAxis::kResolution:
            config.map.label_resolution = static_cast<int>(std::llround(value));
            break;
    }
    return config;
}

}  // namespace

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "beta") return SweepAxis::kBeta;
    if (name == "k") return SweepAxis::kK;
    if (name == "resolution") return SweepAxis::kResolution;
    throw DataError("unknown sweep axis: " + name + " (expected beta, k, or resolution)");
}

std::string method_label(const TrainConfig& config) {
    std::string name;
    if (config.label_kind == MapKind::kDensity) {
        name = "MUD-density-b" + trimmed_number(config.map.beta);
    } else {
        name = "MUD-i" + std::to_string(config.map.k) + "NN";
    }
    if (config.map.label_resolution != kPatchSize) {
        name += "-r" + std::to_string(config.map.label_resolution);
    }
    return name;
}

std::vector<SweepRow> ablation_sweep(const std::vector<ImageExample>& train_set,
                                     const std::vector<ImageExample>& test_set,
                                     const TrainConfig& base, SweepAxis axis,
                                     const std::vector<double>& values,
                                     const std::vector<std::uint64_t>& seeds) {
    if (values.empty()) throw DataError("sweep needs at least one value");
    if (seeds.empty()) throw DataError("sweep needs at least one seed");

    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (double value : values) {
        const TrainConfig config = apply_axis(base, axis, value);
        std::vector<double> mae, nae, rmse;
        for (std::uint64_t seed : seeds) {
            TrainConfig run = config;
            run.seed = seed;
            auto [model, result] = train_new(train_set, run);
            const MetricsReport report = evaluate_model(model, test_set);
            mae.push_back(report.mae);
            nae.push_back(report.nae);
            rmse.push_back(report.rmse);
        }
        SweepRow row;
        row.method = method_label(config);
        row.value = value;
        row.metrics.images = static_cast<int>(test_set.size());
        row.metrics.mae = median(mae);
        row.metrics.nae = median(nae);
        row.metrics.rmse = median(rmse);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::vector<std::pair<std::string, MetricsReport>> labeled;
    labeled.reserve(rows.size());
    for (const auto& row : rows) labeled.emplace_back(row.method, row.metrics);
    return metrics_csv(labeled);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << sweep_csv(rows);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mud
