#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mud {

struct MetricsReport {
    int images = 0;
    double mae = 0.0;
    /// Mean of |pred - truth| / truth over images with truth > 0; images
    /// with truth == 0 are skipped and counted in nae_excluded.
    double nae = 0.0;
    int nae_excluded = 0;
    double rmse = 0.0;
};

/// pairs: (true count, predicted count) per image. Throws on empty input.
MetricsReport compute_metrics(const std::vector<std::pair<double, double>>& pairs);

/// CSV with header "method,mae,nae,rmse", one row per labeled report.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, MetricsReport>>& rows);
std::string metrics_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace mud
