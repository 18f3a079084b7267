#include "mud/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mud/error.hpp"

namespace mud {

MetricsReport compute_metrics(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.empty()) throw DataError("metrics need at least one (truth, prediction) pair");
    MetricsReport r;
    r.images = static_cast<int>(pairs.size());
    double abs_sum = 0.0, sq_sum = 0.0, rel_sum = 0.0;
    int rel_n = 0;
    for (const auto& [truth, pred] : pairs) {
        const double err = std::fabs(pred - truth);
        abs_sum += err;
        sq_sum += err * err;
        if (truth > 0.0) {
            rel_sum += err / truth;
            ++rel_n;
        } else {
            ++r.nae_excluded;
        }
    }
    const double n = static_cast<double>(r.images);
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);
    r.nae = rel_n > 0 ? rel_sum / static_cast<double>(rel_n) : 0.0;
    return r;
}

std::string metrics_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::ostringstream out;
    out << "method,mae,nae,rmse\n";
    out.precision(10);
    for (const auto& [method, r] : rows) {
        out << method << "," << r.mae << "," << r.nae << "," << r.rmse << "\n";
    }
    return out.str();
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << metrics_csv(rows);
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace mud
