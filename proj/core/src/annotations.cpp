#include "mud/annotations.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mud {

namespace {

std::string strip(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_real(const std::string& text, double& out) {
    const std::string t = strip(text);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string format_real(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace

AnnotationSet parse_annotations(const std::string& csv_text, int image_width, int image_height,
                                const std::string& origin) {
    if (image_width <= 0 || image_height <= 0) {
        throw DataError("image dimensions must be positive");
    }
    AnnotationSet set;
    set.image_width = image_width;
    set.image_height = image_height;

    std::istringstream in(csv_text);
    std::string line;
    int row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = strip(line);
        if (t.empty()) continue;
        if (first) {
            first = false;
            // Optional header: exactly "x,y" ignoring whitespace/case.
            std::string lowered = t;
            std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            lowered.erase(std::remove_if(lowered.begin(), lowered.end(),
                                         [](unsigned char c) { return std::isspace(c); }),
                          lowered.end());
            if (lowered == "x,y") continue;
        }
        ++row;
        const auto comma = t.find(',');
        if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos) {
            throw DataError(origin + ": malformed row " + std::to_string(row) +
                            " (expected \"x,y\")");
        }
        Point p;
        if (!parse_real(t.substr(0, comma), p.x) || !parse_real(t.substr(comma + 1), p.y)) {
            throw DataError(origin + ": non-numeric value at row " + std::to_string(row));
        }
        if (!(p.x >= 0.0 && p.x < image_width && p.y >= 0.0 && p.y < image_height)) {
            throw DataError(origin + ": head out of bounds at row " + std::to_string(row));
        }
        set.heads.push_back(p);
    }
    return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path, int image_width,
                               int image_height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open annotation file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_annotations(buf.str(), image_width, image_height, path.string());
}

std::string annotations_to_csv(const AnnotationSet& set) {
    std::string out = "x,y\n";
    for (const Point& p : set.heads) {
        out += format_real(p.x);
        out += ',';
        out += format_real(p.y);
        out += '\n';
    }
    return out;
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write annotation file: " + path.string());
    out << annotations_to_csv(set);
    if (!out) throw IoError("write failed: " + path.string());
}

DatasetStats dataset_stats(const std::vector<AnnotationSet>& sets) {
    if (sets.empty()) throw DataError("dataset_stats: empty dataset");
    DatasetStats stats;
    stats.images = static_cast<int>(sets.size());
    double h_sum = 0.0, w_sum = 0.0;
    for (const AnnotationSet& s : sets) {
        stats.total_count += s.count();
        stats.max_count = std::max(stats.max_count, s.count());
        h_sum += s.image_height;
        w_sum += s.image_width;
    }
    stats.mean_count = static_cast<double>(stats.total_count) / stats.images;
    stats.mean_height = h_sum / stats.images;
    stats.mean_width = w_sum / stats.images;
    return stats;
}

}  // namespace mud
