#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mud/error.hpp"

namespace mud {

/// One annotated head position, continuous (sub-pixel) image coordinates.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Head-point ground truth for one image.
///
/// Invariant: every head lies inside [0, width) x [0, height). Out-of-bounds
/// points are a hard load error; silently clamping them would corrupt the
/// nearest-neighbor distances derived from this set.
struct AnnotationSet {
    int image_width = 0;
    int image_height = 0;
    std::vector<Point> heads;

    int count() const { return static_cast<int>(heads.size()); }
};

struct DatasetStats {
    int images = 0;
    long long total_count = 0;
    double mean_count = 0.0;
    int max_count = 0;
    double mean_height = 0.0;
    double mean_width = 0.0;
};

/// Parses a head CSV: one "x,y" line per head, decimal reals, optional
/// single "x,y" header, LF or CRLF. Rows are validated against the image
/// bounds; errors name the offending data row (1-based, header excluded).
AnnotationSet load_annotations(const std::filesystem::path& path, int image_width,
                               int image_height);

/// Parses CSV content from a string (same grammar as load_annotations).
AnnotationSet parse_annotations(const std::string& csv_text, int image_width, int image_height,
                                const std::string& origin = "<string>");

/// Writes the "x,y" CSV with a header line. Coordinates are printed with
/// shortest round-trip formatting, so load(save(load(f))) is bit-exact.
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);
std::string annotations_to_csv(const AnnotationSet& set);

DatasetStats dataset_stats(const std::vector<AnnotationSet>& sets);

}  // namespace mud
