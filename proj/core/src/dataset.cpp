#include "mud/dataset.hpp"

#include <algorithm>

#include "mud/error.hpp"
#include "mud/png_io.hpp"

namespace mud {
namespace {

struct PairedFiles {
    std::string stem;
    std::filesystem::path png;
    std::filesystem::path csv;
};

std::vector<PairedFiles> paired_files(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> pngs, csvs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".png") pngs.push_back(entry.path());
        else if (ext == ".csv") csvs.push_back(entry.path());
    }
    auto by_stem = [](const auto& a, const auto& b) { return a.stem() < b.stem(); };
    std::sort(pngs.begin(), pngs.end(), by_stem);
    std::sort(csvs.begin(), csvs.end(), by_stem);

    std::vector<PairedFiles> pairs;
    std::size_t ci = 0;
    for (const auto& png : pngs) {
        const auto stem = png.stem().string();
        while (ci < csvs.size() && csvs[ci].stem() < png.stem()) {
            throw DataError("annotations without image: " + csvs[ci].string());
        }
        if (ci >= csvs.size() || csvs[ci].stem() != png.stem()) {
            throw DataError("image without annotations: " + png.string());
        }
        pairs.push_back({stem, png, csvs[ci++]});
    }
    if (ci < csvs.size()) {
        throw DataError("annotations without image: " + csvs[ci].string());
    }
    if (pairs.empty()) throw DataError("no image/annotation pairs in " + dir.string());
    return pairs;
}

}  // namespace

std::vector<ImageExample> load_dataset(const std::filesystem::path& dir) {
    std::vector<ImageExample> out;
    for (const auto& pair : paired_files(dir)) {
        ImageExample ex;
        ex.stem = pair.stem;
        ex.image = read_png_rgb(pair.png);
        ex.ann = load_annotations(pair.csv, ex.image.shape()[2], ex.image.shape()[1]);
        out.push_back(std::move(ex));
    }
    return out;
}

DatasetStats dataset_dir_stats(const std::filesystem::path& dir) {
    std::vector<AnnotationSet> sets;
    for (const auto& pair : paired_files(dir)) {
        const auto [width, height] = read_png_size(pair.png);
        sets.push_back(load_annotations(pair.csv, width, height));
    }
    return dataset_stats(sets);
}

}  // namespace mud
