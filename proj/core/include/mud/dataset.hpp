#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mud/annotations.hpp"
#include "mud/tensor.hpp"

namespace mud {

/// One image with its head annotations.
struct ImageExample {
    std::string stem;
    Tensor image;  // (3,H,W), values in [0,1]
    AnnotationSet ann;
};

/// Loads every `stem.png` / `stem.csv` pair directly under `dir`, sorted by
/// stem. An image without annotations (or annotations without an image) is
/// an error, as is an empty directory.
std::vector<ImageExample> load_dataset(const std::filesystem::path& dir);

/// Annotation statistics for a dataset directory. Reads PNG headers only,
/// not pixel data.
DatasetStats dataset_dir_stats(const std::filesystem::path& dir);

}  // namespace mud
