#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mud/tensor.hpp"

namespace mud {

/// 8-bit grayscale PNG, row-major pixels, size width*height.
void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels);

/// 8-bit RGB PNG, interleaved rows, size width*height*3.
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);

/// Reads a PNG into a (3, H, W) float tensor scaled to [0, 1]. Grayscale,
/// palette, and alpha inputs are expanded/flattened to RGB.
Tensor read_png_rgb(const std::filesystem::path& path);

/// Header-only width/height discovery.
std::pair<int, int> read_png_size(const std::filesystem::path& path);

}  // namespace mud
