#include "mud/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "mud/error.hpp"

namespace mud {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png8(const std::filesystem::path& path, int width, int height, int channels,
                const std::vector<std::uint8_t>& pixels) {
    if (width <= 0 || height <= 0) throw DataError("png: dimensions must be positive");
    const std::size_t expected =
        static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
        static_cast<std::size_t>(channels);
    if (pixels.size() != expected) throw DataError("png: pixel buffer size mismatch");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: failed to allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: failed to allocate info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    for (int y = 0; y < height; ++y) {
        png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * stride));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

}  // namespace

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
    write_png8(path, width, height, 1, pixels);
}

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
    write_png8(path, width, height, 3, pixels);
}

Tensor read_png_rgb(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open image: " + path.string());

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png: failed to allocate read struct");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png: failed to allocate info struct");
    if (setjmp(png_jmpbuf(r.png))) {
        throw IoError("png: decode failed: " + path.string());
    }
    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);

    const int width = static_cast<int>(png_get_image_width(r.png, r.info));
    const int height = static_cast<int>(png_get_image_height(r.png, r.info));
    const png_byte color_type = png_get_color_type(r.png, r.info);
    const png_byte bit_depth = png_get_bit_depth(r.png, r.info);

    if (bit_depth == 16) png_set_strip_16(r.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(r.png);
    }
    png_set_strip_alpha(r.png);
    png_read_update_info(r.png, r.info);

    const std::size_t stride = png_get_rowbytes(r.png, r.info);
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(height) * stride);
    for (int y = 0; y < height; ++y) {
        png_read_row(r.png, rows.data() + static_cast<std::size_t>(y) * stride, nullptr);
    }

    Tensor out({3, height, width});
    const float inv = 1.0f / 255.0f;
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = rows.data() + static_cast<std::size_t>(y) * stride;
        for (int x = 0; x < width; ++x) {
            out.at(0, y, x) = row[3 * x + 0] * inv;
            out.at(1, y, x) = row[3 * x + 1] * inv;
            out.at(2, y, x) = row[3 * x + 2] * inv;
        }
    }
    return out;
}

std::pair<int, int> read_png_size(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open image: " + path.string());
    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png: failed to allocate read struct");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png: failed to allocate info struct");
    if (setjmp(png_jmpbuf(r.png))) {
        throw IoError("png: not a readable PNG: " + path.string());
    }
    png_init_io(r.png, fp.get());
    png_read_info(r.png, r.info);
    return {static_cast<int>(png_get_image_width(r.png, r.info)),
            static_cast<int>(png_get_image_height(r.png, r.info))};
}

}  // namespace mud
