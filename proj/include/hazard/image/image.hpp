#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hazard {

using Rgb = std::array<std::uint8_t, 3>;

// Interleaved 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, Rgb fill = {0, 0, 0});

    bool empty() const { return width == 0 || height == 0; }
    std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    Rgb pixel(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
    void set(int x, int y, Rgb c) {
        at(x, y, 0) = c[0];
        at(x, y, 1) = c[1];
        at(x, y, 2) = c[2];
    }

    bool operator==(const Image&) const = default;
};

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
std::vector<std::uint8_t> encode_png(const Image& image);
// Width and height from the PNG header without decoding pixels.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

// Bilinear resampling with half-pixel centers.
Image resize_bilinear(const Image& src, int width, int height);
Image crop(const Image& src, int x0, int y0, int width, int height);

}  // namespace hazard
