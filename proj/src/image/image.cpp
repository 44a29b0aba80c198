#include "hazard/image/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace hazard {

Image::Image(int w, int h, Rgb fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
    if (w < 0 || h < 0) throw std::invalid_argument("negative image size");
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = fill[0];
        data[i + 1] = fill[1];
        data[i + 2] = fill[2];
    }
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};

void png_write_to_vector(png_structp png, png_bytep bytes, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), bytes, bytes + len);
}

void png_flush_noop(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
    if (image.empty()) throw std::invalid_argument("encode_png: empty image");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> out;
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encoding failed");
    }
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
        auto* row = const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(y) * image.width * 3);
        png_write_row(png, row);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    const auto bytes = encode_png(image);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    Image img;
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("cannot decode PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img = Image(w, h);
    for (int y = 0; y < h; ++y) png_read_row(png, img.data.data() + static_cast<std::size_t>(y) * w * 3, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image " + path.string());
    unsigned char header[24];
    in.read(reinterpret_cast<char*>(header), 24);
    static const unsigned char kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (in.gcount() != 24 || std::memcmp(header, kSig, 8) != 0) {
        throw std::runtime_error("not a PNG file: " + path.string());
    }
    auto be32 = [&](int off) {
        return static_cast<int>((header[off] << 24) | (header[off + 1] << 16) | (header[off + 2] << 8) |
                                header[off + 3]);
    };
    return {be32(16), be32(20)};
}

Image resize_bilinear(const Image& src, int width, int height) {
    if (src.empty()) throw std::invalid_argument("resize of empty image");
    if (width <= 0 || height <= 0) throw std::invalid_argument("resize target must be positive");
    Image out(width, height);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = src.at(x0, y0, c) * (1.0 - wx) + src.at(x1, y0, c) * wx;
                const double bottom = src.at(x0, y1, c) * (1.0 - wx) + src.at(x1, y1, c) * wx;
                const double v = top * (1.0 - wy) + bottom * wy;
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
    return out;
}

Image crop(const Image& src, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || width <= 0 || height <= 0 || x0 + width > src.width || y0 + height > src.height) {
        throw std::invalid_argument("crop window outside image");
    }
    Image out(width, height);
    for (int y = 0; y < height; ++y) {
        std::memcpy(out.data.data() + static_cast<std::size_t>(y) * width * 3,
                    src.data.data() + (static_cast<std::size_t>(y0 + y) * src.width + x0) * 3,
                    static_cast<std::size_t>(width) * 3);
    }
    return out;
}

}  // namespace hazard
