#include "hazard/preprocess/preprocess.hpp"
#include "hazard/tensor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hazard::prep {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d == 0.0) {
        h = 0.0;
    } else if (mx == r) {
        h = std::fmod((g - b) / d, 6.0) / 6.0;
    } else if (mx == g) {
        h = ((b - r) / d + 2.0) / 6.0;
    } else {
        h = ((r - g) / d + 4.0) / 6.0;
    }
    if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double hh = h * 6.0;
    const int i = static_cast<int>(std::floor(hh)) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

}  // namespace

Image color_jitter(const Image& image, const JitterConfig& config, Rng& rng) {
    const double brightness = rng.uniform(std::max(0.0, 1.0 - config.brightness), 1.0 + config.brightness);
    const double saturation = rng.uniform(std::max(0.0, 1.0 - config.saturation), 1.0 + config.saturation);
    const double hue_shift = rng.uniform(-config.hue, config.hue);
    Image out(image.width, image.height);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double r = std::min(255.0, image.at(x, y, 0) * brightness) / 255.0;
            double g = std::min(255.0, image.at(x, y, 1) * brightness) / 255.0;
            double b = std::min(255.0, image.at(x, y, 2) * brightness) / 255.0;
            const double gray = 0.299 * r + 0.587 * g + 0.114 * b;
            r = std::clamp(gray + (r - gray) * saturation, 0.0, 1.0);
            g = std::clamp(gray + (g - gray) * saturation, 0.0, 1.0);
            b = std::clamp(gray + (b - gray) * saturation, 0.0, 1.0);
            double h = 0, s = 0, v = 0;
            rgb_to_hsv(r, g, b, h, s, v);
            h = std::fmod(h + hue_shift + 1.0, 1.0);
            hsv_to_rgb(h, s, v, r, g, b);
            out.set(x, y, {to_byte(r * 255.0), to_byte(g * 255.0), to_byte(b * 255.0)});
        }
    }
    return out;
}

namespace {

Image resize_and_crop(const Image& image, const GeomConfig& config, Rng& rng, bool train) {
    if (config.crop_side < 1) throw std::invalid_argument("crop side must be positive");
    const int side = config.resize_side();
    const Image resized = resize_bilinear(image, side, side);
    const int slack = side - config.crop_side;
    int x0 = slack / 2;
    int y0 = slack / 2;
    if (train) {
        x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack + 1)));
        y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack + 1)));
    }
    return crop(resized, x0, y0, config.crop_side, config.crop_side);
}

}  // namespace

Image geometric_pipeline(const Image& image, const GeomConfig& config, Rng& rng, bool train) {
    if (image.empty()) throw std::invalid_argument("geometric pipeline on empty image");
    if (!train) return resize_and_crop(image, config, rng, false);
    return resize_and_crop(color_jitter(image, config.jitter, rng), config, rng, true);
}

Image prepare_model_input(const Image& base, const std::vector<data::EntityAnnotation>& entities,
                          const RenderStyle& style, const GeomConfig& config, Rng& rng, bool train) {
    if (base.empty()) throw std::invalid_argument("model input from empty image");
    const Image jittered = train ? color_jitter(base, config.jitter, rng) : base;
    return resize_and_crop(render_entity_boxes(jittered, entities, style), config, rng, train);
}

data::BBox rescale_box(const data::BBox& box, data::ImageDims from, int side) {
    const double sx = static_cast<double>(side) / from.width;
    const double sy = static_cast<double>(side) / from.height;
    auto r = [](double v) { return static_cast<int>(std::floor(v + 0.5)); };
    data::BBox out{r(box.x_min * sx), r(box.y_min * sy), r(box.x_max * sx), r(box.y_max * sy)};
    out.x_max = std::min(side, std::max(out.x_max, out.x_min + 1));
    out.y_max = std::min(side, std::max(out.y_max, out.y_min + 1));
    return out;
}

}  // namespace hazard::prep
