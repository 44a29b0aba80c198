#include "hazard/preprocess/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hazard::prep {

Palette trained_palette() { return {{1, {128, 0, 128}}, {2, {0, 200, 0}}, {3, {255, 215, 0}}}; }

Palette outline_palette() { return {{1, {255, 0, 255}}, {2, {0, 255, 255}}, {3, {255, 215, 0}}}; }

std::string_view to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::Full: return "full";
        case AblationMode::PositionOnly: return "position-only";
        case AblationMode::NoEntity: return "no-entity";
        case AblationMode::NoContext: return "no-context";
        case AblationMode::OnlyContext: return "only-context";
    }
    return "full";
}

AblationMode parse_ablation_mode(std::string_view name) {
    for (auto m : {AblationMode::Full, AblationMode::PositionOnly, AblationMode::NoEntity, AblationMode::NoContext,
                   AblationMode::OnlyContext}) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown ablation mode '" + std::string(name) + "'");
}

std::uint8_t blend_channel(std::uint8_t pixel, std::uint8_t color, double alpha) {
    const double v = alpha * color + (1.0 - alpha) * pixel;
    return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

Rgb blend(Rgb pixel, Rgb color, double alpha) {
    return {blend_channel(pixel[0], color[0], alpha), blend_channel(pixel[1], color[1], alpha),
            blend_channel(pixel[2], color[2], alpha)};
}

namespace {

std::vector<const data::EntityAnnotation*> by_index(const std::vector<data::EntityAnnotation>& entities) {
    std::vector<const data::EntityAnnotation*> sorted;
    for (const auto& e : entities) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->index < b->index; });
    return sorted;
}

const Rgb& palette_color(const Palette& palette, int index) {
    auto it = palette.find(index);
    if (it == palette.end()) throw std::out_of_range("entity index " + std::to_string(index) + " has no palette color");
    return it->second;
}

void check_box(const data::BBox& b, const Image& img) {
    if (!(0 <= b.x_min && b.x_min < b.x_max && b.x_max <= img.width && 0 <= b.y_min && b.y_min < b.y_max &&
          b.y_max <= img.height)) {
        throw std::invalid_argument("entity box outside image");
    }
}

template <typename Fn>
void for_box(const data::BBox& b, Fn&& fn) {
    for (int y = b.y_min; y < b.y_max; ++y) {
        for (int x = b.x_min; x < b.x_max; ++x) fn(x, y);
    }
}

}  // namespace

Image render_entity_boxes(const Image& image, const std::vector<data::EntityAnnotation>& entities,
                          const RenderStyle& style) {
    if (style.alpha < 0.0 || style.alpha > 1.0) throw std::invalid_argument("alpha must lie in [0,1]");
    Image out = image;
    for (const auto* e : by_index(entities)) {
        const Rgb color = palette_color(style.palette, e->index);
        check_box(e->bbox, image);
        const auto& b = e->bbox;
        if (style.mode == RenderMode::FilledAlpha) {
            for_box(b, [&](int x, int y) { out.set(x, y, blend(out.pixel(x, y), color, style.alpha)); });
        } else {
            const int s = std::max(1, style.stroke);
            for_box(b, [&](int x, int y) {
                const bool edge = x - b.x_min < s || b.x_max - 1 - x < s || y - b.y_min < s || b.y_max - 1 - y < s;
                if (edge) out.set(x, y, color);
            });
        }
    }
    return out;
}

Image apply_ablation_mode(const Image& image, const std::vector<data::EntityAnnotation>& entities,
                          AblationMode mode) {
    const RenderStyle style;
    const auto sorted = by_index(entities);
    for (const auto* e : sorted) {
        palette_color(style.palette, e->index);
        check_box(e->bbox, image);
    }
    switch (mode) {
        case AblationMode::Full: return render_entity_boxes(image, entities, style);
        case AblationMode::PositionOnly: {
            Image out(image.width, image.height, kNeutralGray);
            for (const auto* e : sorted) {
                const Rgb c = palette_color(style.palette, e->index);
                for_box(e->bbox, [&](int x, int y) { out.set(x, y, c); });
            }
            return out;
        }
        case AblationMode::NoEntity: {
            Image out = image;
            for (const auto* e : sorted) {
                const Rgb c = palette_color(style.palette, e->index);
                for_box(e->bbox, [&](int x, int y) { out.set(x, y, c); });
            }
            return out;
        }
        case AblationMode::NoContext: {
            const Image blended = render_entity_boxes(image, entities, style);
            Image out(image.width, image.height, kNeutralGray);
            for (const auto* e : sorted) {
                for_box(e->bbox, [&](int x, int y) { out.set(x, y, blended.pixel(x, y)); });
            }
            return out;
        }
        case AblationMode::OnlyContext: {
            Image out = image;
            for (const auto* e : sorted) for_box(e->bbox, [&](int x, int y) { out.set(x, y, kNeutralGray); });
            return out;
        }
    }
    return image;
}

}  // namespace hazard::prep
