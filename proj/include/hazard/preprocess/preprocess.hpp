#pragma once

#include "hazard/dataset/types.hpp"
#include "hazard/image/image.hpp"

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace hazard {
class Rng;
}

namespace hazard::prep {

using Palette = std::map<int, Rgb>;

// Entity #1 purple, #2 green, #3 yellow.
Palette trained_palette();
// Entity #1 magenta, #2 cyan, #3 yellow; used with outlined boxes.
Palette outline_palette();

enum class RenderMode { FilledAlpha, Outline };

struct RenderStyle {
    RenderMode mode = RenderMode::FilledAlpha;
    double alpha = 0.6;
    Palette palette = trained_palette();
    int stroke = 3;

    static RenderStyle outline() { return {RenderMode::Outline, 1.0, outline_palette(), 3}; }
};

enum class AblationMode { Full, PositionOnly, NoEntity, NoContext, OnlyContext };

std::string_view to_string(AblationMode mode);
// Accepts the CLI spellings: full, position-only, no-entity, no-context, only-context.
AblationMode parse_ablation_mode(std::string_view name);

inline constexpr Rgb kNeutralGray = {128, 128, 128};

struct RenderedImage {
    Image pixels;
    std::variant<RenderStyle, AblationMode> style;
    std::string provenance;  // sample id
};

// round(alpha * color + (1 - alpha) * pixel), halves rounded up.
std::uint8_t blend_channel(std::uint8_t pixel, std::uint8_t color, double alpha);
Rgb blend(Rgb pixel, Rgb color, double alpha);

Image render_entity_boxes(const Image& image, const std::vector<data::EntityAnnotation>& entities,
                          const RenderStyle& style);

Image apply_ablation_mode(const Image& image, const std::vector<data::EntityAnnotation>& entities,
                          AblationMode mode);

struct JitterConfig {
    double brightness = 0.5;
    double hue = 0.3;
    double saturation = 0.3;
};

struct GeomConfig {
    int crop_side = 224;
    JitterConfig jitter;

    static constexpr bool kHorizontalFlip = false;
    int resize_side() const { return crop_side + 16; }
};

Image color_jitter(const Image& image, const JitterConfig& config, Rng& rng);

// Train: jitter, resize to resize_side, random crop. Eval: resize and center
// crop without touching `rng`.
Image geometric_pipeline(const Image& image, const GeomConfig& config, Rng& rng, bool train);

// Model input path for annotated samples: jitter (train only), then box
// rendering at native resolution, then resize and crop.
Image prepare_model_input(const Image& base, const std::vector<data::EntityAnnotation>& entities,
                          const RenderStyle& style, const GeomConfig& config, Rng& rng, bool train);

data::BBox rescale_box(const data::BBox& box, data::ImageDims from, int side);

using Permutation = std::map<int, int>;

// Random bijection over the sample's entity indices.
Permutation random_permutation(const data::Sample& sample, Rng& rng);
Permutation inverse(const Permutation& perm);

// Renames entity i to perm[i] in annotations and text; palette untouched.
data::Sample shuffle_entities(const data::Sample& sample, const Permutation& perm);

struct ComprehensiveText {
    std::string text;
    // Byte ranges of `text` that were inserted, ascending.
    std::vector<std::pair<std::size_t, std::size_t>> inserted;
};

// Expands the first mention of each entity with its description.
ComprehensiveText make_comprehensive_text(const data::Sample& sample);

}  // namespace hazard::prep
