#include "hazard/retrieval/backbone.hpp"

#include "hazard/tensor/rng.hpp"

#include <stdexcept>

namespace hazard::retrieval {

Matrix image_to_patches(const Image& image, int patch) {
    if (patch < 1 || image.width % patch != 0 || image.height % patch != 0) {
        throw std::invalid_argument("image size must be a multiple of the patch size");
    }
    const int gx = image.width / patch;
    const int gy = image.height / patch;
    Matrix out(gx * gy, patch * patch * 3);
    for (int py = 0; py < gy; ++py) {
        for (int px = 0; px < gx; ++px) {
            const int row = py * gx + px;
            int col = 0;
            for (int y = 0; y < patch; ++y) {
                for (int x = 0; x < patch; ++x) {
                    const Rgb c = image.pixel(px * patch + x, py * patch + y);
                    for (int ch = 0; ch < 3; ++ch) out(row, col++) = c[static_cast<std::size_t>(ch)] / 127.5 - 1.0;
                }
            }
        }
    }
    return out;
}

VisionTransformer::VisionTransformer(nn::ParamSet& ps, const std::string& name, const VisionConfig& config, Rng& rng)
    : config_(config),
      patch_embed_(ps, name + ".patch_embed", config.patch_size * config.patch_size * 3, config.width, rng),
      cls_(&ps.create(name + ".cls", nn::init_normal(1, config.width, 0.02, rng))),
      pos_(&ps.create(name + ".pos", nn::init_normal(config.tokens(), config.width, 0.02, rng))),
      ln_post_(ps, name + ".ln_post", config.width) {
    blocks_.reserve(static_cast<std::size_t>(config.layers));
    for (int l = 0; l < config.layers; ++l) {
        blocks_.emplace_back(ps, name + ".block" + std::to_string(l), config.width, config.heads, 4 * config.width,
                             false, rng);
    }
}

VisionOutput VisionTransformer::forward(const Image& image, const BlockHook& hook) const {
    if (image.width != config_.image_side || image.height != config_.image_side) {
        throw std::invalid_argument("vision input must be " + std::to_string(config_.image_side) + "x" +
                                    std::to_string(config_.image_side) + ", got " + std::to_string(image.width) +
                                    "x" + std::to_string(image.height));
    }
    const Var patches = patch_embed_.forward(ad::constant(image_to_patches(image, config_.patch_size)));
    const std::vector<Var> parts{ad::param(*cls_), patches};
    Var h = ad::add(ad::concat_rows(parts), ad::param(*pos_));
    VisionOutput out;
    out.layer_cls.reserve(blocks_.size());
    nn::BlockInputs in;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        h = blocks_[l].forward(h, in);
        if (hook) h = hook(static_cast<int>(l), h);
        out.layer_cls.push_back(ad::slice_rows(h, 0, 1));
    }
    out.tokens = ln_post_.forward(h);
    return out;
}

TextTransformer::TextTransformer(nn::ParamSet& ps, const std::string& name, const TextConfig& config, Rng& rng)
    : config_(config),
      tokens_(ps, name + ".tokens", config.vocab_size, config.width, rng),
      pos_(&ps.create(name + ".pos", nn::init_normal(config.max_len, config.width, 0.02, rng))),
      ln_final_(ps, name + ".ln_final", config.width) {
    blocks_.reserve(static_cast<std::size_t>(config.layers));
    for (int l = 0; l < config.layers; ++l) {
        blocks_.emplace_back(ps, name + ".block" + std::to_string(l), config.width, config.heads, 4 * config.width,
                             false, rng);
    }
}

Var TextTransformer::forward(std::span<const int> ids) const {
    if (ids.empty() || static_cast<int>(ids.size()) > config_.max_len) {
        throw std::invalid_argument("token count outside [1, max_len]");
    }
    for (int id : ids) {
        if (id < 0 || id >= config_.vocab_size) throw std::invalid_argument("token id outside vocabulary");
    }
    const auto n = static_cast<Eigen::Index>(ids.size());
    Var h = ad::add(tokens_.forward(ids), ad::slice_rows(ad::param(*pos_), 0, n));
    nn::BlockInputs in;
    for (const auto& b : blocks_) h = b.forward(h, in);
    return ln_final_.forward(h);
}

}  // namespace hazard::retrieval
