#pragma once

#include "hazard/image/image.hpp"
#include "hazard/nn/layers.hpp"
#include "hazard/retrieval/config.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hazard::retrieval {

using ad::Matrix;
using ad::Var;

// Non-overlapping patches flattened row-major (RGB interleaved), scaled to [-1, 1].
Matrix image_to_patches(const Image& image, int patch);

// Called after each block with the 0-based layer index; returns the hidden
// state to continue with (used to inject adapters).
using BlockHook = std::function<Var(int layer, const Var& hidden)>;

struct VisionOutput {
    Var tokens;                 // final layer, normalized: (1 + patches) x width
    std::vector<Var> layer_cls;  // CLS row after every block, before the final norm
};

class VisionTransformer {
public:
    VisionTransformer(nn::ParamSet& ps, const std::string& name, const VisionConfig& config, Rng& rng);

    // Throws std::invalid_argument unless the image is image_side x image_side.
    VisionOutput forward(const Image& image, const BlockHook& hook = {}) const;
    const VisionConfig& config() const { return config_; }

private:
    VisionConfig config_;
    nn::Linear patch_embed_;
    ad::Parameter* cls_;
    ad::Parameter* pos_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm ln_post_;
};

class TextTransformer {
public:
    TextTransformer(nn::ParamSet& ps, const std::string& name, const TextConfig& config, Rng& rng);

    // Token ids must start with CLS and fit in max_len. Returns normalized tokens.
    Var forward(std::span<const int> ids) const;
    const TextConfig& config() const { return config_; }

private:
    TextConfig config_;
    nn::Embedding tokens_;
    ad::Parameter* pos_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm ln_final_;
};

}  // namespace hazard::retrieval
