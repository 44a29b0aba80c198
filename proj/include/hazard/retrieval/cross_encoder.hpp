#pragma once

#include "hazard/nn/layers.hpp"
#include "hazard/retrieval/config.hpp"

#include <span>
#include <string>
#include <vector>

namespace hazard::retrieval {

using ad::Var;

// Symmetric log-spaced bucketing of (key - query) offsets: half of the buckets
// per sign, exact buckets for small offsets, logarithmic up to max_distance.
int relative_position_bucket(int relative_position, int buckets, int max_distance);
ad::IndexMatrix relative_position_buckets(int length, const RelPosConfig& config);

struct CrossRefineOutput {
    Var tokens;  // refined query tokens, same count as the input query
    Var logit;   // 1x1 match logit read from the refined first (CLS) token
};

// Two-layer encoder: self-attention over the query (with relative position
// bias), cross-attention into the context, and a binary ITM head.
class AuxEncoder {
public:
    AuxEncoder(nn::ParamSet& ps, const std::string& name, const AuxEncoderConfig& config, int query_width,
               int context_width, Rng& rng);

    // Dropout applies only when `rng` is non-null.
    CrossRefineOutput forward(const Var& query, const Var& context, Rng* rng = nullptr) const;
    const AuxEncoderConfig& config() const { return config_; }

private:
    AuxEncoderConfig config_;
    nn::Linear query_proj_, context_proj_;
    ad::Parameter* relpos_;  // heads x buckets
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm ln_;
    nn::Linear itm_head_;
};

CrossRefineOutput cross_refine(const AuxEncoder& encoder, const Var& query_tokens, const Var& context_tokens,
                               Rng* rng = nullptr);

// Symmetric InfoNCE over S * logit_scale with the diagonal as gold;
// `logit_scale` is 1x1 and equals 1/tau.
Var itc_loss(const Var& image_pooled, const Var& text_pooled, const Var& logit_scale);
Var itc_loss(const Var& image_pooled, const Var& text_pooled, double tau);

// Mean binary cross-entropy; label 1 = matched pair.
Var itm_loss(const Var& logits, std::span<const double> labels);

}  // namespace hazard::retrieval
