#include "hazard/retrieval/cross_encoder.hpp"

#include "hazard/tensor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hazard::retrieval {

int relative_position_bucket(int relative_position, int buckets, int max_distance) {
    const int half = buckets / 2;
    int bucket = relative_position > 0 ? half : 0;
    const int n = std::abs(relative_position);
    const int max_exact = half / 2;
    if (n < max_exact) return bucket + n;
    const double ratio = std::log(static_cast<double>(n) / max_exact) /
                         std::log(static_cast<double>(max_distance) / max_exact);
    const int large = max_exact + static_cast<int>(ratio * (half - max_exact));
    return bucket + std::min(large, half - 1);
}

ad::IndexMatrix relative_position_buckets(int length, const RelPosConfig& config) {
    ad::IndexMatrix idx(length, length);
    for (int i = 0; i < length; ++i) {
        for (int j = 0; j < length; ++j) idx(i, j) = relative_position_bucket(j - i, config.buckets, config.max_distance);
    }
    return idx;
}

AuxEncoder::AuxEncoder(nn::ParamSet& ps, const std::string& name, const AuxEncoderConfig& config, int query_width,
                       int context_width, Rng& rng)
    : config_(config),
      query_proj_(ps, name + ".query_proj", query_width, config.dim, rng),
      context_proj_(ps, name + ".context_proj", context_width, config.dim, rng),
      relpos_(&ps.create(name + ".relpos", ad::Matrix::Zero(config.heads, config.relpos.buckets))),
      ln_(ps, name + ".ln", config.dim),
      itm_head_(ps, name + ".itm_head", config.dim, 1, rng) {
    if (config.dim % config.heads != 0) throw std::invalid_argument("aux dim must divide into heads");
    if (config.relpos.buckets < 4) throw std::invalid_argument("need at least 4 relative position buckets");
    for (int l = 0; l < config.layers; ++l) {
        blocks_.emplace_back(ps, name + ".block" + std::to_string(l), config.dim, config.heads, 4 * config.dim, true,
                             rng);
    }
}

CrossRefineOutput AuxEncoder::forward(const Var& query, const Var& context, Rng* rng) const {
    if (context.rows() == 0) throw std::invalid_argument("cross_refine needs a non-empty context");
    if (query.rows() == 0) throw std::invalid_argument("cross_refine needs a non-empty query");
    if (query.cols() != query_proj_.in_features() || context.cols() != context_proj_.in_features()) {
        throw std::invalid_argument("cross_refine token width differs from the encoder's input width");
    }
    const Var q = query_proj_.forward(query);
    const Var ctx = context_proj_.forward(context);

    const auto idx = relative_position_buckets(static_cast<int>(query.rows()), config_.relpos);
    const Var table = ad::param(*relpos_);
    std::vector<Var> bias;
    bias.reserve(static_cast<std::size_t>(config_.heads));
    for (int h = 0; h < config_.heads; ++h) bias.push_back(ad::gather_elements(ad::slice_rows(table, h, 1), idx));

    nn::BlockInputs in;
    in.context = &ctx;
    in.self_bias = &bias;
    if (rng != nullptr) {
        in.dropout = config_.dropout;
        in.rng = rng;
    }
    Var h = q;
    for (const auto& b : blocks_) h = b.forward(h, in);
    h = ln_.forward(h);
    return {h, itm_head_.forward(ad::slice_rows(h, 0, 1))};
}

CrossRefineOutput cross_refine(const AuxEncoder& encoder, const Var& query_tokens, const Var& context_tokens,
                               Rng* rng) {
    return encoder.forward(query_tokens, context_tokens, rng);
}

Var itc_loss(const Var& image_pooled, const Var& text_pooled, const Var& logit_scale) {
    if (image_pooled.rows() != text_pooled.rows() || image_pooled.rows() < 1) {
        throw std::invalid_argument("itc_loss needs equal, non-empty batches");
    }
    if (image_pooled.cols() != text_pooled.cols()) throw std::invalid_argument("itc_loss embedding widths differ");
    const Var logits = ad::scale_by(ad::matmul_nt(image_pooled, text_pooled), logit_scale);
    std::vector<int> diag(static_cast<std::size_t>(image_pooled.rows()));
    std::iota(diag.begin(), diag.end(), 0);
    const Var i2t = ad::cross_entropy_rows(logits, diag);
    const Var t2i = ad::cross_entropy_rows(ad::transpose(logits), diag);
    return ad::scale(ad::add(i2t, t2i), 0.5);
}

Var itc_loss(const Var& image_pooled, const Var& text_pooled, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
    return itc_loss(image_pooled, text_pooled, ad::scalar(1.0 / tau));
}

Var itm_loss(const Var& logits, std::span<const double> labels) {
    if (logits.cols() != 1 || static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty()) {
        throw std::invalid_argument("itm_loss needs one logit per label");
    }
    return ad::bce_with_logits(logits, labels);
}

}  // namespace hazard::retrieval
