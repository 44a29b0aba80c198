#pragma once

#include "hazard/tensor/autodiff.hpp"

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hazard {
class Rng;
}

namespace hazard::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Var;

// Owns parameters at stable addresses; layers keep raw pointers into it.
class ParamSet {
public:
    ParamSet() = default;
    ParamSet(const ParamSet&) = delete;
    ParamSet& operator=(const ParamSet&) = delete;

    Parameter& create(const std::string& name, Matrix init, bool trainable = true);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::vector<Parameter*> all();
    std::vector<Parameter*> trainable();
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();
    // Marks every parameter whose name satisfies `pred` as trainable, all others frozen.
    void set_trainable(const std::function<bool(const std::string&)>& pred);

    // Binary blob: names, shapes and raw doubles in creation order.
    std::string serialize() const;
    std::string serialize_where(const std::function<bool(const std::string&)>& pred) const;
    // Strict: names and shapes must match exactly.
    void deserialize(const std::string& blob);
    // Loads only the entries present in the blob whose names exist here; returns count.
    std::size_t load_matching(const std::string& blob, const std::string& source_prefix,
                              const std::string& target_prefix);

private:
    std::deque<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

Matrix init_normal(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);
Matrix init_xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng);

struct Linear {
    Parameter* weight = nullptr;  // in x out
    Parameter* bias = nullptr;    // 1 x out, optional

    Linear() = default;
    Linear(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
           bool with_bias = true);
    Var forward(const Var& x) const;
    Eigen::Index in_features() const { return weight->value.rows(); }
    Eigen::Index out_features() const { return weight->value.cols(); }
};

struct LayerNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;

    LayerNorm() = default;
    LayerNorm(ParamSet& ps, const std::string& name, Eigen::Index width);
    Var forward(const Var& x) const;
};

struct Embedding {
    Parameter* table = nullptr;

    Embedding() = default;
    Embedding(ParamSet& ps, const std::string& name, Eigen::Index count, Eigen::Index width, Rng& rng);
    Var forward(std::span<const int> ids) const;
};

struct MultiHeadAttention {
    Linear q, k, v, o;
    int heads = 1;

    MultiHeadAttention() = default;
    MultiHeadAttention(ParamSet& ps, const std::string& name, Eigen::Index width, int heads, Rng& rng);
    // `head_bias` holds one (Lq x Lk) additive bias per head; `mask` is added to
    // every head's scores (e.g. causal -inf entries).
    Var forward(const Var& query, const Var& context, const std::vector<Var>* head_bias = nullptr,
                const Matrix* mask = nullptr) const;
};

struct FeedForward {
    Linear fc1, fc2;

    FeedForward() = default;
    FeedForward(ParamSet& ps, const std::string& name, Eigen::Index width, Eigen::Index hidden, Rng& rng);
    Var forward(const Var& x) const;
};

// Bottleneck residual branch; the up-projection starts at zero so an
// untrained adapter is an exact no-op.
struct Adapter {
    Linear down, up;

    Adapter() = default;
    Adapter(ParamSet& ps, const std::string& name, Eigen::Index width, Eigen::Index bottleneck, Rng& rng);
    Var forward(const Var& x) const;
};

struct BlockInputs {
    const Var* context = nullptr;                // cross-attention memory
    const std::vector<Var>* self_bias = nullptr;  // per-head self-attention bias
    const Matrix* self_mask = nullptr;
    double dropout = 0.0;
    Rng* rng = nullptr;  // required when dropout > 0
};

// Pre-LayerNorm transformer block with optional cross-attention.
struct TransformerBlock {
    LayerNorm ln_self;
    MultiHeadAttention self_attn;
    std::optional<LayerNorm> ln_cross;
    std::optional<MultiHeadAttention> cross_attn;
    LayerNorm ln_ffn;
    FeedForward ffn;

    TransformerBlock() = default;
    TransformerBlock(ParamSet& ps, const std::string& name, Eigen::Index width, int heads, Eigen::Index ffn_hidden,
                     bool with_cross, Rng& rng);
    Var forward(const Var& x, const BlockInputs& in) const;
};

Matrix causal_mask(Eigen::Index length);

}  // namespace hazard::nn
