#pragma once

#include "hazard/dataset/dataset.hpp"
#include "hazard/generation/vocab.hpp"
#include "hazard/retrieval/backbone.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace hazard::gen {

using ad::Var;
using ad::Matrix;

struct TapConfig {
    int stride = 8;
    int expected_taps = 3;
};

// 1-based layer numbers {stride, 2*stride, ..., layers}; throws
// std::invalid_argument when the depth does not split into expected_taps.
std::vector<int> tap_layers(int layers, const TapConfig& tap);

struct AdapterConfig {
    int bottleneck_dim = 8;
    int branches = 2;  // routed decoder branches
};

struct DecoderConfig {
    int layers = 3;
    int width = 64;
    int heads = 4;
    int max_len = 96;
};

struct GenerationConfig {
    retrieval::VisionConfig vision;
    prep::RenderStyle style;
    TapConfig tap{2, 3};
    AdapterConfig adapter;
    DecoderConfig decoder;

    prep::GeomConfig geom() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const GenerationConfig& c);
void from_json(const nlohmann::json& j, GenerationConfig& c);

// Small autoregressive transformer standing in for a pretrained language model.
class Decoder {
public:
    Decoder(nn::ParamSet& ps, const std::string& name, const DecoderConfig& config, int vocab_size, Rng& rng);

    Var embed(std::span<const int> ids) const;
    int num_layers() const { return static_cast<int>(blocks_.size()); }
    // Runs the blocks over full input embeddings; `hook` sees each block output.
    Var forward(const Var& inputs, const Matrix& mask, const retrieval::BlockHook& hook = {}) const;
    Var logits(const Var& hidden) const;
    const DecoderConfig& config() const { return config_; }

private:
    DecoderConfig config_;
    nn::Embedding tokens_;
    ad::Parameter* pos_;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm ln_final_;
    nn::Linear lm_head_;
};

class GenerationModel {
public:
    GenerationModel(const GenerationConfig& config, WordVocab vocab, std::uint64_t init_seed);
    GenerationModel(const GenerationModel&) = delete;
    GenerationModel& operator=(const GenerationModel&) = delete;

    const GenerationConfig& config() const { return config_; }
    const WordVocab& vocab() const { return vocab_; }

    // Parameter-name predicates for the two training stages.
    static bool is_adapter_param(const std::string& name);
    static bool is_decoder_param(const std::string& name);

    nn::ParamSet params;
    retrieval::VisionTransformer vision;
    std::vector<nn::Adapter> vision_adapters;  // one per vision block
    nn::Linear projector;
    Decoder decoder;
    std::vector<std::vector<nn::Adapter>> decoder_adapters;  // [layer][branch]
    nn::Linear router;

private:
    GenerationConfig config_;
    WordVocab vocab_;
};

// CLS embeddings (1 x width each) after the tap layers, vision adapters applied.
std::vector<Var> extract_cls_sequence(const retrieval::VisionTransformer& vision, const Image& rendered,
                                      const TapConfig& tap, const retrieval::BlockHook& hook = {});
std::vector<Var> extract_cls_sequence(const GenerationModel& model, const Image& rendered);

// Rows = number of taps, cols = decoder width.
Var project_visual_tokens(const std::vector<Var>& cls_list, const nn::Linear& projector);

struct Prompt {
    Var embeddings;            // [BOS, visual..., instruction...]
    std::vector<int> token_ids;  // same length; visual slots hold -1
    int visual_begin = 1;
    int instruction_begin = 0;
};

Prompt assemble_prompt(const Var& visual_tokens, std::string_view instruction, const WordVocab& vocab,
                       const Decoder& decoder);

// Softmax mixing weights (1 x branches) from the BOS hidden state.
Var routing_signal(const Var& bos_embedding, const nn::Linear& router);

// Prefix positions attend to each other freely; later positions are causal.
Matrix prefix_causal_mask(Eigen::Index length, Eigen::Index prefix);

struct SequenceLogits {
    Var logits;      // one row per input position
    int prompt_len = 0;
    std::vector<Var> routing;  // per decoder layer
};

// Projected CLS taps for one rendered image (rows = taps).
Var visual_prefix(const GenerationModel& model, const Image& rendered);

// Runs the decoder over [prompt, target_ids] with routed adapters.
SequenceLogits forward_sequence(const GenerationModel& model, const Var& visual, std::span<const int> target_ids);

Image render_for_generation(const GenerationConfig& config, const data::Sample& sample, const Image& base);

struct DecodeConfig {
    enum class Strategy { Greedy, Beam };
    Strategy strategy = Strategy::Greedy;
    int beam_size = 4;
    int max_new_tokens = 80;

    void validate() const;
};

std::string generate_explanation(const GenerationModel& model, const Image& rendered, const DecodeConfig& decode = {});

// Copies the vision tower from a retrieval checkpoint; the vision configs must agree.
void load_vision_from_retrieval(GenerationModel& model, const std::filesystem::path& retrieval_ckpt);

// Directory with config.json, vocab.txt and params.bin.
void save_generation_checkpoint(const GenerationModel& model, const std::filesystem::path& dir,
                                const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<GenerationModel> load_generation_checkpoint(const std::filesystem::path& dir);

}  // namespace hazard::gen
