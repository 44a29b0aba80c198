#pragma once

#include "hazard/dataset/dataset.hpp"
#include "hazard/evaluation/retrieval_metrics.hpp"
#include "hazard/retrieval/backbone.hpp"
#include "hazard/retrieval/cross_encoder.hpp"
#include "hazard/retrieval/tokenizer.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::retrieval {

// CLIP-style initial temperature and the lower bound on tau.
inline constexpr double kInitialTau = 0.07;
inline constexpr double kMinTau = 0.01;

class RetrievalModel {
public:
    RetrievalModel(const RetrievalConfig& config, std::uint64_t init_seed);
    RetrievalModel(const RetrievalModel&) = delete;
    RetrievalModel& operator=(const RetrievalModel&) = delete;

    const RetrievalConfig& config() const { return config_; }
    const TextTokenizer& tokenizer() const { return *tokenizer_; }

    // 1/tau as a 1x1 graph value.
    Var logit_scale() const;
    double tau() const;
    // Keeps tau >= kMinTau after optimizer updates.
    void clamp_temperature();

    nn::ParamSet params;
    VisionTransformer vision;
    TextTransformer text;
    nn::Linear image_proj;
    nn::Linear text_proj;
    AuxEncoder t2i;  // text queries attend to image tokens
    AuxEncoder i2t;  // image queries attend to text tokens

private:
    static std::unique_ptr<TextTokenizer> make_tokenizer(const RetrievalConfig& config);

    RetrievalConfig config_;
    std::unique_ptr<TextTokenizer> tokenizer_;
    ad::Parameter* log_scale_;
};

struct Encoded {
    Var tokens;  // backbone final-layer sequence
    Var pooled;  // projected CLS, unit L2 norm (1 x embed_dim)
};

struct EncodedText : Encoded {
    bool truncated = false;
    std::string warning;
};

Encoded encode_image(const RetrievalModel& model, const Image& rendered);
EncodedText encode_text(const RetrievalModel& model, std::string_view text);

// Cosine similarity of the pooled embeddings; aux encoders are not involved.
double retrieval_score(const RetrievalModel& model, const Image& rendered, std::string_view text);

// Eval-mode model input: box rendering in the configured style, resize, center crop.
Image render_for_model(const RetrievalConfig& config, const data::Sample& sample, const Image& base);

struct ScoringItem {
    std::string id;
    Image rendered;
    std::string text;
};

std::vector<ScoringItem> scoring_items(const RetrievalModel& model, const data::Corpus& corpus,
                                       const std::vector<std::string>& ids, const data::ImageSource& images);

// Q = C = items.size(), gold = identity. TR ranks texts per image, IR images per text.
eval::ScoreMatrix score_matrix(const RetrievalModel& model, const std::vector<ScoringItem>& items,
                               eval::Direction direction);

// Long-format TSV: a "# direction=" line, header "query candidate score gold",
// then one line per cell with scores in %.17g (round-trips exactly).
void write_score_tsv(const std::filesystem::path& path, const eval::ScoreMatrix& matrix);
eval::ScoreMatrix read_score_tsv(const std::filesystem::path& path);

// Checkpoint directory: config.json, params.bin, rng_state.
void save_checkpoint(const RetrievalModel& model, const std::filesystem::path& dir, const std::string& rng_state = {},
                     const nlohmann::json& extra = nlohmann::json::object());
std::unique_ptr<RetrievalModel> load_checkpoint(const std::filesystem::path& dir);
RetrievalConfig read_checkpoint_config(const std::filesystem::path& dir);

}  // namespace hazard::retrieval
