#pragma once

#include "hazard/preprocess/preprocess.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace hazard::retrieval {

enum class BackboneKind { Toy, Pretrained };

struct VisionConfig {
    int layers = 6;
    int width = 64;
    int heads = 4;
    int patch_size = 8;
    int image_side = 32;

    int tokens() const { return (image_side / patch_size) * (image_side / patch_size) + 1; }
};

struct TextConfig {
    int layers = 2;
    int width = 64;
    int heads = 4;
    int vocab_size = 2048;
    int max_len = 48;
};

struct BackboneConfig {
    BackboneKind kind = BackboneKind::Toy;
    VisionConfig vision;
    TextConfig text;
    int embed_dim = 64;
    // PRETRAINED only: parameter blob with converted backbone weights and the
    // tokenizer vocabulary that came with them.
    std::string weights_path;
    std::string vocab_path;

    static BackboneConfig toy();
    // ViT-L/14 vision tower and a BERT-base sized text tower.
    static BackboneConfig pretrained();
    void validate() const;
};

struct RelPosConfig {
    int max_distance = 128;
    int buckets = 32;
};

struct AuxEncoderConfig {
    int layers = 2;
    int dim = 512;
    int heads = 8;
    double dropout = 0.1;
    RelPosConfig relpos;

    // Reduced width for CPU experiments; everything else keeps its default.
    static AuxEncoderConfig toy();
};

struct RetrievalConfig {
    BackboneConfig backbone = BackboneConfig::toy();
    AuxEncoderConfig aux = AuxEncoderConfig::toy();
    prep::RenderStyle style;  // filled alpha, trained palette

    prep::GeomConfig geom() const;
};

struct TrainConfig {
    int epochs = 15;
    int batch_size = 32;
    double learning_rate = 5e-4;
    double weight_decay = 0.01;
    int warmup_steps = 10;
    std::uint64_t seed = 0;
    double itm_mismatch_rate = 0.5;
    bool use_itm = true;
    bool entity_shuffle = true;
    bool augment = true;
    // Stop once training-set R@1 (both directions) reaches this value; <= 0 disables.
    double stop_at_train_recall = 0.0;
    int eval_every = 5;

    void validate() const;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
void to_json(nlohmann::json& j, const AuxEncoderConfig& c);
void from_json(const nlohmann::json& j, AuxEncoderConfig& c);
void to_json(nlohmann::json& j, const RetrievalConfig& c);
void from_json(const nlohmann::json& j, RetrievalConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace hazard::retrieval
