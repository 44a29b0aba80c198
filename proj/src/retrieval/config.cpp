#include "hazard/retrieval/config.hpp"

#include <stdexcept>

namespace hazard::retrieval {

using nlohmann::json;

BackboneConfig BackboneConfig::toy() { return {}; }

BackboneConfig BackboneConfig::pretrained() {
    BackboneConfig c;
    c.kind = BackboneKind::Pretrained;
    c.vision = {24, 1024, 16, 14, 224};
    c.text = {12, 768, 12, 30522, 77};
    c.embed_dim = 768;
    return c;
}

void BackboneConfig::validate() const {
    if (vision.layers < 1 || text.layers < 1) throw std::invalid_argument("backbones need at least one layer");
    if (vision.patch_size < 1 || vision.image_side % vision.patch_size != 0) {
        throw std::invalid_argument("image side must be a multiple of the patch size");
    }
    if (vision.width % vision.heads != 0 || text.width % text.heads != 0) {
        throw std::invalid_argument("backbone width must divide into heads");
    }
    if (text.max_len < 2 || text.vocab_size < 8) throw std::invalid_argument("text backbone too small");
    if (embed_dim < 1) throw std::invalid_argument("embed_dim must be positive");
}

AuxEncoderConfig AuxEncoderConfig::toy() {
    AuxEncoderConfig c;
    c.dim = 64;
    c.heads = 8;
    return c;
}

prep::GeomConfig RetrievalConfig::geom() const {
    prep::GeomConfig g;
    g.crop_side = backbone.vision.image_side;
    return g;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(itm_mismatch_rate > 0.0 && itm_mismatch_rate < 1.0)) {
        throw std::invalid_argument("itm_mismatch_rate must lie in (0,1)");
    }
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
}

void to_json(json& j, const BackboneConfig& c) {
    j = json{{"kind", c.kind == BackboneKind::Toy ? "toy" : "pretrained"},
             {"vision",
              {{"layers", c.vision.layers},
               {"width", c.vision.width},
               {"heads", c.vision.heads},
               {"patch_size", c.vision.patch_size},
               {"image_side", c.vision.image_side}}},
             {"text",
              {{"layers", c.text.layers},
               {"width", c.text.width},
               {"heads", c.text.heads},
               {"vocab_size", c.text.vocab_size},
               {"max_len", c.text.max_len}}},
             {"embed_dim", c.embed_dim},
             {"weights_path", c.weights_path},
             {"vocab_path", c.vocab_path}};
}

void from_json(const json& j, BackboneConfig& c) {
    const std::string kind = j.value("kind", "toy");
    c = kind == "pretrained" ? BackboneConfig::pretrained() : BackboneConfig::toy();
    if (kind != "toy" && kind != "pretrained") throw std::invalid_argument("unknown backbone kind " + kind);
    if (j.contains("vision")) {
        const auto& v = j["vision"];
        c.vision.layers = v.value("layers", c.vision.layers);
        c.vision.width = v.value("width", c.vision.width);
        c.vision.heads = v.value("heads", c.vision.heads);
        c.vision.patch_size = v.value("patch_size", c.vision.patch_size);
        c.vision.image_side = v.value("image_side", c.vision.image_side);
    }
    if (j.contains("text")) {
        const auto& t = j["text"];
        c.text.layers = t.value("layers", c.text.layers);
        c.text.width = t.value("width", c.text.width);
        c.text.heads = t.value("heads", c.text.heads);
        c.text.vocab_size = t.value("vocab_size", c.text.vocab_size);
        c.text.max_len = t.value("max_len", c.text.max_len);
    }
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.weights_path = j.value("weights_path", c.weights_path);
    c.vocab_path = j.value("vocab_path", c.vocab_path);
}

void to_json(json& j, const AuxEncoderConfig& c) {
    j = json{{"layers", c.layers},
             {"dim", c.dim},
             {"heads", c.heads},
             {"dropout", c.dropout},
             {"relpos", {{"max_distance", c.relpos.max_distance}, {"buckets", c.relpos.buckets}}}};
}

void from_json(const json& j, AuxEncoderConfig& c) {
    c = AuxEncoderConfig{};
    c.layers = j.value("layers", c.layers);
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("relpos")) {
        c.relpos.max_distance = j["relpos"].value("max_distance", c.relpos.max_distance);
        c.relpos.buckets = j["relpos"].value("buckets", c.relpos.buckets);
    }
}

void to_json(json& j, const RetrievalConfig& c) {
    json palette = json::object();
    for (const auto& [idx, rgb] : c.style.palette) palette[std::to_string(idx)] = {rgb[0], rgb[1], rgb[2]};
    j = json{{"backbone", c.backbone},
             {"aux", c.aux},
             {"style",
              {{"mode", c.style.mode == prep::RenderMode::FilledAlpha ? "filled" : "outline"},
               {"alpha", c.style.alpha},
               {"stroke", c.style.stroke},
               {"palette", palette}}}};
}

void from_json(const json& j, RetrievalConfig& c) {
    c = RetrievalConfig{};
    if (j.contains("backbone")) c.backbone = j["backbone"].get<BackboneConfig>();
    if (j.contains("aux")) c.aux = j["aux"].get<AuxEncoderConfig>();
    if (j.contains("style")) {
        const auto& s = j["style"];
        c.style.mode = s.value("mode", "filled") == "outline" ? prep::RenderMode::Outline : prep::RenderMode::FilledAlpha;
        c.style.alpha = s.value("alpha", c.style.alpha);
        c.style.stroke = s.value("stroke", c.style.stroke);
        if (s.contains("palette")) {
            c.style.palette.clear();
            for (const auto& [k, v] : s["palette"].items()) {
                c.style.palette[std::stoi(k)] = {v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(),
                                                 v[2].get<std::uint8_t>()};
            }
        }
    }
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"warmup_steps", c.warmup_steps},
             {"seed", c.seed},
             {"itm_mismatch_rate", c.itm_mismatch_rate},
             {"use_itm", c.use_itm},
             {"entity_shuffle", c.entity_shuffle},
             {"augment", c.augment},
             {"stop_at_train_recall", c.stop_at_train_recall},
             {"eval_every", c.eval_every}};
}

void from_json(const json& j, TrainConfig& c) {
    c = TrainConfig{};
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
    c.itm_mismatch_rate = j.value("itm_mismatch_rate", c.itm_mismatch_rate);
    c.use_itm = j.value("use_itm", c.use_itm);
    c.entity_shuffle = j.value("entity_shuffle", c.entity_shuffle);
    c.augment = j.value("augment", c.augment);
    c.stop_at_train_recall = j.value("stop_at_train_recall", c.stop_at_train_recall);
    c.eval_every = j.value("eval_every", c.eval_every);
}

}  // namespace hazard::retrieval
