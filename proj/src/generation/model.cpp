#include "hazard/generation/model.hpp"

#include "hazard/common/io.hpp"
#include "hazard/generation/prompts.hpp"
#include "hazard/retrieval/model.hpp"
#include "hazard/tensor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hazard::gen {

using nlohmann::json;

std::vector<int> tap_layers(int layers, const TapConfig& tap) {
    if (tap.stride < 1 || tap.expected_taps < 1) throw std::invalid_argument("tap stride and count must be positive");
    if (layers % tap.stride != 0 || layers / tap.stride != tap.expected_taps) {
        throw std::invalid_argument("cannot take " + std::to_string(tap.expected_taps) + " taps every " +
                                    std::to_string(tap.stride) + " layers from a " + std::to_string(layers) +
                                    "-layer encoder");
    }
    std::vector<int> out;
    for (int l = tap.stride; l <= layers; l += tap.stride) out.push_back(l);
    return out;
}

prep::GeomConfig GenerationConfig::geom() const {
    prep::GeomConfig g;
    g.crop_side = vision.image_side;
    return g;
}

void GenerationConfig::validate() const {
    tap_layers(vision.layers, tap);
    if (adapter.bottleneck_dim < 1 || adapter.branches < 1) throw std::invalid_argument("bad adapter config");
    if (decoder.width % decoder.heads != 0) throw std::invalid_argument("decoder width must divide into heads");
    if (decoder.layers < 1 || decoder.max_len < 8) throw std::invalid_argument("decoder too small");
}

void to_json(json& j, const GenerationConfig& c) {
    json palette = json::object();
    for (const auto& [idx, rgb] : c.style.palette) palette[std::to_string(idx)] = {rgb[0], rgb[1], rgb[2]};
    j = json{{"vision",
              {{"layers", c.vision.layers},
               {"width", c.vision.width},
               {"heads", c.vision.heads},
               {"patch_size", c.vision.patch_size},
               {"image_side", c.vision.image_side}}},
             {"style", {{"alpha", c.style.alpha}, {"palette", palette}}},
             {"tap", {{"stride", c.tap.stride}, {"expected_taps", c.tap.expected_taps}}},
             {"adapter", {{"bottleneck_dim", c.adapter.bottleneck_dim}, {"branches", c.adapter.branches}}},
             {"decoder",
              {{"layers", c.decoder.layers},
               {"width", c.decoder.width},
               {"heads", c.decoder.heads},
               {"max_len", c.decoder.max_len}}}};
}

void from_json(const json& j, GenerationConfig& c) {
    c = GenerationConfig{};
    if (j.contains("vision")) {
        const auto& v = j["vision"];
        c.vision.layers = v.value("layers", c.vision.layers);
        c.vision.width = v.value("width", c.vision.width);
        c.vision.heads = v.value("heads", c.vision.heads);
        c.vision.patch_size = v.value("patch_size", c.vision.patch_size);
        c.vision.image_side = v.value("image_side", c.vision.image_side);
    }
    if (j.contains("style")) {
        c.style.alpha = j["style"].value("alpha", c.style.alpha);
        if (j["style"].contains("palette")) {
            c.style.palette.clear();
            for (const auto& [k, v] : j["style"]["palette"].items()) {
                c.style.palette[std::stoi(k)] = {v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(),
                                                 v[2].get<std::uint8_t>()};
            }
        }
    }
    if (j.contains("tap")) {
        c.tap.stride = j["tap"].value("stride", c.tap.stride);
        c.tap.expected_taps = j["tap"].value("expected_taps", c.tap.expected_taps);
    }
    if (j.contains("adapter")) {
        c.adapter.bottleneck_dim = j["adapter"].value("bottleneck_dim", c.adapter.bottleneck_dim);
        c.adapter.branches = j["adapter"].value("branches", c.adapter.branches);
    }
    if (j.contains("decoder")) {
        const auto& d = j["decoder"];
        c.decoder.layers = d.value("layers", c.decoder.layers);
        c.decoder.width = d.value("width", c.decoder.width);
        c.decoder.heads = d.value("heads", c.decoder.heads);
        c.decoder.max_len = d.value("max_len", c.decoder.max_len);
    }
}

Decoder::Decoder(nn::ParamSet& ps, const std::string& name, const DecoderConfig& config, int vocab_size, Rng& rng)
    : config_(config),
      tokens_(ps, name + ".tokens", vocab_size, config.width, rng),
      pos_(&ps.create(name + ".pos", nn::init_normal(config.max_len, config.width, 0.02, rng))),
      ln_final_(ps, name + ".ln_final", config.width),
      lm_head_(ps, name + ".lm_head", config.width, vocab_size, rng) {
    for (int l = 0; l < config.layers; ++l) {
        blocks_.emplace_back(ps, name + ".block" + std::to_string(l), config.width, config.heads, 4 * config.width,
                             false, rng);
    }
}

Var Decoder::embed(std::span<const int> ids) const { return tokens_.forward(ids); }

Var Decoder::forward(const Var& inputs, const Matrix& mask, const retrieval::BlockHook& hook) const {
    if (inputs.rows() > config_.max_len) {
        throw std::invalid_argument("decoder input of " + std::to_string(inputs.rows()) + " tokens exceeds max_len " +
                                    std::to_string(config_.max_len));
    }
    Var h = ad::add(inputs, ad::slice_rows(ad::param(*pos_), 0, inputs.rows()));
    nn::BlockInputs in;
    in.self_mask = &mask;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        h = blocks_[l].forward(h, in);
        if (hook) h = hook(static_cast<int>(l), h);
    }
    return ln_final_.forward(h);
}

Var Decoder::logits(const Var& hidden) const { return lm_head_.forward(hidden); }

namespace {

Rng& seeded(std::uint64_t seed) {
    thread_local Rng rng;
    rng = Rng(seed);
    return rng;
}

}  // namespace

GenerationModel::GenerationModel(const GenerationConfig& config, WordVocab vocab, std::uint64_t init_seed)
    : vision((config.validate(), params), "vision", config.vision, seeded(init_seed)),
      projector(params, "projector", config.vision.width, config.decoder.width, seeded(init_seed ^ 0x77)),
      decoder(params, "decoder", config.decoder, vocab.size(), seeded(init_seed ^ 0x99)),
      router(params, "router", config.decoder.width, config.adapter.branches, seeded(init_seed ^ 0xAA)),
      config_(config),
      vocab_(std::move(vocab)) {
    Rng& rng = seeded(init_seed ^ 0xBB);
    for (int l = 0; l < config.vision.layers; ++l) {
        vision_adapters.emplace_back(params, "adapter.vision" + std::to_string(l), config.vision.width,
                                     config.adapter.bottleneck_dim, rng);
    }
    for (int l = 0; l < config.decoder.layers; ++l) {
        auto& branches = decoder_adapters.emplace_back();
        for (int b = 0; b < config.adapter.branches; ++b) {
            branches.emplace_back(params, "adapter.decoder" + std::to_string(l) + ".branch" + std::to_string(b),
                                  config.decoder.width, config.adapter.bottleneck_dim, rng);
        }
    }
}

bool GenerationModel::is_adapter_param(const std::string& name) {
    return name.starts_with("adapter.") || name.starts_with("projector.") || name.starts_with("router.");
}

bool GenerationModel::is_decoder_param(const std::string& name) { return name.starts_with("decoder."); }

std::vector<Var> extract_cls_sequence(const retrieval::VisionTransformer& vision, const Image& rendered,
                                      const TapConfig& tap, const retrieval::BlockHook& hook) {
    const auto layers = tap_layers(vision.config().layers, tap);
    const auto out = vision.forward(rendered, hook);
    std::vector<Var> cls;
    for (int l : layers) cls.push_back(out.layer_cls[static_cast<std::size_t>(l - 1)]);
    return cls;
}

std::vector<Var> extract_cls_sequence(const GenerationModel& model, const Image& rendered) {
    const retrieval::BlockHook hook = [&model](int layer, const Var& h) {
        return ad::add(h, model.vision_adapters[static_cast<std::size_t>(layer)].forward(h));
    };
    return extract_cls_sequence(model.vision, rendered, model.config().tap, hook);
}

Var project_visual_tokens(const std::vector<Var>& cls_list, const nn::Linear& projector) {
    if (cls_list.empty()) throw std::invalid_argument("no visual tokens to project");
    return projector.forward(ad::concat_rows(cls_list));
}

Prompt assemble_prompt(const Var& visual_tokens, std::string_view instruction, const WordVocab& vocab,
                       const Decoder& decoder) {
    if (visual_tokens.cols() != decoder.config().width) {
        throw std::invalid_argument("visual tokens must match the decoder width");
    }
    const auto words = vocab.encode(instruction);
    if (words.empty()) throw std::invalid_argument("instruction is empty");
    Prompt p;
    const int nv = static_cast<int>(visual_tokens.rows());
    p.visual_begin = 1;
    p.instruction_begin = 1 + nv;
    p.token_ids.push_back(WordVocab::kBos);
    p.token_ids.insert(p.token_ids.end(), static_cast<std::size_t>(nv), -1);
    p.token_ids.insert(p.token_ids.end(), words.begin(), words.end());
    const std::vector<int> bos{WordVocab::kBos};
    const std::vector<Var> parts{decoder.embed(bos), visual_tokens, decoder.embed(words)};
    p.embeddings = ad::concat_rows(parts);
    return p;
}

Var routing_signal(const Var& bos_embedding, const nn::Linear& router) {
    if (bos_embedding.rows() != 1) throw std::invalid_argument("routing expects a single BOS row");
    return ad::softmax_rows(router.forward(bos_embedding));
}

Matrix prefix_causal_mask(Eigen::Index length, Eigen::Index prefix) {
    Matrix m = nn::causal_mask(length);
    const Eigen::Index p = std::min(prefix, length);
    m.topLeftCorner(p, p).setZero();
    return m;
}

Var visual_prefix(const GenerationModel& model, const Image& rendered) {
    return project_visual_tokens(extract_cls_sequence(model, rendered), model.projector);
}

SequenceLogits forward_sequence(const GenerationModel& model, const Var& visual, std::span<const int> target_ids) {
    const Prompt prompt = assemble_prompt(visual, kInstructionTemplate, model.vocab(), model.decoder);
    Var inputs = prompt.embeddings;
    if (!target_ids.empty()) {
        const std::vector<Var> parts{inputs, model.decoder.embed(target_ids)};
        inputs = ad::concat_rows(parts);
    }
    SequenceLogits out;
    out.prompt_len = static_cast<int>(prompt.token_ids.size());
    const Matrix mask = prefix_causal_mask(inputs.rows(), out.prompt_len);
    const retrieval::BlockHook hook = [&](int layer, const Var& h) {
        const Var w = routing_signal(ad::slice_rows(h, 0, 1), model.router);
        out.routing.push_back(w);
        Var mixed = h;
        const auto& branches = model.decoder_adapters[static_cast<std::size_t>(layer)];
        for (std::size_t b = 0; b < branches.size(); ++b) {
            mixed = ad::add(mixed, ad::scale_by(branches[b].forward(h), ad::slice_cols(w, static_cast<Eigen::Index>(b), 1)));
        }
        return mixed;
    };
    out.logits = model.decoder.logits(model.decoder.forward(inputs, mask, hook));
    return out;
}

Image render_for_generation(const GenerationConfig& config, const data::Sample& sample, const Image& base) {
    Rng unused(0);
    return prep::prepare_model_input(base, sample.entities, config.style, config.geom(), unused, false);
}

void DecodeConfig::validate() const {
    if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
    if (strategy == Strategy::Beam && beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
}

namespace {

Eigen::VectorXd last_log_probs(const GenerationModel& model, const Var& visual, const std::vector<int>& ids) {
    const auto seq = forward_sequence(model, visual, ids);
    const Eigen::VectorXd row = seq.logits.value().row(seq.logits.rows() - 1).transpose();
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    return row.array() - lse;
}

int argmax(const Eigen::VectorXd& v) {
    Eigen::Index best = 0;
    v.maxCoeff(&best);
    return static_cast<int>(best);
}

}  // namespace

std::string generate_explanation(const GenerationModel& model, const Image& rendered, const DecodeConfig& decode) {
    decode.validate();
    ad::NoGradGuard guard;
    const Var visual = visual_prefix(model, rendered);
    const int prompt_len = 1 + static_cast<int>(visual.rows()) +
                           static_cast<int>(model.vocab().encode(kInstructionTemplate).size());
    const int budget = std::min(decode.max_new_tokens, model.config().decoder.max_len - prompt_len);

    if (decode.strategy == DecodeConfig::Strategy::Greedy) {
        std::vector<int> ids;
        for (int step = 0; step < budget; ++step) {
            const int next = argmax(last_log_probs(model, visual, ids));
            if (next == WordVocab::kEos) break;
            ids.push_back(next);
        }
        return model.vocab().decode(ids);
    }

    struct Beam {
        std::vector<int> ids;
        double logp = 0.0;
        bool done = false;
    };
    auto norm_score = [](const Beam& b) { return b.logp / static_cast<double>(b.ids.size() + 1); };
    std::vector<Beam> beams{Beam{}};
    for (int step = 0; step < budget; ++step) {
        std::vector<Beam> next;
        for (const auto& b : beams) {
            if (b.done) {
                next.push_back(b);
                continue;
            }
            const Eigen::VectorXd lp = last_log_probs(model, visual, b.ids);
            std::vector<int> order(static_cast<std::size_t>(lp.size()));
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            const auto k = std::min<std::size_t>(static_cast<std::size_t>(decode.beam_size), order.size());
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                              [&](int a, int c) { return lp(a) > lp(c) || (lp(a) == lp(c) && a < c); });
            for (std::size_t i = 0; i < k; ++i) {
                Beam nb = b;
                nb.logp += lp(order[i]);
                if (order[i] == WordVocab::kEos) {
                    nb.done = true;
                } else {
                    nb.ids.push_back(order[i]);
                }
                next.push_back(std::move(nb));
            }
        }
        std::stable_sort(next.begin(), next.end(),
                         [&](const Beam& a, const Beam& c) { return norm_score(a) > norm_score(c); });
        if (next.size() > static_cast<std::size_t>(decode.beam_size)) next.resize(static_cast<std::size_t>(decode.beam_size));
        beams = std::move(next);
        if (std::all_of(beams.begin(), beams.end(), [](const Beam& b) { return b.done; })) break;
    }
    return model.vocab().decode(beams.front().ids);
}

void load_vision_from_retrieval(GenerationModel& model, const std::filesystem::path& retrieval_ckpt) {
    const auto rc = retrieval::read_checkpoint_config(retrieval_ckpt);
    const auto& a = rc.backbone.vision;
    const auto& b = model.config().vision;
    if (a.layers != b.layers || a.width != b.width || a.heads != b.heads || a.patch_size != b.patch_size ||
        a.image_side != b.image_side) {
        throw std::invalid_argument("retrieval checkpoint vision config differs from the generation config");
    }
    const auto loaded = model.params.load_matching(read_file(retrieval_ckpt / "params.bin"), "vision.", "vision.");
    std::size_t expected = 0;
    for (const auto* p : model.params.all()) expected += p->name.starts_with("vision.") ? 1 : 0;
    if (loaded != expected) {
        throw std::runtime_error("retrieval checkpoint provided " + std::to_string(loaded) + " of " +
                                 std::to_string(expected) + " vision parameters");
    }
}

void save_generation_checkpoint(const GenerationModel& model, const std::filesystem::path& dir, const json& extra) {
    std::filesystem::create_directories(dir);
    json cfg = {{"model", model.config()}, {"instruction_version", std::string(kInstructionVersion)}};
    for (const auto& [k, v] : extra.items()) cfg[k] = v;
    write_file_atomic(dir / "config.json", cfg.dump(2) + "\n");
    write_file_atomic(dir / "vocab.txt", model.vocab().serialize());
    write_file_atomic(dir / "params.bin", model.params.serialize());
}

std::unique_ptr<GenerationModel> load_generation_checkpoint(const std::filesystem::path& dir) {
    const auto cfg_path = dir / "config.json";
    if (!std::filesystem::exists(cfg_path)) throw data::DataError("generation checkpoint lacks " + cfg_path.string());
    const json j = json::parse(read_file(cfg_path));
    if (j.value("instruction_version", "") != kInstructionVersion) {
        throw std::runtime_error("checkpoint was trained with a different instruction template");
    }
    auto model = std::make_unique<GenerationModel>(j.at("model").get<GenerationConfig>(),
                                                   WordVocab::parse(read_file(dir / "vocab.txt")), 0);
    model->params.deserialize(read_file(dir / "params.bin"));
    return model;
}

}  // namespace hazard::gen
