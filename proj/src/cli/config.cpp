#include "hazard/cli/pipeline.hpp"

#include "hazard/common/hash.hpp"
#include "hazard/common/io.hpp"

#include <algorithm>

namespace hazard::cli {

using nlohmann::json;
namespace fs = std::filesystem;

ClientMode parse_client_mode(const std::string& s) {
    if (s == "off") return ClientMode::Off;
    if (s == "mock") return ClientMode::Mock;
    if (s == "live") return ClientMode::Live;
    throw UsageError("client mode must be off, mock or live, got '" + s + "'");
}

std::string to_string(ClientMode m) {
    switch (m) {
        case ClientMode::Off: return "off";
        case ClientMode::Mock: return "mock";
        case ClientMode::Live: return "live";
    }
    return "off";
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json pretrain_json(const gen::DecoderPretrainConfig& c) {
    return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}

json gen_train_json(const gen::GenTrainConfig& c) {
    return {{"epochs", c.epochs},   {"effective_batch", c.effective_batch}, {"learning_rate", c.learning_rate},
            {"warmup_steps", c.warmup_steps}, {"seed", c.seed}, {"augment", c.augment}};
}

json decode_json(const gen::DecodeConfig& c) {
    return {{"strategy", c.strategy == gen::DecodeConfig::Strategy::Beam ? "beam" : "greedy"},
            {"beam_size", c.beam_size},
            {"max_new_tokens", c.max_new_tokens}};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw UsageError("run config must be a JSON object");
    static const std::vector<std::string> known = {
        "seed",       "corpus",           "output_dir", "stages",     "split",          "subset",
        "retrieval",  "retrieval_train",  "generation", "decoder_pretrain", "generation_train", "decode",
        "judge",      "zeroshot"};
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) throw UsageError("unknown config key '" + k + "'");
    }
    RunConfig c;
    try {
        read_if(j, "seed", c.seed);
        if (!j.contains("corpus") || !j["corpus"].contains("root")) throw UsageError("config is missing corpus.root");
        c.corpus_root = resolve(base_dir, j["corpus"]["root"].get<std::string>());
        if (j["corpus"].contains("synth")) {
            const auto& s = j["corpus"]["synth"];
            data::SynthSpec spec;
            read_if(s, "train", spec.train);
            read_if(s, "val", spec.val);
            read_if(s, "test", spec.test);
            read_if(s, "width", spec.dims.width);
            read_if(s, "height", spec.dims.height);
            c.synth = spec;
        }
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        else c.output_dir = base_dir / "run";
        if (j.contains("stages")) {
            c.stages = j["stages"].get<std::vector<std::string>>();
            for (const auto& s : c.stages) {
                if (std::find(kKnownStages.begin(), kKnownStages.end(), s) == kKnownStages.end()) {
                    throw UsageError("unknown stage '" + s + "'");
                }
            }
        }
        read_if(j, "split", c.split);
        parse_split_name(c.split);
        if (j.contains("subset")) c.subset_file = resolve(base_dir, j["subset"].get<std::string>());

        c.retrieval_train.seed = c.seed;
        c.generation_train.seed = c.seed;
        c.decoder_pretrain.seed = c.seed;
        if (j.contains("retrieval")) c.retrieval = j["retrieval"].get<retrieval::RetrievalConfig>();
        if (j.contains("retrieval_train")) {
            c.retrieval_train = j["retrieval_train"].get<retrieval::TrainConfig>();
            if (!j["retrieval_train"].contains("seed")) c.retrieval_train.seed = c.seed;
        }
        if (j.contains("generation")) c.generation = j["generation"].get<gen::GenerationConfig>();
        if (j.contains("decoder_pretrain")) {
            const auto& p = j["decoder_pretrain"];
            read_if(p, "epochs", c.decoder_pretrain.epochs);
            read_if(p, "batch_size", c.decoder_pretrain.batch_size);
            read_if(p, "learning_rate", c.decoder_pretrain.learning_rate);
            read_if(p, "seed", c.decoder_pretrain.seed);
        }
        if (j.contains("generation_train")) {
            const auto& g = j["generation_train"];
            read_if(g, "epochs", c.generation_train.epochs);
            read_if(g, "effective_batch", c.generation_train.effective_batch);
            read_if(g, "learning_rate", c.generation_train.learning_rate);
            read_if(g, "warmup_steps", c.generation_train.warmup_steps);
            read_if(g, "seed", c.generation_train.seed);
            read_if(g, "augment", c.generation_train.augment);
        }
        if (j.contains("decode")) {
            const auto& d = j["decode"];
            if (d.contains("strategy")) {
                const auto s = d["strategy"].get<std::string>();
                if (s != "greedy" && s != "beam") throw UsageError("decode.strategy must be greedy or beam");
                c.decode.strategy = s == "beam" ? gen::DecodeConfig::Strategy::Beam : gen::DecodeConfig::Strategy::Greedy;
            }
            read_if(d, "beam_size", c.decode.beam_size);
            read_if(d, "max_new_tokens", c.decode.max_new_tokens);
        }
        if (j.contains("judge")) {
            const auto& jj = j["judge"];
            if (jj.contains("client")) c.judge = parse_client_mode(jj["client"].get<std::string>());
            read_if(jj, "model", c.judge_model);
            read_if(jj, "concurrency", c.judge_concurrency);
        }
        if (j.contains("zeroshot")) {
            const auto& z = j["zeroshot"];
            if (z.contains("client")) c.zeroshot = parse_client_mode(z["client"].get<std::string>());
            read_if(z, "model", c.zeroshot_model);
        }
        c.retrieval_train.validate();
        c.generation.validate();
        c.generation_train.validate();
        c.decode.validate();
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed run config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("invalid run config: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& file) {
    if (!fs::exists(file)) throw UsageError("config file not found: " + file.string());
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw UsageError("config " + file.string() + " is not valid JSON: " + e.what());
    }
    return from_json(j, file.parent_path());
}

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["corpus"] = {{"root", corpus_root.string()}};
    if (synth) {
        j["corpus"]["synth"] = {{"train", synth->train},
                                {"val", synth->val},
                                {"test", synth->test},
                                {"width", synth->dims.width},
                                {"height", synth->dims.height}};
    }
    j["output_dir"] = output_dir.string();
    j["stages"] = stages;
    j["split"] = split;
    if (subset_file) j["subset"] = subset_file->string();
    j["retrieval"] = retrieval;
    j["retrieval_train"] = retrieval_train;
    j["generation"] = generation;
    j["decoder_pretrain"] = pretrain_json(decoder_pretrain);
    j["generation_train"] = gen_train_json(generation_train);
    j["decode"] = decode_json(decode);
    j["judge"] = {{"client", cli::to_string(judge)}, {"model", judge_model}, {"concurrency", judge_concurrency}};
    j["zeroshot"] = {{"client", cli::to_string(zeroshot)}, {"model", zeroshot_model}};
    return j;
}

std::string RunConfig::hash() const {
    json j = to_json();
    j.erase("output_dir");
    j["corpus"].erase("root");
    if (subset_file) j["subset"] = sha256_hex(read_file(*subset_file));
    j["judge"].erase("concurrency");
    return sha256_hex(j.dump());
}

std::string RunConfig::stage_hash(const std::string& section) const {
    const json j = to_json();
    json part;
    if (section == "retrieval") {
        part = {j["seed"], j["corpus"].value("synth", json()), j["retrieval"], j["retrieval_train"]};
    } else if (section == "generation") {
        part = {j["seed"], j["corpus"].value("synth", json()), j["retrieval"], j["retrieval_train"], j["generation"],
                j["decoder_pretrain"], j["generation_train"], j["decode"]};
    } else if (section == "judge") {
        part = {j["judge"]["client"], j["judge"]["model"], std::string(eval::kJudgePromptVersion)};
    } else {
        throw std::invalid_argument("unknown config section " + section);
    }
    return sha256_hex(part.dump());
}

}  // namespace hazard::cli
