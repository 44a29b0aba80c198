#include "hazard/cli/pipeline.hpp"

#include "hazard/common/hash.hpp"
#include "hazard/common/io.hpp"
#include "hazard/evaluation/predictions.hpp"
#include "hazard/generation/prompts.hpp"
#include "hazard/zeroshot/zeroshot.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace hazard::cli {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path corpus_file(const fs::path& corpus) {
    const fs::path file = fs::is_directory(corpus) ? corpus / "corpus.jsonl" : corpus;
    if (!fs::exists(file)) throw data::DataError("corpus not found: " + file.string());
    return file;
}

data::Corpus load_corpus_at(const fs::path& corpus) { return data::load_corpus(corpus_file(corpus)); }

data::Split parse_split_name(const std::string& s) {
    if (s == "train") return data::Split::Train;
    if (s == "val") return data::Split::Val;
    if (s == "test") return data::Split::Test;
    throw UsageError("split must be train, val or test, got '" + s + "'");
}

std::vector<std::string> read_id_list(const fs::path& file) {
    if (!fs::exists(file)) throw data::DataError("id list not found: " + file.string());
    std::istringstream in(read_file(file));
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        ids.push_back(line);
    }
    if (ids.empty()) throw data::DataError("id list " + file.string() + " is empty");
    return ids;
}

namespace {

data::ImageSource images_for(const fs::path& corpus) { return data::disk_image_source(corpus_file(corpus).parent_path()); }

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

}  // namespace

fs::path synth_stage(const data::SynthSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
    return data::write_synthetic(data::synthesize_corpus(spec, seed), out_dir);
}

retrieval::TrainResult retrieval_train_stage(const fs::path& corpus, const retrieval::RetrievalConfig& model_cfg,
                                             const retrieval::TrainConfig& train, std::uint64_t init_seed,
                                             const fs::path& out_ckpt, const json& provenance, std::ostream& log) {
    const auto c = load_corpus_at(corpus);
    retrieval::RetrievalModel model(model_cfg, init_seed);
    const auto result = retrieval::train_retrieval(model, c, images_for(corpus), train, [&](const retrieval::EpochLog& e) {
        log << "  epoch " << e.epoch << " itc=" << fmt(e.itc) << " itm=" << fmt(e.itm_t2i) << "/" << fmt(e.itm_i2t)
            << " total=" << fmt(e.total);
        if (e.train_r1_tr) log << " train_r1=" << fmt(*e.train_r1_tr, 3) << "/" << fmt(*e.train_r1_ir, 3);
        if (e.truncated_texts > 0) log << " truncated=" << e.truncated_texts;
        log << "\n";
    });
    json extra = provenance;
    extra["train"] = train;
    extra["epochs_run"] = result.log.size();
    extra["stopped_early"] = result.stopped_early;
    retrieval::save_checkpoint(model, out_ckpt, result.rng_state, extra);
    return result;
}

std::vector<fs::path> retrieval_score_stage(const fs::path& ckpt, const fs::path& corpus,
                                            const std::vector<std::string>& ids,
                                            const std::vector<eval::Direction>& directions, const fs::path& out_prefix) {
    if (ids.empty()) throw data::DataError("no samples to score");
    if (directions.empty()) throw UsageError("no scoring direction requested");
    const auto model = retrieval::load_checkpoint(ckpt);
    const auto c = load_corpus_at(corpus);
    const auto items = retrieval::scoring_items(*model, c, ids, images_for(corpus));
    std::vector<fs::path> written;
    for (const auto d : directions) {
        fs::path out = out_prefix;
        if (directions.size() > 1) {
            out = out_prefix.parent_path() /
                  (out_prefix.stem().string() + "." + std::string(eval::to_string(d)) + out_prefix.extension().string());
        }
        retrieval::write_score_tsv(out, retrieval::score_matrix(*model, items, d));
        written.push_back(out);
    }
    return written;
}

std::vector<eval::RetrievalRow> retrieval_eval_stage(const std::vector<fs::path>& score_files,
                                                     const std::string& model_name) {
    std::vector<eval::RetrievalRow> rows;
    for (const auto& f : score_files) {
        if (!fs::exists(f)) throw data::DataError("score file not found: " + f.string());
        const auto m = retrieval::read_score_tsv(f);
        rows.push_back({model_name, m.direction, eval::retrieval_metrics(m, eval::kDefaultRecallKs)});
    }
    return rows;
}

gen::GenTrainResult gen_train_stage(const fs::path& corpus, const gen::GenerationConfig& config,
                                    const std::optional<fs::path>& init_vision,
                                    const gen::DecoderPretrainConfig& pretrain, const gen::GenTrainConfig& train,
                                    std::uint64_t init_seed, const fs::path& out_ckpt, const json& provenance,
                                    std::ostream& log) {
    const auto c = load_corpus_at(corpus);
    gen::GenerationModel model(config, gen::corpus_vocab(c), init_seed);
    if (init_vision) gen::load_vision_from_retrieval(model, *init_vision);
    std::vector<std::string> texts;
    for (const auto* s : c.in_split(data::Split::Train)) texts.push_back(s->hazard);
    log << "  decoder pretraining on " << texts.size() << " texts\n";
    gen::pretrain_decoder(model, texts, pretrain, [&](const gen::GenEpochLog& e) {
        if (e.epoch % 5 == 0 || e.epoch == pretrain.epochs) log << "  lm epoch " << e.epoch << " loss=" << fmt(e.loss) << "\n";
    });
    const auto result = gen::train_generation(model, c, images_for(corpus), train, [&](const gen::GenEpochLog& e) {
        log << "  epoch " << e.epoch << " loss=" << fmt(e.loss) << " ppl=" << fmt(e.perplexity, 3) << "\n";
    });
    json extra = provenance;
    extra["frozen_sha256"] = result.frozen_hash_after;
    extra["epochs_run"] = result.log.size();
    gen::save_generation_checkpoint(model, out_ckpt, extra);
    return result;
}

eval::TextById gen_infer_stage(const fs::path& ckpt, const fs::path& corpus, data::Split split,
                               const gen::DecodeConfig& decode) {
    const auto model = gen::load_generation_checkpoint(ckpt);
    const auto c = load_corpus_at(corpus);
    const auto images = images_for(corpus);
    const auto samples = c.in_split(split);
    if (samples.empty()) throw data::DataError("split " + std::string(data::to_string(split)) + " is empty");
    eval::TextById preds;
    for (const auto* s : samples) {
        const Image rendered = gen::render_for_generation(model->config(), *s, images(*s));
        preds[s->id] = gen::generate_explanation(*model, rendered, decode);
    }
    return preds;
}

ZeroShotRun zeroshot_stage(eval::ChatClient& client, const fs::path& corpus, data::Split split, const fs::path& cache_dir) {
    const auto c = load_corpus_at(corpus);
    const auto images = images_for(corpus);
    const auto samples = c.in_split(split);
    if (samples.empty()) throw data::DataError("split " + std::string(data::to_string(split)) + " is empty");
    ZeroShotRun run;
    const zeroshot::VlmRunConfig cfg{cache_dir, {}};
    for (const auto* s : samples) {
        const auto prompt = zeroshot::build_zeroshot_prompt(*s, images(*s), zeroshot::ZeroShotContext::from_sample(*s));
        const auto r = zeroshot::query_external_vlm(client, prompt, cfg);
        run.predictions[s->id] = r.text.value_or("");
        if (!r.text) run.failures.push_back(s->id + ": " + r.error);
    }
    return run;
}

GenerationEval generation_eval_stage(const eval::TextById& predictions, const fs::path& corpus,
                                     const std::string& model_name, eval::ChatClient* judge, const fs::path& judge_cache,
                                     int judge_concurrency) {
    const auto c = load_corpus_at(corpus);
    eval::TextById refs;
    for (const auto& [id, text] : predictions) {
        const auto* s = c.find(id);
        if (s == nullptr) throw data::DataError("prediction id " + id + " is not in the corpus");
        refs[id] = s->hazard;
    }
    GenerationEval out;
    out.row.model = model_name;
    out.row.captions = eval::caption_metrics(predictions, refs);
    if (judge != nullptr) {
        std::vector<eval::JudgePair> pairs;
        for (const auto& [id, text] : predictions) pairs.push_back({id, refs.at(id), text});
        eval::JudgeConfig jc;
        jc.cache_dir = judge_cache;
        jc.max_concurrency = judge_concurrency;
        const auto r = eval::run_judge(*judge, pairs, jc);
        out.row.judge_mean = r.mean;
        out.row.judge_scored = static_cast<int>(r.scores.size());
        out.row.judge_failed_batches = static_cast<int>(r.failures.size());
        out.judge_failures = r.failures;
    }
    return out;
}

std::unique_ptr<eval::ChatClient> make_judge_client(ClientMode mode, const std::string& model) {
    switch (mode) {
        case ClientMode::Off: return nullptr;
        case ClientMode::Mock:
            return std::make_unique<eval::ScriptedClient>(
                "mock-judge", [](const eval::ChatRequest& r, int) { return eval::mock_judge_response(r); });
        case ClientMode::Live: {
            eval::HttpClientConfig cfg;
            cfg.model = model;
            return std::make_unique<eval::HttpChatClient>(cfg);
        }
    }
    return nullptr;
}

std::unique_ptr<eval::ChatClient> make_vlm_client(ClientMode mode, const std::string& model) {
    switch (mode) {
        case ClientMode::Off: return nullptr;
        case ClientMode::Mock:
            return std::make_unique<eval::ScriptedClient>(
                "mock-vlm", [](const eval::ChatRequest& r, int) { return zeroshot::mock_vlm_response(r); });
        case ClientMode::Live: {
            eval::HttpClientConfig cfg;
            cfg.model = model;
            return std::make_unique<eval::HttpChatClient>(cfg);
        }
    }
    return nullptr;
}

void write_retrieval_metrics(const fs::path& file, const std::vector<eval::RetrievalRow>& rows,
                             const std::string& config_hash) {
    json arr = json::array();
    for (const auto& r : rows) {
        json recall = json::object();
        for (const auto& [k, v] : r.metrics.recall_at) recall[std::to_string(k)] = v;
        arr.push_back({{"model", r.model},
                       {"direction", eval::to_string(r.direction)},
                       {"mean_rank", r.metrics.mean_rank},
                       {"recall_at", recall}});
    }
    write_file_atomic(file, json{{"config_sha256", config_hash}, {"rows", arr}}.dump(2) + "\n");
}

std::vector<eval::RetrievalRow> read_retrieval_metrics(const fs::path& file) {
    const json j = json::parse(read_file(file));
    std::vector<eval::RetrievalRow> rows;
    for (const auto& r : j.at("rows")) {
        eval::RetrievalRow row;
        row.model = r.at("model").get<std::string>();
        row.direction = eval::parse_direction(r.at("direction").get<std::string>());
        row.metrics.mean_rank = r.at("mean_rank").get<double>();
        for (const auto& [k, v] : r.at("recall_at").items()) row.metrics.recall_at[std::stoi(k)] = v.get<double>();
        rows.push_back(row);
    }
    return rows;
}

void write_generation_metrics(const fs::path& file, const std::vector<eval::GenerationRow>& rows,
                              const std::string& config_hash) {
    json arr = json::array();
    for (const auto& g : rows) {
        json r = {{"model", g.model},
                  {"bleu4", g.captions.bleu4},
                  {"rouge_l", g.captions.rouge_l},
                  {"cider_d", g.captions.cider_d},
                  {"note", g.captions.note},
                  {"judge_scored", g.judge_scored},
                  {"judge_failed_batches", g.judge_failed_batches}};
        if (g.captions.spice) r["spice"] = *g.captions.spice;
        if (g.captions.spider) r["spider"] = *g.captions.spider;
        if (g.judge_mean) r["judge_mean"] = *g.judge_mean;
        arr.push_back(r);
    }
    write_file_atomic(file, json{{"config_sha256", config_hash}, {"rows", arr}}.dump(2) + "\n");
}

std::vector<eval::GenerationRow> read_generation_metrics(const fs::path& file) {
    const json j = json::parse(read_file(file));
    std::vector<eval::GenerationRow> rows;
    for (const auto& r : j.at("rows")) {
        eval::GenerationRow g;
        g.model = r.at("model").get<std::string>();
        g.captions.bleu4 = r.at("bleu4").get<double>();
        g.captions.rouge_l = r.at("rouge_l").get<double>();
        g.captions.cider_d = r.at("cider_d").get<double>();
        g.captions.note = r.value("note", "");
        if (r.contains("spice")) g.captions.spice = r["spice"].get<double>();
        if (r.contains("spider")) g.captions.spider = r["spider"].get<double>();
        if (r.contains("judge_mean")) g.judge_mean = r["judge_mean"].get<double>();
        g.judge_scored = r.value("judge_scored", 0);
        g.judge_failed_batches = r.value("judge_failed_batches", 0);
        rows.push_back(g);
    }
    return rows;
}

eval::Report report_stage(const fs::path& run_dir, const std::map<std::string, std::string>& config_hashes,
                          const std::vector<std::string>& notes) {
    const auto rfile = run_dir / "retrieval_metrics.json";
    const auto gfile = run_dir / "generation_metrics.json";
    if (!fs::exists(rfile) && !fs::exists(gfile)) {
        throw StageError("report", "missing upstream artifact: no metrics files in " + run_dir.string());
    }
    eval::ReportBundle b;
    b.config_hashes = config_hashes;
    if (fs::exists(rfile)) b.retrieval = read_retrieval_metrics(rfile);
    if (fs::exists(gfile)) b.generation = read_generation_metrics(gfile);
    b.notes = notes;
    auto report = eval::emit_report(b);
    write_file_atomic(run_dir / "report.md", report.markdown);
    write_file_atomic(run_dir / "report.tsv", report.tsv);
    return report;
}

}  // namespace hazard::cli
