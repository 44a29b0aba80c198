#include "hazard/cli/pipeline.hpp"

#include "hazard/common/hash.hpp"
#include "hazard/common/io.hpp"
#include "hazard/evaluation/predictions.hpp"

#include <chrono>
#include <ostream>

namespace hazard::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Paths {
    fs::path out;
    fs::path retrieval_ckpt() const { return out / "retrieval_ckpt"; }
    fs::path scores_prefix() const { return out / "scores.tsv"; }
    std::vector<fs::path> score_files() const { return {out / "scores.TR.tsv", out / "scores.IR.tsv"}; }
    fs::path retrieval_metrics() const { return out / "retrieval_metrics.json"; }
    fs::path generation_ckpt() const { return out / "generation_ckpt"; }
    fs::path preds() const { return out / "preds.tsv"; }
    fs::path zeroshot_preds() const { return out / "zeroshot_preds.tsv"; }
    fs::path generation_metrics() const { return out / "generation_metrics.json"; }
};

void require(const fs::path& artifact, const std::string& stage) {
    if (!fs::exists(artifact)) throw StageError(stage, "missing upstream artifact " + artifact.string());
}

std::vector<std::string> split_ids(const data::Corpus& c, data::Split split) {
    std::vector<std::string> ids;
    for (const auto* s : c.in_split(split)) ids.push_back(s->id);
    return ids;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, std::ostream& log) {
    const Paths paths{config.output_dir};
    fs::create_directories(paths.out);
    const std::string run_hash = config.hash();
    json snapshot = config.to_json();
    snapshot["config_sha256"] = run_hash;
    write_file_atomic(paths.out / "run_config.json", snapshot.dump(2) + "\n");
    const json provenance = {{"config_sha256", run_hash}};
    const data::Split split = parse_split_name(config.split);

    const std::map<std::string, std::string> hashes = {{"run", run_hash},
                                                       {"retrieval", config.stage_hash("retrieval")},
                                                       {"generation", config.stage_hash("generation")},
                                                       {"judge", config.stage_hash("judge")}};
    std::vector<std::string> notes;
    if (config.synth) notes.push_back("Corpus synthesized from seed " + std::to_string(config.seed));
    notes.push_back("Scored split: " + config.split);
    notes.push_back("LLM judge: " + to_string(config.judge) +
                    (config.judge == ClientMode::Mock ? " (offline ROUGE-L stand-in)" : ""));

    PipelineResult result;
    for (const auto& stage : config.stages) {
        log << "[" << stage << "] start\n" << std::flush;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (stage == "data.synth") {
                if (!config.synth) throw StageError(stage, "config has no corpus.synth section");
                synth_stage(*config.synth, config.seed, config.corpus_root);
            } else if (stage == "retrieval.train") {
                retrieval_train_stage(config.corpus_root, config.retrieval, config.retrieval_train, config.seed,
                                      paths.retrieval_ckpt(), provenance, log);
            } else if (stage == "retrieval.score") {
                require(paths.retrieval_ckpt() / "config.json", stage);
                const auto ids = config.subset_file ? read_id_list(*config.subset_file)
                                                    : split_ids(load_corpus_at(config.corpus_root), split);
                retrieval_score_stage(paths.retrieval_ckpt(), config.corpus_root, ids,
                                      {eval::Direction::TR, eval::Direction::IR}, paths.scores_prefix());
            } else if (stage == "eval.retrieval") {
                for (const auto& f : paths.score_files()) require(f, stage);
                write_retrieval_metrics(paths.retrieval_metrics(),
                                        retrieval_eval_stage(paths.score_files(), "dual-encoder+aux"), run_hash);
            } else if (stage == "gen.train") {
                require(paths.retrieval_ckpt() / "config.json", stage);
                gen_train_stage(config.corpus_root, config.generation, paths.retrieval_ckpt(), config.decoder_pretrain,
                                config.generation_train, config.seed, paths.generation_ckpt(), provenance, log);
            } else if (stage == "gen.infer") {
                require(paths.generation_ckpt() / "config.json", stage);
                eval::write_predictions_tsv(paths.preds(),
                                            gen_infer_stage(paths.generation_ckpt(), config.corpus_root, split, config.decode));
            } else if (stage == "zeroshot.run") {
                auto client = make_vlm_client(config.zeroshot, config.zeroshot_model);
                if (!client) {
                    log << "  zero-shot client is off; skipped\n";
                } else {
                    const auto run = zeroshot_stage(*client, config.corpus_root, split, paths.out / "vlm_cache");
                    eval::write_predictions_tsv(paths.zeroshot_preds(), run.predictions);
                    for (const auto& f : run.failures) log << "  failed " << f << "\n";
                    if (!run.failures.empty()) {
                        notes.push_back("Zero-shot: " + std::to_string(run.failures.size()) +
                                        " sample(s) failed and score as empty text");
                    }
                }
            } else if (stage == "eval.generation") {
                std::vector<std::pair<fs::path, std::string>> sources;
                if (fs::exists(paths.preds())) sources.emplace_back(paths.preds(), "adapter-decoder");
                if (fs::exists(paths.zeroshot_preds())) {
                    sources.emplace_back(paths.zeroshot_preds(), "zeroshot:" + config.zeroshot_model);
                }
                if (sources.empty()) throw StageError(stage, "missing upstream artifact: no predictions in " + paths.out.string());
                auto judge = make_judge_client(config.judge, config.judge_model);
                std::vector<eval::GenerationRow> rows;
                for (const auto& [file, name] : sources) {
                    const auto ge = generation_eval_stage(eval::read_predictions_tsv(file), config.corpus_root, name,
                                                          judge.get(), paths.out / "judge_cache", config.judge_concurrency);
                    for (const auto& f : ge.judge_failures) log << "  judge failure: " << f << "\n";
                    rows.push_back(ge.row);
                }
                write_generation_metrics(paths.generation_metrics(), rows, run_hash);
            } else if (stage == "report") {
                report_stage(paths.out, hashes, notes);
                result.report_markdown = paths.out / "report.md";
            } else {
                throw UsageError("unknown stage '" + stage + "'");
            }
        } catch (const data::DataError&) {
            throw;
        } catch (const StageError&) {
            throw;
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(stage, e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << "[" << stage << "] done in " << static_cast<int>(secs * 10.0) / 10.0 << " s\n" << std::flush;
        result.stages_run.push_back(stage);
    }
    return result;
}

}  // namespace hazard::cli
