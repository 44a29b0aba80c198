#include "hazard/cli/pipeline.hpp"
#include "hazard/common/io.hpp"
#include "hazard/evaluation/predictions.hpp"
#include "hazard/preprocess/preprocess.hpp"
#include "hazard/zeroshot/zeroshot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hazard;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kStage = 3 };

void report_error(const std::string& kind, const std::string& message, const std::string& stage = {}) {
    json e = {{"error", kind}, {"message", message}};
    if (!stage.empty()) e["stage"] = stage;
    std::cerr << e.dump() << "\n";
}

// Reads the model sections of a run-config style JSON file; the corpus
// location always comes from the command line.
cli::RunConfig section_config(const std::string& file, const fs::path& corpus) {
    json j = json::object();
    fs::path base = fs::current_path();
    if (!file.empty()) {
        if (!fs::exists(file)) throw cli::UsageError("config file not found: " + file);
        try {
            j = json::parse(read_file(file));
        } catch (const json::exception& e) {
            throw cli::UsageError("config " + file + " is not valid JSON: " + e.what());
        }
        base = fs::path(file).parent_path();
    }
    j["corpus"] = {{"root", fs::absolute(corpus).string()}};
    return cli::RunConfig::from_json(j, base);
}

std::vector<eval::Direction> parse_directions(const std::string& s) {
    if (s == "both") return {eval::Direction::TR, eval::Direction::IR};
    try {
        return {eval::parse_direction(s)};
    } catch (const std::exception&) {
        throw cli::UsageError("direction must be TR, IR or both, got '" + s + "'");
    }
}

void print_retrieval(const std::vector<eval::RetrievalRow>& rows) {
    std::cout << "model\tdirection\tR@1\tR@5\tR@10\tmean_rank\n";
    for (const auto& r : rows) {
        std::cout << r.model << "\t" << eval::to_string(r.direction) << std::fixed << std::setprecision(1);
        for (const auto& [k, v] : r.metrics.recall_at) std::cout << "\t" << v * 100.0;
        std::cout << "\t" << std::setprecision(2) << r.metrics.mean_rank << "\n";
    }
}

void print_generation(const eval::GenerationRow& r) {
    std::cout << std::fixed << std::setprecision(2) << "model\t" << r.model << "\nBLEU-4\t" << r.captions.bleu4
              << "\nROUGE-L\t" << r.captions.rouge_l << "\nCIDEr-D\t" << r.captions.cider_d << "\n";
    if (r.captions.spider) std::cout << "SPIDEr\t" << *r.captions.spider << "\n";
    if (r.judge_mean) std::cout << "LLM judge\t" << *r.judge_mean << " (" << r.judge_scored << " scored)\n";
    if (!r.captions.note.empty()) std::cout << "note\t" << r.captions.note << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hazard explanation benchmark toolkit"};
    app.require_subcommand(1);
    std::function<void()> action;

    // data
    auto* data_cmd = app.add_subcommand("data", "Corpus validation, synthesis and subsets");
    data_cmd->require_subcommand(1);

    std::string validate_corpus;
    auto* validate = data_cmd->add_subcommand("validate", "Load a corpus and check every sample");
    validate->add_option("corpus", validate_corpus, "Corpus directory or corpus.jsonl")->required();
    validate->callback([&] {
        action = [&] {
            const auto c = cli::load_corpus_at(validate_corpus);
            std::map<std::string, int> per_split;
            for (const auto& s : c.samples) ++per_split[std::string(data::to_string(s.split))];
            std::cout << "ok\t" << c.samples.size() << " samples";
            for (const auto& [k, v] : per_split) std::cout << "\t" << k << "=" << v;
            std::cout << "\n";
        };
    });

    data::SynthSpec synth_spec;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth = data_cmd->add_subcommand("synth", "Write a synthetic corpus");
    synth->add_option("--train", synth_spec.train)->check(CLI::NonNegativeNumber);
    synth->add_option("--val", synth_spec.val)->check(CLI::NonNegativeNumber);
    synth->add_option("--test", synth_spec.test)->check(CLI::NonNegativeNumber);
    synth->add_option("--width", synth_spec.dims.width)->check(CLI::PositiveNumber);
    synth->add_option("--height", synth_spec.dims.height)->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->callback([&] {
        action = [&] { std::cout << cli::synth_stage(synth_spec, synth_seed, synth_out).string() << "\n"; };
    });

    std::string subset_corpus, subset_split = "test", subset_out;
    std::uint64_t subset_seed = 0;
    auto* subset = data_cmd->add_subcommand("subset", "Draw the balanced retrieval subset");
    subset->add_option("--corpus", subset_corpus)->required();
    subset->add_option("--split", subset_split);
    subset->add_option("--seed", subset_seed);
    subset->add_option("--out", subset_out, "Id list file (stdout when omitted)");
    subset->callback([&] {
        action = [&] {
            const auto c = cli::load_corpus_at(subset_corpus);
            const auto ids = data::select_retrieval_subset(c, cli::parse_split_name(subset_split),
                                                           data::balanced_subset_counts(), subset_seed);
            std::string text;
            for (const auto& id : ids) text += id + "\n";
            if (subset_out.empty()) std::cout << text;
            else write_file_atomic(subset_out, text);
        };
    });

    // prep
    auto* prep_cmd = app.add_subcommand("prep", "Image preprocessing");
    prep_cmd->require_subcommand(1);
    std::string preview_corpus, preview_id, preview_mode = "full", preview_out;
    auto* preview = prep_cmd->add_subcommand("preview", "Render one sample's model input");
    preview->add_option("--corpus", preview_corpus)->required();
    preview->add_option("--id", preview_id)->required();
    preview->add_option("--mode", preview_mode, "full, position-only, no-entity, no-context or only-context");
    preview->add_option("--out", preview_out, "PNG path")->required();
    preview->callback([&] {
        action = [&] {
            prep::AblationMode mode{};
            try {
                mode = prep::parse_ablation_mode(preview_mode);
            } catch (const std::exception& e) {
                throw cli::UsageError(e.what());
            }
            const fs::path file = cli::corpus_file(preview_corpus);
            const auto c = data::load_corpus(file);
            const auto* s = c.find(preview_id);
            if (!s) throw data::DataError("no sample with id " + preview_id);
            const auto base = data::load_sample_image(*s, file.parent_path());
            write_png(preview_out, prep::apply_ablation_mode(base, s->entities, mode));
        };
    });

    // retrieval
    auto* retrieval_cmd = app.add_subcommand("retrieval", "Dual-encoder retrieval model");
    retrieval_cmd->require_subcommand(1);
    std::string rt_corpus, rt_config, rt_out;
    auto* rtrain = retrieval_cmd->add_subcommand("train", "Train the retrieval model");
    rtrain->add_option("--corpus", rt_corpus)->required();
    rtrain->add_option("--config", rt_config, "JSON with retrieval / retrieval_train / seed sections");
    rtrain->add_option("--out", rt_out, "Checkpoint directory")->required();
    rtrain->callback([&] {
        action = [&] {
            const auto cfg = section_config(rt_config, rt_corpus);
            const auto r = cli::retrieval_train_stage(rt_corpus, cfg.retrieval, cfg.retrieval_train, cfg.seed, rt_out,
                                                      {{"config_sha256", cfg.stage_hash("retrieval")}}, std::cerr);
            std::cout << "epochs\t" << r.log.size() << (r.stopped_early ? " (early stop)" : "") << "\n";
        };
    });

    std::string rs_ckpt, rs_corpus, rs_subset, rs_split = "test", rs_out, rs_direction = "both";
    auto* rscore = retrieval_cmd->add_subcommand("score", "Write a score matrix TSV");
    rscore->add_option("--ckpt", rs_ckpt)->required();
    rscore->add_option("--corpus", rs_corpus)->required();
    rscore->add_option("--subset", rs_subset, "Id list; defaults to the whole split");
    rscore->add_option("--split", rs_split);
    rscore->add_option("--direction", rs_direction, "TR, IR or both");
    rscore->add_option("--out", rs_out, "Score TSV; 'both' inserts .TR / .IR before the extension")->required();
    rscore->callback([&] {
        action = [&] {
            std::vector<std::string> ids;
            if (!rs_subset.empty()) {
                ids = cli::read_id_list(rs_subset);
            } else {
                const auto c = cli::load_corpus_at(rs_corpus);
                for (const auto* s : c.in_split(cli::parse_split_name(rs_split))) ids.push_back(s->id);
            }
            for (const auto& f : cli::retrieval_score_stage(rs_ckpt, rs_corpus, ids, parse_directions(rs_direction), rs_out)) {
                std::cout << f.string() << "\n";
            }
        };
    });

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "Adapter-based explanation generator");
    gen_cmd->require_subcommand(1);
    std::string gt_corpus, gt_config, gt_init, gt_out;
    auto* gtrain = gen_cmd->add_subcommand("train", "Pretrain the decoder, then train adapters and projector");
    gtrain->add_option("--corpus", gt_corpus)->required();
    gtrain->add_option("--config", gt_config, "JSON with generation / decoder_pretrain / generation_train sections");
    gtrain->add_option("--init-vision", gt_init, "Retrieval checkpoint providing the vision tower");
    gtrain->add_option("--out", gt_out, "Checkpoint directory")->required();
    gtrain->callback([&] {
        action = [&] {
            const auto cfg = section_config(gt_config, gt_corpus);
            std::optional<fs::path> init;
            if (!gt_init.empty()) init = gt_init;
            const auto r = cli::gen_train_stage(gt_corpus, cfg.generation, init, cfg.decoder_pretrain,
                                                cfg.generation_train, cfg.seed, gt_out,
                                                {{"config_sha256", cfg.stage_hash("generation")}}, std::cerr);
            std::cout << "frozen_sha256\t" << r.frozen_hash_after << "\n";
        };
    });

    std::string gi_ckpt, gi_corpus, gi_split = "test", gi_out;
    gen::DecodeConfig gi_decode;
    int gi_beam = 0;
    auto* ginfer = gen_cmd->add_subcommand("infer", "Generate explanations for a split");
    ginfer->add_option("--ckpt", gi_ckpt)->required();
    ginfer->add_option("--corpus", gi_corpus)->required();
    ginfer->add_option("--split", gi_split);
    ginfer->add_option("--beam", gi_beam, "Beam size; greedy when omitted")->check(CLI::PositiveNumber);
    ginfer->add_option("--max-new-tokens", gi_decode.max_new_tokens)->check(CLI::PositiveNumber);
    ginfer->add_option("--out", gi_out, "Predictions TSV")->required();
    ginfer->callback([&] {
        action = [&] {
            if (gi_beam > 0) {
                gi_decode.strategy = gen::DecodeConfig::Strategy::Beam;
                gi_decode.beam_size = gi_beam;
            }
            const auto preds = cli::gen_infer_stage(gi_ckpt, gi_corpus, cli::parse_split_name(gi_split), gi_decode);
            eval::write_predictions_tsv(gi_out, preds);
            std::cout << preds.size() << " predictions\n";
        };
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Metrics");
    eval_cmd->require_subcommand(1);
    std::vector<std::string> er_scores;
    std::string er_model = "dual-encoder+aux", er_out;
    auto* eretrieval = eval_cmd->add_subcommand("retrieval", "Recall@K and mean rank from score files");
    eretrieval->add_option("--scores", er_scores, "Score TSV files")->required();
    eretrieval->add_option("--model", er_model);
    eretrieval->add_option("--out", er_out, "Metrics JSON");
    eretrieval->callback([&] {
        action = [&] {
            std::vector<fs::path> files(er_scores.begin(), er_scores.end());
            const auto rows = cli::retrieval_eval_stage(files, er_model);
            print_retrieval(rows);
            if (!er_out.empty()) cli::write_retrieval_metrics(er_out, rows, "");
        };
    });

    std::string eg_preds, eg_refs, eg_model = "adapter-decoder", eg_judge = "off", eg_judge_model = "gpt-4",
                eg_cache = "judge_cache", eg_out;
    int eg_concurrency = 4;
    auto* egeneration = eval_cmd->add_subcommand("generation", "Caption metrics and the LLM judge");
    egeneration->add_option("--preds", eg_preds, "Predictions TSV")->required();
    egeneration->add_option("--refs", eg_refs, "Corpus holding the reference explanations")->required();
    egeneration->add_option("--model", eg_model);
    egeneration->add_option("--judge", eg_judge, "off, mock or live");
    egeneration->add_option("--judge-model", eg_judge_model);
    egeneration->add_option("--judge-cache", eg_cache);
    egeneration->add_option("--judge-concurrency", eg_concurrency)->check(CLI::PositiveNumber);
    egeneration->add_option("--out", eg_out, "Metrics JSON");
    egeneration->callback([&] {
        action = [&] {
            auto judge = cli::make_judge_client(cli::parse_client_mode(eg_judge), eg_judge_model);
            const auto ge = cli::generation_eval_stage(eval::read_predictions_tsv(eg_preds), eg_refs, eg_model,
                                                       judge.get(), eg_cache, eg_concurrency);
            for (const auto& f : ge.judge_failures) std::cerr << "judge failure: " << f << "\n";
            print_generation(ge.row);
            if (!eg_out.empty()) cli::write_generation_metrics(eg_out, {ge.row}, "");
        };
    });

    // report
    std::string rep_run, rep_out;
    auto* report = app.add_subcommand("report", "Assemble report.md and report.tsv from a run directory");
    report->add_option("--run", rep_run, "Run directory holding the metrics files")->required();
    report->add_option("--out", rep_out, "Extra copy of the markdown report");
    report->callback([&] {
        action = [&] {
            std::map<std::string, std::string> hashes;
            const fs::path snapshot = fs::path(rep_run) / "run_config.json";
            if (fs::exists(snapshot)) {
                auto j = json::parse(read_file(snapshot));
                j.erase("config_sha256");
                const auto cfg = cli::RunConfig::from_json(j, rep_run);
                hashes = {{"run", cfg.hash()},
                          {"retrieval", cfg.stage_hash("retrieval")},
                          {"generation", cfg.stage_hash("generation")},
                          {"judge", cfg.stage_hash("judge")}};
            }
            const auto r = cli::report_stage(rep_run, hashes, {});
            if (!rep_out.empty()) write_file_atomic(rep_out, r.markdown);
            std::cout << r.markdown;
        };
    });

    // zeroshot
    auto* zs_cmd = app.add_subcommand("zeroshot", "Zero-shot baseline through an external vision-language model");
    zs_cmd->require_subcommand(1);
    std::string zs_corpus, zs_split = "test", zs_client = "mock", zs_model = "gpt-4-vision-preview",
                zs_cache = "vlm_cache", zs_out;
    auto* zrun = zs_cmd->add_subcommand("run", "Query the model for every sample of a split");
    zrun->add_option("--corpus", zs_corpus)->required();
    zrun->add_option("--split", zs_split);
    zrun->add_option("--client", zs_client, "mock or live");
    zrun->add_option("--model", zs_model);
    zrun->add_option("--cache", zs_cache);
    zrun->add_option("--out", zs_out, "Predictions TSV")->required();
    zrun->callback([&] {
        action = [&] {
            auto client = cli::make_vlm_client(cli::parse_client_mode(zs_client), zs_model);
            if (!client) throw cli::UsageError("zeroshot run needs --client mock or live");
            const auto run = cli::zeroshot_stage(*client, zs_corpus, cli::parse_split_name(zs_split), zs_cache);
            eval::write_predictions_tsv(zs_out, run.predictions);
            for (const auto& f : run.failures) std::cerr << "failed " << f << "\n";
            std::cout << run.predictions.size() - run.failures.size() << " ok, " << run.failures.size() << " failed\n";
        };
    });

    // run
    std::string run_config;
    std::vector<std::string> run_stages;
    std::string run_out;
    auto* run = app.add_subcommand("run", "Run the configured pipeline stages in order");
    run->add_option("--config", run_config, "Run config JSON")->required();
    run->add_option("--stages", run_stages, "Override the stage list")->delimiter(',');
    run->add_option("--out", run_out, "Override output_dir");
    run->callback([&] {
        action = [&] {
            auto cfg = cli::RunConfig::load(run_config);
            if (!run_stages.empty()) {
                for (const auto& s : run_stages) {
                    if (std::find(cli::kKnownStages.begin(), cli::kKnownStages.end(), s) == cli::kKnownStages.end()) {
                        throw cli::UsageError("unknown stage '" + s + "'");
                    }
                }
                cfg.stages = run_stages;
            }
            if (!run_out.empty()) cfg.output_dir = run_out;
            const auto r = cli::run_pipeline(cfg, std::cerr);
            if (!r.report_markdown.empty()) std::cout << r.report_markdown.string() << "\n";
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", e.what());
        return kUsage;
    }

    try {
        action();
        return kOk;
    } catch (const cli::UsageError& e) {
        report_error("usage", e.what());
        return kUsage;
    } catch (const data::DataError& e) {
        report_error("data", e.what());
        return kData;
    } catch (const cli::StageError& e) {
        report_error("stage", e.what(), e.stage());
        return kStage;
    } catch (const std::exception& e) {
        report_error("internal", e.what());
        return kStage;
    }
}
