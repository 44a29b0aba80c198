#pragma once

#include "hazard/dataset/dataset.hpp"
#include "hazard/evaluation/judge.hpp"
#include "hazard/evaluation/report.hpp"
#include "hazard/generation/train.hpp"
#include "hazard/retrieval/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hazard::cli {

// Bad invocation or configuration; exit status 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A pipeline stage failed; exit status 3.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message)
        : std::runtime_error(message), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

inline const std::vector<std::string> kKnownStages = {
    "data.synth", "retrieval.train", "retrieval.score", "eval.retrieval", "gen.train",
    "gen.infer",  "zeroshot.run",    "eval.generation", "report"};

enum class ClientMode { Off, Mock, Live };
ClientMode parse_client_mode(const std::string& s);
std::string to_string(ClientMode m);

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path corpus_root;  // directory holding corpus.jsonl
    std::optional<data::SynthSpec> synth;
    std::filesystem::path output_dir = "run";
    std::vector<std::string> stages = kKnownStages;
    std::string split = "test";                       // scored / generated split
    std::optional<std::filesystem::path> subset_file;  // retrieval ids, one per line

    retrieval::RetrievalConfig retrieval;
    retrieval::TrainConfig retrieval_train;
    gen::GenerationConfig generation;
    gen::DecoderPretrainConfig decoder_pretrain;
    gen::GenTrainConfig generation_train;
    gen::DecodeConfig decode;

    ClientMode judge = ClientMode::Mock;
    std::string judge_model = "gpt-4";
    ClientMode zeroshot = ClientMode::Mock;
    std::string zeroshot_model = "gpt-4-vision-preview";
    int judge_concurrency = 4;

    // Relative paths in the file resolve against `base_dir`. Throws UsageError.
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& file);
    nlohmann::json to_json() const;

    // SHA-256 over everything that affects results; file locations are left out
    // so that identical runs in different directories share a hash.
    std::string hash() const;
    std::string stage_hash(const std::string& section) const;
};

// Accepts a corpus directory (containing corpus.jsonl) or the file itself.
std::filesystem::path corpus_file(const std::filesystem::path& corpus);
data::Corpus load_corpus_at(const std::filesystem::path& corpus);
data::Split parse_split_name(const std::string& s);
std::vector<std::string> read_id_list(const std::filesystem::path& file);

// Stage building blocks shared by the subcommands and run_pipeline.
std::filesystem::path synth_stage(const data::SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir);

retrieval::TrainResult retrieval_train_stage(const std::filesystem::path& corpus, const retrieval::RetrievalConfig& model,
                                             const retrieval::TrainConfig& train, std::uint64_t init_seed,
                                             const std::filesystem::path& out_ckpt, const nlohmann::json& provenance,
                                             std::ostream& log);

// Returns the written files, one per direction.
std::vector<std::filesystem::path> retrieval_score_stage(const std::filesystem::path& ckpt,
                                                         const std::filesystem::path& corpus,
                                                         const std::vector<std::string>& ids,
                                                         const std::vector<eval::Direction>& directions,
                                                         const std::filesystem::path& out_prefix);

std::vector<eval::RetrievalRow> retrieval_eval_stage(const std::vector<std::filesystem::path>& score_files,
                                                     const std::string& model_name);

gen::GenTrainResult gen_train_stage(const std::filesystem::path& corpus, const gen::GenerationConfig& config,
                                    const std::optional<std::filesystem::path>& init_vision,
                                    const gen::DecoderPretrainConfig& pretrain, const gen::GenTrainConfig& train,
                                    std::uint64_t init_seed, const std::filesystem::path& out_ckpt,
                                    const nlohmann::json& provenance, std::ostream& log);

eval::TextById gen_infer_stage(const std::filesystem::path& ckpt, const std::filesystem::path& corpus, data::Split split,
                               const gen::DecodeConfig& decode);

struct ZeroShotRun {
    eval::TextById predictions;        // failed samples hold an empty string
    std::vector<std::string> failures;  // "id: message"
};
ZeroShotRun zeroshot_stage(eval::ChatClient& client, const std::filesystem::path& corpus, data::Split split,
                           const std::filesystem::path& cache_dir);

struct GenerationEval {
    eval::GenerationRow row;
    std::vector<std::string> judge_failures;
};
GenerationEval generation_eval_stage(const eval::TextById& predictions, const std::filesystem::path& corpus,
                                     const std::string& model_name, eval::ChatClient* judge,
                                     const std::filesystem::path& judge_cache, int judge_concurrency);

std::unique_ptr<eval::ChatClient> make_judge_client(ClientMode mode, const std::string& model);
std::unique_ptr<eval::ChatClient> make_vlm_client(ClientMode mode, const std::string& model);

// Metrics files exchanged between stages.
void write_retrieval_metrics(const std::filesystem::path& file, const std::vector<eval::RetrievalRow>& rows,
                             const std::string& config_hash);
std::vector<eval::RetrievalRow> read_retrieval_metrics(const std::filesystem::path& file);
void write_generation_metrics(const std::filesystem::path& file, const std::vector<eval::GenerationRow>& rows,
                              const std::string& config_hash);
std::vector<eval::GenerationRow> read_generation_metrics(const std::filesystem::path& file);

// Builds report.md and report.tsv from whichever metrics files exist in `run_dir`.
eval::Report report_stage(const std::filesystem::path& run_dir, const std::map<std::string, std::string>& config_hashes,
                          const std::vector<std::string>& notes);

struct PipelineResult {
    std::vector<std::string> stages_run;
    std::filesystem::path report_markdown;
};

// Runs config.stages in order; a failing stage throws StageError (or
// data::DataError for corpus problems) and later stages do not run.
PipelineResult run_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace hazard::cli
