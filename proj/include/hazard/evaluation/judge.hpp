#pragma once

#include "hazard/evaluation/llm_client.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::eval {

// Changing the wording changes every cache key; bump the version with it.
inline constexpr std::string_view kJudgePromptVersion = "judge-v1";
inline constexpr std::string_view kJudgeSystemPrompt =
    "You grade explanations of traffic hazards. Each query below has a correct text and a generated text. "
    "Rate how well the generated text matches the meaning of the correct text on a scale from 0 to 100. "
    "A perfect semantic match with the correct text scores 100. "
    "No commonality, including an incomplete generated text, scores 0. "
    "Check rigorously that the generated text refers to the same entities (Entity #1, Entity #2, Entity #3) "
    "in the same roles as the correct text; a wrong entity reference is a serious error. "
    "Only require the generated text to mention the same content as the correct text; "
    "do not penalize it for extra content. "
    "Reply with exactly one line per query in the form \"<query number>: <score>\" and nothing else.";
inline constexpr int kJudgeMaxBatch = 25;
inline constexpr double kJudgeTemperature = 0.0;

class JudgeParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct JudgePair {
    std::string id;
    std::string gold;
    std::string generated;
};

struct JudgeBatch {
    std::vector<JudgePair> pairs;
    std::string system_prompt;
    std::string user_prompt;  // numbered query blocks
    double temperature = kJudgeTemperature;
};

// Throws std::invalid_argument for an empty batch or more than kJudgeMaxBatch pairs.
JudgeBatch build_judge_batch(std::span<const JudgePair> pairs, std::string_view policy_text = kJudgeSystemPrompt);
// Consecutive batches of at most `batch_size` pairs, in input order.
std::vector<JudgeBatch> build_judge_batches(std::span<const JudgePair> pairs, int batch_size = kJudgeMaxBatch,
                                            std::string_view policy_text = kJudgeSystemPrompt);

// Reads "<n>: <score>" lines numbered 1..expected_n. Throws JudgeParseError on
// a count or numbering mismatch or a score outside [0, 100].
std::vector<int> parse_judge_scores(std::string_view raw, int expected_n);

struct JudgeConfig {
    std::filesystem::path cache_dir;
    int batch_size = kJudgeMaxBatch;
    int max_concurrency = 4;
    RetryPolicy retry;
    std::chrono::milliseconds min_interval{0};
};

struct JudgeOutcome {
    std::map<std::string, int> scores;  // by pair id
    std::optional<double> mean;         // over scored pairs
    std::vector<std::string> failures;  // one message per failed batch
    int batches_sent = 0;
    int cache_hits = 0;
    std::string model;
    std::string prompt_version = std::string(kJudgePromptVersion);
    double temperature = kJudgeTemperature;
};

// Pairs already in the cache are not sent again. Batches run concurrently up to
// max_concurrency; a batch that keeps failing is recorded without stopping the run.
JudgeOutcome run_judge(ChatClient& client, const std::vector<JudgePair>& pairs, const JudgeConfig& config);

std::string judge_cache_key(const JudgePair& pair, const std::string& model);

// Offline judge: scores each query by ROUGE-L F1 of its two texts, rounded.
std::string mock_judge_response(const ChatRequest& request);

}  // namespace hazard::eval
