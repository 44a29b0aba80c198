#include "hazard/evaluation/judge.hpp"

#include "hazard/common/hash.hpp"
#include "hazard/evaluation/caption_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace hazard::eval {

using nlohmann::json;

namespace {

std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

JudgeBatch build_judge_batch(std::span<const JudgePair> pairs, std::string_view policy_text) {
    if (pairs.empty()) throw std::invalid_argument("judge batch needs at least one pair");
    if (pairs.size() > static_cast<std::size_t>(kJudgeMaxBatch)) {
        throw std::invalid_argument("judge batch holds at most " + std::to_string(kJudgeMaxBatch) + " pairs");
    }
    JudgeBatch batch;
    batch.pairs.assign(pairs.begin(), pairs.end());
    batch.system_prompt = std::string(policy_text);
    std::ostringstream user;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i > 0) user << "\n";
        user << "Query " << i + 1 << "\nCorrect: " << one_line(pairs[i].gold) << "\nGenerated: " << one_line(pairs[i].generated)
             << "\n";
    }
    batch.user_prompt = user.str();
    return batch;
}

std::vector<JudgeBatch> build_judge_batches(std::span<const JudgePair> pairs, int batch_size,
                                            std::string_view policy_text) {
    if (pairs.empty()) throw std::invalid_argument("no pairs to judge");
    if (batch_size < 1 || batch_size > kJudgeMaxBatch) throw std::invalid_argument("judge batch size out of range");
    std::vector<JudgeBatch> out;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
        const auto n = std::min(static_cast<std::size_t>(batch_size), pairs.size() - start);
        out.push_back(build_judge_batch(pairs.subspan(start, n), policy_text));
    }
    return out;
}

std::vector<int> parse_judge_scores(std::string_view raw, int expected_n) {
    static const std::regex line_re(R"(^\s*(?:Query\s*)?(\d+)\s*[:.)]\s*(-?\d+)\s*$)", std::regex::icase);
    std::vector<int> scores;
    std::istringstream in{std::string(raw)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        const int index = std::stoi(m[1]);
        const long value = std::stol(m[2]);
        if (index != static_cast<int>(scores.size()) + 1) {
            throw JudgeParseError("judge reply numbering broke at query " + std::to_string(index));
        }
        if (value < 0 || value > 100) throw JudgeParseError("judge score " + std::to_string(value) + " outside [0, 100]");
        scores.push_back(static_cast<int>(value));
    }
    if (static_cast<int>(scores.size()) != expected_n) {
        throw JudgeParseError("expected " + std::to_string(expected_n) + " judge scores, got " +
                              std::to_string(scores.size()));
    }
    return scores;
}

std::string judge_cache_key(const JudgePair& pair, const std::string& model) {
    std::string material = std::string(kJudgePromptVersion);
    for (const auto* part : {&model, &pair.gold, &pair.generated}) {
        material.push_back('\x1f');
        material += *part;
    }
    return sha256_hex(material);
}

JudgeOutcome run_judge(ChatClient& client, const std::vector<JudgePair>& pairs, const JudgeConfig& config) {
    if (pairs.empty()) throw std::invalid_argument("no pairs to judge");
    std::set<std::string> ids;
    for (const auto& p : pairs) {
        if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate judge pair id " + p.id);
    }
    JudgeOutcome out;
    out.model = client.model_id();
    const ResponseCache cache(config.cache_dir);

    std::vector<JudgePair> pending;
    for (const auto& p : pairs) {
        const auto hit = cache.get(judge_cache_key(p, out.model));
        if (hit && hit->contains("score")) {
            out.scores[p.id] = hit->at("score").get<int>();
            ++out.cache_hits;
        } else {
            pending.push_back(p);
        }
    }

    if (!pending.empty()) {
        const auto batches = build_judge_batches(pending, config.batch_size);
        std::vector<std::optional<std::vector<int>>> results(batches.size());
        std::vector<std::string> errors(batches.size());
        RateLimiter limiter(config.min_interval);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t b = next.fetch_add(1); b < batches.size(); b = next.fetch_add(1)) {
                const auto& batch = batches[b];
                ChatRequest req{batch.system_prompt, batch.user_prompt, batch.temperature, {}};
                try {
                    std::vector<int> parsed;
                    with_retries(
                        config.retry,
                        [&] {
                            limiter.acquire();
                            parsed = parse_judge_scores(client.complete(req), static_cast<int>(batch.pairs.size()));
                            return std::string();
                        },
                        [](const std::exception& e) {
                            return dynamic_cast<const TransportError*>(&e) != nullptr ||
                                   dynamic_cast<const JudgeParseError*>(&e) != nullptr;
                        });
                    results[b] = std::move(parsed);
                } catch (const std::exception& e) {
                    errors[b] = e.what();
                }
            }
        };
        const int n_threads = std::clamp(config.max_concurrency, 1, static_cast<int>(batches.size()));
        std::vector<std::thread> threads;
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();

        out.batches_sent = static_cast<int>(batches.size());
        for (std::size_t b = 0; b < batches.size(); ++b) {
            if (!results[b]) {
                out.failures.push_back("batch " + std::to_string(b + 1) + " (" + batches[b].pairs.front().id +
                                       " ...): " + errors[b]);
                continue;
            }
            for (std::size_t i = 0; i < batches[b].pairs.size(); ++i) {
                const auto& p = batches[b].pairs[i];
                const int score = (*results[b])[i];
                out.scores[p.id] = score;
                cache.put(judge_cache_key(p, out.model), json{{"score", score},
                                                             {"model", out.model},
                                                             {"temperature", batches[b].temperature},
                                                             {"prompt_version", kJudgePromptVersion}});
            }
        }
    }

    if (!out.scores.empty()) {
        double sum = 0.0;
        for (const auto& [id, s] : out.scores) sum += s;
        out.mean = sum / static_cast<double>(out.scores.size());
    }
    return out;
}

std::string mock_judge_response(const ChatRequest& request) {
    std::istringstream in(request.user);
    std::string line;
    std::string gold;
    std::ostringstream reply;
    int n = 0;
    while (std::getline(in, line)) {
        if (line.starts_with("Correct: ")) {
            gold = line.substr(9);
        } else if (line.starts_with("Generated: ")) {
            const double f = rouge_l_f1(caption_tokens(line.substr(11)), caption_tokens(gold));
            reply << ++n << ": " << static_cast<int>(std::lround(f)) << "\n";
        }
    }
    return reply.str();
}

}  // namespace hazard::eval
