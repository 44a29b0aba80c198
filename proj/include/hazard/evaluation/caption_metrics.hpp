#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::eval {

using TextById = std::map<std::string, std::string>;

// Lowercase, drop punctuation other than '#', collapse whitespace.
std::string normalize_caption(std::string_view text);
std::vector<std::string> caption_tokens(std::string_view text);

// All scores on a 0-100 scale, except CIDEr-D whose maximum is 1000.
double corpus_bleu4(const std::vector<std::vector<std::string>>& hyps,
                    const std::vector<std::vector<std::string>>& refs);
double rouge_l_f1(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);
double cider_d(const std::vector<std::vector<std::string>>& hyps, const std::vector<std::vector<std::string>>& refs,
               double sigma = 6.0);

// Optional external SPICE scorer returning a corpus score in [0, 1].
using SpiceScorer = std::function<double(const TextById& predictions, const TextById& references)>;

struct CaptionScores {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double cider_d = 0.0;
    std::optional<double> spice;
    std::optional<double> spider;
    std::string note;  // why SPIDEr is missing, if it is
};

// Throws std::invalid_argument when the id sets differ or are empty.
CaptionScores caption_metrics(const TextById& predictions, const TextById& references,
                              const SpiceScorer& spice = {});

}  // namespace hazard::eval
