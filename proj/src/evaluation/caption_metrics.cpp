#include "hazard/evaluation/caption_metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

namespace hazard::eval {

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<Tokens, int>;

NgramCounts ngram_counts(const Tokens& t, std::size_t n) {
    NgramCounts out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n))];
    return out;
}

void check_parallel(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
    if (hyps.size() != refs.size()) throw std::invalid_argument("hypothesis and reference counts differ");
    if (hyps.empty()) throw std::invalid_argument("no captions to score");
}

}  // namespace

std::string normalize_caption(std::string_view text) {
    std::string out;
    bool space = false;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            space = !out.empty();
        } else if (std::isalnum(u) || c == '#' || u >= 0x80) {
            if (space) out.push_back(' ');
            space = false;
            out.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    return out;
}

std::vector<std::string> caption_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : normalize_caption(text)) {
        if (c == ' ') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double corpus_bleu4(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
    check_parallel(hyps, refs);
    double log_p = 0.0;
    std::size_t hyp_len = 0;
    std::size_t ref_len = 0;
    for (const auto& h : hyps) hyp_len += h.size();
    for (const auto& r : refs) ref_len += r.size();
    if (hyp_len == 0) return 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        long matched = 0;
        long total = 0;
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            const auto h = ngram_counts(hyps[i], n);
            const auto r = ngram_counts(refs[i], n);
            for (const auto& [g, c] : h) {
                total += c;
                const auto it = r.find(g);
                if (it != r.end()) matched += std::min(c, it->second);
            }
        }
        if (matched == 0) return 0.0;
        log_p += std::log(static_cast<double>(matched) / static_cast<double>(total)) / 4.0;
    }
    const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return 100.0 * bp * std::exp(log_p);
}

double rouge_l_f1(const Tokens& hyp, const Tokens& ref) {
    if (hyp.empty() || ref.empty()) return 0.0;
    std::vector<std::vector<int>> dp(hyp.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= hyp.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            dp[i][j] = hyp[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
        }
    }
    const double lcs = dp[hyp.size()][ref.size()];
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(hyp.size());
    const double r = lcs / static_cast<double>(ref.size());
    return 100.0 * 2.0 * p * r / (p + r);
}

namespace {

struct TfIdf {
    std::array<std::map<Tokens, double>, 4> vec;
    std::array<double, 4> norm{};
    int length = 0;
};

TfIdf tf_idf(const Tokens& t, const std::map<Tokens, int>& df, double log_docs) {
    TfIdf out;
    for (std::size_t n = 1; n <= 4; ++n) {
        for (const auto& [g, tf] : ngram_counts(t, n)) {
            const auto it = df.find(g);
            const double idf = log_docs - std::log(std::max(1.0, it == df.end() ? 0.0 : static_cast<double>(it->second)));
            const double w = tf * idf;
            out.vec[n - 1][g] = w;
            out.norm[n - 1] += w * w;
            // Length is counted in bigrams, matching the coco-caption scorer.
            if (n == 2) out.length += tf;
        }
    }
    for (auto& v : out.norm) v = std::sqrt(v);
    return out;
}

}  // namespace

double cider_d(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs, double sigma) {
    check_parallel(hyps, refs);
    std::map<Tokens, int> df;
    for (const auto& r : refs) {
        std::set<Tokens> seen;
        for (std::size_t n = 1; n <= 4; ++n) {
            for (const auto& [g, c] : ngram_counts(r, n)) seen.insert(g);
        }
        for (const auto& g : seen) ++df[g];
    }
    const double log_docs = std::log(static_cast<double>(refs.size()));
    double total = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const TfIdf h = tf_idf(hyps[i], df, log_docs);
        const TfIdf r = tf_idf(refs[i], df, log_docs);
        const double delta = h.length - r.length;
        double score = 0.0;
        for (std::size_t n = 0; n < 4; ++n) {
            double val = 0.0;
            for (const auto& [g, w] : h.vec[n]) {
                const auto it = r.vec[n].find(g);
                if (it != r.vec[n].end()) val += std::min(w, it->second) * it->second;
            }
            if (h.norm[n] != 0.0 && r.norm[n] != 0.0) val /= h.norm[n] * r.norm[n];
            score += val * std::exp(-(delta * delta) / (2.0 * sigma * sigma));
        }
        total += 10.0 * score / 4.0;
    }
    return 100.0 * total / static_cast<double>(hyps.size());
}

CaptionScores caption_metrics(const TextById& predictions, const TextById& references, const SpiceScorer& spice) {
    if (predictions.empty()) throw std::invalid_argument("no predictions to score");
    if (predictions.size() != references.size()) {
        throw std::invalid_argument("prediction and reference id sets differ in size");
    }
    std::vector<Tokens> hyps;
    std::vector<Tokens> refs;
    for (const auto& [id, text] : predictions) {
        const auto it = references.find(id);
        if (it == references.end()) throw std::invalid_argument("prediction id without reference: " + id);
        hyps.push_back(caption_tokens(text));
        refs.push_back(caption_tokens(it->second));
    }
    CaptionScores out;
    out.bleu4 = corpus_bleu4(hyps, refs);
    double rouge = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) rouge += rouge_l_f1(hyps[i], refs[i]);
    out.rouge_l = rouge / static_cast<double>(hyps.size());
    out.cider_d = cider_d(hyps, refs);
    if (spice) {
        out.spice = 100.0 * spice(predictions, references);
        out.spider = (*out.spice + out.cider_d) / 2.0;
    } else {
        out.note = "SPIDEr omitted: no SPICE scorer configured";
    }
    return out;
}

}  // namespace hazard::eval
