#include "hazard/evaluation/retrieval_metrics.hpp"

#include <stdexcept>

namespace hazard::eval {

std::string_view to_string(Direction d) { return d == Direction::TR ? "TR" : "IR"; }

Direction parse_direction(std::string_view s) {
    if (s == "TR") return Direction::TR;
    if (s == "IR") return Direction::IR;
    throw std::invalid_argument("unknown retrieval direction '" + std::string(s) + "'");
}

void ScoreMatrix::validate() const {
    if (queries() < 1 || candidates() < 1) throw std::invalid_argument("score matrix must be at least 1x1");
    if (static_cast<Eigen::Index>(gold.size()) != queries()) {
        throw std::invalid_argument("gold vector length differs from query count");
    }
    for (int g : gold) {
        if (g < 0 || g >= candidates()) throw std::invalid_argument("gold index out of range");
    }
    if (!query_ids.empty() && static_cast<Eigen::Index>(query_ids.size()) != queries()) {
        throw std::invalid_argument("query id count differs from query count");
    }
    if (!candidate_ids.empty() && static_cast<Eigen::Index>(candidate_ids.size()) != candidates()) {
        throw std::invalid_argument("candidate id count differs from candidate count");
    }
}

int rank_of_gold(std::span<const double> row, int gold_index) {
    if (gold_index < 0 || static_cast<std::size_t>(gold_index) >= row.size()) {
        throw std::invalid_argument("gold index out of range");
    }
    const double g = row[static_cast<std::size_t>(gold_index)];
    int greater = 0;
    for (double v : row) greater += v > g ? 1 : 0;
    return greater + 1;
}

RetrievalMetrics retrieval_metrics(const ScoreMatrix& matrix, std::span<const int> ks) {
    matrix.validate();
    for (int k : ks) {
        if (k < 1) throw std::invalid_argument("recall cutoff must be >= 1");
    }
    RetrievalMetrics out;
    std::map<int, int> hits;
    for (int k : ks) hits[k] = 0;
    double rank_sum = 0.0;
    std::vector<double> row(static_cast<std::size_t>(matrix.candidates()));
    for (Eigen::Index q = 0; q < matrix.queries(); ++q) {
        for (Eigen::Index c = 0; c < matrix.candidates(); ++c) row[static_cast<std::size_t>(c)] = matrix.scores(q, c);
        const int r = rank_of_gold(row, matrix.gold[static_cast<std::size_t>(q)]);
        rank_sum += r;
        for (auto& [k, h] : hits) h += r <= k ? 1 : 0;
    }
    const auto n = static_cast<double>(matrix.queries());
    out.mean_rank = rank_sum / n;
    for (const auto& [k, h] : hits) out.recall_at[k] = h / n;
    return out;
}

}  // namespace hazard::eval
