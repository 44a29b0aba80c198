#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace hazard::eval {

// TR: image queries ranking texts. IR: text queries ranking images.
enum class Direction { TR, IR };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);

struct ScoreMatrix {
    Eigen::MatrixXd scores;  // queries x candidates
    std::vector<int> gold;   // per query, index into candidates
    Direction direction = Direction::TR;
    std::vector<std::string> query_ids;
    std::vector<std::string> candidate_ids;

    Eigen::Index queries() const { return scores.rows(); }
    Eigen::Index candidates() const { return scores.cols(); }
    // Throws std::invalid_argument when shapes or gold indices are inconsistent.
    void validate() const;
};

struct RetrievalMetrics {
    double mean_rank = 0.0;
    std::map<int, double> recall_at;  // k -> fraction in [0, 1]
};

// 1 + number of candidates scoring strictly higher than the gold entry, so
// ties resolve in the gold's favour.
int rank_of_gold(std::span<const double> row, int gold_index);

RetrievalMetrics retrieval_metrics(const ScoreMatrix& matrix, std::span<const int> ks);

inline const std::vector<int> kDefaultRecallKs = {1, 5, 10};

}  // namespace hazard::eval
