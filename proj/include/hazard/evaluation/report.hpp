#pragma once

#include "hazard/evaluation/caption_metrics.hpp"
#include "hazard/evaluation/retrieval_metrics.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::eval {

struct RetrievalRow {
    std::string model;
    Direction direction = Direction::TR;
    RetrievalMetrics metrics;
};

struct GenerationRow {
    std::string model;
    CaptionScores captions;
    std::optional<double> judge_mean;
    int judge_scored = 0;
    int judge_failed_batches = 0;
};

struct ReportBundle {
    std::string title = "Hazard explanation benchmark";
    std::map<std::string, std::string> config_hashes;  // stage -> sha256
    std::vector<RetrievalRow> retrieval;
    std::vector<GenerationRow> generation;
    std::vector<std::string> notes;
};

struct Report {
    std::string markdown;
    std::string tsv;
};

// Pure function of the bundle: fixed column order, no timestamps.
Report emit_report(const ReportBundle& bundle);

// Inverse of the TSV half of emit_report.
ReportBundle parse_report_tsv(std::string_view tsv);

}  // namespace hazard::eval
