#pragma once

#include "hazard/evaluation/caption_metrics.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace hazard::eval {

// "id\tprediction" with a header row. Tabs and newlines inside a prediction
// become spaces, since the format cannot carry them.
std::string format_predictions_tsv(const TextById& predictions);
TextById parse_predictions_tsv(std::string_view text);

void write_predictions_tsv(const std::filesystem::path& path, const TextById& predictions);
TextById read_predictions_tsv(const std::filesystem::path& path);

}  // namespace hazard::eval
