#include "hazard/evaluation/predictions.hpp"

#include "hazard/common/io.hpp"

#include <sstream>
#include <stdexcept>

namespace hazard::eval {

namespace {

constexpr std::string_view kHeader = "id\tprediction";

}  // namespace

std::string format_predictions_tsv(const TextById& predictions) {
    std::string out = std::string(kHeader) + "\n";
    for (const auto& [id, text] : predictions) {
        if (id.find_first_of("\t\n\r") != std::string::npos) throw std::invalid_argument("prediction id contains a tab or newline");
        std::string clean = text;
        for (auto& c : clean) {
            if (c == '\t' || c == '\n' || c == '\r') c = ' ';
        }
        out += id + "\t" + clean + "\n";
    }
    return out;
}

TextById parse_predictions_tsv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kHeader) throw std::runtime_error("predictions file lacks the id/prediction header");
    TextById out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("predictions line " + std::to_string(line_no) + " has no tab");
        if (!out.emplace(line.substr(0, tab), line.substr(tab + 1)).second) {
            throw std::runtime_error("duplicate prediction id " + line.substr(0, tab));
        }
    }
    return out;
}

void write_predictions_tsv(const std::filesystem::path& path, const TextById& predictions) {
    write_file_atomic(path, format_predictions_tsv(predictions));
}

TextById read_predictions_tsv(const std::filesystem::path& path) { return parse_predictions_tsv(read_file(path)); }

}  // namespace hazard::eval
