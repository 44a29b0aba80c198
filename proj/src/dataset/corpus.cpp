#include "hazard/dataset/dataset.hpp"
#include "hazard/tensor/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

namespace hazard::data {

using nlohmann::json;

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool iequals_at(std::string_view text, std::size_t pos, std::string_view word) {
    if (pos + word.size() > text.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
    }
    return true;
}

}  // namespace

std::string ValidationReport::summary() const {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v.message;
    }
    return out;
}

std::vector<EntityRef> find_entity_refs(std::string_view text) {
    std::vector<EntityRef> refs;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!iequals_at(text, pos, "entity") || (pos > 0 && is_alnum(text[pos - 1]))) {
            ++pos;
            continue;
        }
        std::size_t p = pos + 6;
        std::size_t spaces = 0;
        while (p < text.size() && is_space(text[p])) {
            ++p;
            ++spaces;
        }
        if (spaces == 0 || p >= text.size() || text[p] != '#') {
            ++pos;
            continue;
        }
        ++p;
        while (p < text.size() && is_space(text[p])) ++p;
        const std::size_t digits_begin = p;
        while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
        if (p == digits_begin || p - digits_begin > 6) {
            pos = p > pos ? p : pos + 1;
            continue;
        }
        refs.push_back({pos, p, std::stoi(std::string(text.substr(digits_begin, p - digits_begin)))});
        pos = p;
    }
    return refs;
}

std::vector<int> referenced_entities(std::string_view text) {
    std::vector<int> out;
    for (const auto& r : find_entity_refs(text)) out.push_back(r.index);
    return out;
}

int word_count(const std::string& text) {
    std::istringstream in(text);
    int n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

ValidationReport validate_sample(const Sample& sample, ImageDims dims, const ValidationOptions& options) {
    ValidationReport report;
    auto fail = [&](std::string rule, std::string field, std::string message) {
        report.ok = false;
        report.violations.push_back({std::move(rule), std::move(field), std::move(message)});
    };

    if (sample.id.empty()) fail("id_nonempty", "id", "id is empty");
    if (std::find(kSpeedsKmh.begin(), kSpeedsKmh.end(), sample.speed_kmh) == kSpeedsKmh.end()) {
        fail("speed_bucket", "speed_kmh", "speed " + std::to_string(sample.speed_kmh) + " not in {15,45,75}");
    }
    const auto n = static_cast<int>(sample.entities.size());
    if (n < 1 || n > kMaxEntities) {
        fail("entity_count", "entities", "entity count " + std::to_string(n) + " outside 1..3");
    }

    std::set<int> indices;
    for (const auto& e : sample.entities) {
        const std::string field = "entities[" + std::to_string(e.index) + "]";
        if (e.index < 1 || e.index > kMaxEntities) {
            fail("entity_index", field + ".index", "entity index " + std::to_string(e.index) + " outside 1..3");
        }
        if (!indices.insert(e.index).second) {
            fail("entity_index_unique", field + ".index", "entity index " + std::to_string(e.index) + " repeated");
        }
        if (e.description.empty()) {
            fail("description_nonempty", field + ".description",
                 "entity " + std::to_string(e.index) + " description empty");
        }
        const BBox& b = e.bbox;
        if (!(0 <= b.x_min && b.x_min < b.x_max && b.x_max <= dims.width && 0 <= b.y_min && b.y_min < b.y_max &&
              b.y_max <= dims.height)) {
            std::ostringstream msg;
            msg << "entity " << e.index << " bbox [" << b.x_min << "," << b.y_min << "," << b.x_max << ","
                << b.y_max << "] violates 0<=x_min<x_max<=" << dims.width << ", 0<=y_min<y_max<=" << dims.height;
            fail("bbox_bounds", field + ".bbox", msg.str());
        }
    }

    if (word_count(sample.hazard) < kMinHazardWords) {
        fail("hazard_min_words", "hazard", "hazard shorter than 5 words");
    }
    const auto refs = referenced_entities(sample.hazard);
    const std::set<int> referenced(refs.begin(), refs.end());
    for (int idx : indices) {
        if (!referenced.contains(idx)) {
            fail("entity_referenced", "hazard", "entity " + std::to_string(idx) + " unreferenced");
        }
    }
    for (int idx : referenced) {
        if (!indices.contains(idx)) {
            fail("reference_annotated", "hazard", "Entity #" + std::to_string(idx) + " has no annotation");
        }
    }
    if (options.require_hazard_type && !sample.hazard_type) {
        fail("hazard_type_present", "hazard_type", "hazard_type required for subset selection");
    }
    return report;
}

std::string sample_to_json_line(const Sample& s) {
    json j;
    j["id"] = s.id;
    j["image"] = s.image_ref;
    j["source"] = std::string(to_string(s.source));
    j["speed_kmh"] = s.speed_kmh;
    j["split"] = std::string(to_string(s.split));
    j["hazard"] = s.hazard;
    if (s.hazard_type) j["hazard_type"] = std::string(to_string(*s.hazard_type));
    if (s.image_dims) {
        j["width"] = s.image_dims->width;
        j["height"] = s.image_dims->height;
    }
    json ents = json::array();
    for (const auto& e : s.entities) {
        ents.push_back({{"index", e.index},
                        {"bbox", {e.bbox.x_min, e.bbox.y_min, e.bbox.x_max, e.bbox.y_max}},
                        {"description", e.description}});
    }
    j["entities"] = ents;
    return j.dump();
}

Sample sample_from_json_line(const std::string& line) {
    json j = json::parse(line);
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.image_ref = j.at("image").get<std::string>();
    s.source = parse_source(j.at("source").get<std::string>());
    s.speed_kmh = j.at("speed_kmh").get<int>();
    s.split = parse_split(j.at("split").get<std::string>());
    s.hazard = j.at("hazard").get<std::string>();
    if (j.contains("hazard_type") && !j["hazard_type"].is_null()) {
        s.hazard_type = parse_hazard_type(j["hazard_type"].get<std::string>());
    }
    if (j.contains("width") && j.contains("height")) {
        s.image_dims = ImageDims{j["width"].get<int>(), j["height"].get<int>()};
    }
    for (const auto& e : j.at("entities")) {
        const auto& b = e.at("bbox");
        if (!b.is_array() || b.size() != 4) throw DataError("bbox must have four coordinates");
        s.entities.push_back({e.at("index").get<int>(),
                              BBox{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()},
                              e.at("description").get<std::string>()});
    }
    return s;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus " + path.string());
    const auto root = options.image_root.empty() ? path.parent_path() : options.image_root;

    Corpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            corpus.samples.push_back(sample_from_json_line(line));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": parse error: " + e.what());
        }
    }

    std::set<std::string> ids;
    std::vector<std::string> problems;
    for (auto& s : corpus.samples) {
        if (!ids.insert(s.id).second) problems.push_back(s.id + ": duplicate id");
        ImageDims dims;
        if (s.image_dims) {
            dims = *s.image_dims;
        } else {
            try {
                auto [w, h] = png_dimensions(root / s.image_ref);
                dims = {w, h};
            } catch (const std::exception& e) {
                problems.push_back(s.id + ": " + e.what());
                continue;
            }
        }
        const auto report = validate_sample(s, dims);
        if (!report.ok) problems.push_back(s.id + ": " + report.summary());
    }
    if (!problems.empty()) {
        std::string msg = "corpus " + path.string() + " failed validation:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& s : corpus.samples) out += sample_to_json_line(s) + "\n";
    return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write corpus " + path.string());
    out << corpus_to_jsonl(corpus);
}

std::vector<std::string> select_retrieval_subset(const Corpus& corpus, Split split,
                                                 const std::map<HazardType, int>& counts, std::uint64_t seed) {
    Rng rng(seed);
    std::set<std::string> chosen;
    for (HazardType type : kHazardTypes) {
        auto it = counts.find(type);
        const int want = it == counts.end() ? 0 : it->second;
        if (want < 0) throw DataError("negative count for " + std::string(to_string(type)));
        std::vector<std::string> pool;
        for (const auto& s : corpus.samples) {
            if (s.split == split && s.hazard_type == type) pool.push_back(s.id);
        }
        if (static_cast<int>(pool.size()) < want) {
            throw DataError("insufficient samples of type " + std::string(to_string(type)) + " in split " +
                            std::string(to_string(split)) + ": requested " + std::to_string(want) + ", available " +
                            std::to_string(pool.size()));
        }
        rng.shuffle(pool);
        chosen.insert(pool.begin(), pool.begin() + want);
    }
    std::vector<std::string> out;
    for (const auto& s : corpus.samples) {
        if (chosen.contains(s.id)) out.push_back(s.id);
    }
    return out;
}

Image load_sample_image(const Sample& sample, const std::filesystem::path& root) {
    return read_png(root / sample.image_ref);
}

ImageSource disk_image_source(const std::filesystem::path& root) {
    auto cache = std::make_shared<std::map<std::string, Image>>();
    auto lock = std::make_shared<std::mutex>();
    return [root, cache, lock](const Sample& s) -> const Image& {
        std::lock_guard guard(*lock);
        auto it = cache->find(s.image_ref);
        if (it == cache->end()) it = cache->emplace(s.image_ref, load_sample_image(s, root)).first;
        return it->second;
    };
}

ImageSource memory_image_source(const SynthResult& result) {
    return [&result](const Sample& s) -> const Image& {
        const auto it = result.images.find(s.image_ref);
        if (it == result.images.end()) throw DataError(s.id + ": no image for " + s.image_ref);
        return it->second;
    };
}

}  // namespace hazard::data
