#pragma once

#include "hazard/dataset/types.hpp"
#include "hazard/image/image.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace hazard::data {

struct Violation {
    std::string rule;
    std::string field;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    std::string summary() const;
};

struct ValidationOptions {
    bool require_hazard_type = false;
};

ValidationReport validate_sample(const Sample& sample, ImageDims dims, const ValidationOptions& options = {});

// One "Entity #n" mention: byte range [begin, end) within the text.
struct EntityRef {
    std::size_t begin = 0;
    std::size_t end = 0;
    int index = 0;
};

// Case-insensitive; whitespace between "#" and the digits is tolerated.
std::vector<EntityRef> find_entity_refs(std::string_view text);
// Entity indices referenced in `text`, in order of appearance.
std::vector<int> referenced_entities(std::string_view text);
int word_count(const std::string& text);

// One JSON object per line.
std::string sample_to_json_line(const Sample& sample);
Sample sample_from_json_line(const std::string& line);

struct LoadOptions {
    // Directory image references are resolved against; defaults to the corpus file's directory.
    std::filesystem::path image_root;
};

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {});
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
std::string corpus_to_jsonl(const Corpus& corpus);

// Balanced per-type draw from one split; output is in corpus order.
std::vector<std::string> select_retrieval_subset(const Corpus& corpus, Split split,
                                                 const std::map<HazardType, int>& counts, std::uint64_t seed);

struct SynthSpec {
    int train = 32;
    int val = 8;
    int test = 8;
    ImageDims dims{64, 64};
};

struct SynthResult {
    Corpus corpus;
    std::map<std::string, Image> images;  // keyed by image_ref
};

SynthResult synthesize_corpus(const SynthSpec& spec, std::uint64_t seed);
// Writes corpus.jsonl plus images/ under `dir`; returns the corpus file path.
std::filesystem::path write_synthetic(const SynthResult& result, const std::filesystem::path& dir);

// Resolves image references of a loaded corpus.
Image load_sample_image(const Sample& sample, const std::filesystem::path& root);

// Image lookup used by training and scoring; decoded images are cached.
using ImageSource = std::function<const Image&(const Sample&)>;
ImageSource disk_image_source(const std::filesystem::path& root);
// The result must outlive the returned source.
ImageSource memory_image_source(const SynthResult& result);

}  // namespace hazard::data
