#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hazard::retrieval {

struct TokenizedText {
    std::vector<int> ids;  // starts with the CLS id
    bool truncated = false;
    std::string warning;  // set when truncated
};

class TextTokenizer {
public:
    virtual ~TextTokenizer() = default;
    // Throws std::invalid_argument on text without any token.
    virtual TokenizedText encode(std::string_view text, int max_len) const = 0;
    virtual int vocab_size() const = 0;
    virtual int cls_id() const = 0;
};

// Lowercased whitespace words hashed (FNV-1a) into a fixed vocabulary.
// Ids 0..2 are reserved for PAD, CLS and UNK.
class HashedTokenizer : public TextTokenizer {
public:
    explicit HashedTokenizer(int vocab_size);
    TokenizedText encode(std::string_view text, int max_len) const override;
    int vocab_size() const override { return vocab_size_; }
    int cls_id() const override { return 1; }
    int word_id(std::string_view lowered_word) const;

private:
    int vocab_size_;
};

// BERT-style uncased WordPiece over a vocab.txt file.
class WordPieceTokenizer : public TextTokenizer {
public:
    explicit WordPieceTokenizer(const std::filesystem::path& vocab_file);
    explicit WordPieceTokenizer(std::vector<std::string> vocab);
    TokenizedText encode(std::string_view text, int max_len) const override;
    int vocab_size() const override { return static_cast<int>(vocab_.size()); }
    int cls_id() const override { return cls_; }

    std::vector<std::string> wordpieces(std::string_view word) const;

private:
    void index();

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> ids_;
    int cls_ = 0;
    int unk_ = 0;
};

std::uint32_t fnv1a(std::string_view s);

// Splits on whitespace and lowercases ASCII.
std::vector<std::string> lowercase_words(std::string_view text);

}  // namespace hazard::retrieval
