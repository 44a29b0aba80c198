#include "hazard/retrieval/tokenizer.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace hazard::retrieval {

std::uint32_t fnv1a(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

std::vector<std::string> lowercase_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

namespace {

TokenizedText finish(std::vector<int> ids, std::size_t total, int max_len) {
    TokenizedText out;
    out.ids = std::move(ids);
    if (total > static_cast<std::size_t>(max_len)) {
        out.truncated = true;
        out.warning = "text truncated from " + std::to_string(total) + " to " + std::to_string(max_len) + " tokens";
    }
    return out;
}

}  // namespace

HashedTokenizer::HashedTokenizer(int vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size < 8) throw std::invalid_argument("hashed vocabulary too small");
}

int HashedTokenizer::word_id(std::string_view lowered_word) const {
    return 3 + static_cast<int>(fnv1a(lowered_word) % static_cast<std::uint32_t>(vocab_size_ - 3));
}

TokenizedText HashedTokenizer::encode(std::string_view text, int max_len) const {
    const auto words = lowercase_words(text);
    if (words.empty()) throw std::invalid_argument("cannot encode empty text");
    if (max_len < 2) throw std::invalid_argument("max_len must leave room for one word");
    std::vector<int> ids{cls_id()};
    for (const auto& w : words) {
        if (static_cast<int>(ids.size()) == max_len) break;
        ids.push_back(word_id(w));
    }
    return finish(std::move(ids), words.size() + 1, max_len);
}

WordPieceTokenizer::WordPieceTokenizer(const std::filesystem::path& vocab_file) {
    std::ifstream in(vocab_file);
    if (!in) throw std::runtime_error("cannot open vocabulary " + vocab_file.string());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        vocab_.push_back(line);
    }
    index();
}

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) { index(); }

void WordPieceTokenizer::index() {
    for (std::size_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], static_cast<int>(i));
    auto need = [&](const char* tok) {
        const auto it = ids_.find(tok);
        if (it == ids_.end()) throw std::runtime_error(std::string("vocabulary lacks ") + tok);
        return it->second;
    };
    cls_ = need("[CLS]");
    unk_ = need("[UNK]");
}

std::vector<std::string> WordPieceTokenizer::wordpieces(std::string_view word) const {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < word.size()) {
        std::size_t end = word.size();
        std::string found;
        while (end > start) {
            std::string piece(word.substr(start, end - start));
            if (start > 0) piece = "##" + piece;
            if (ids_.contains(piece)) {
                found = std::move(piece);
                break;
            }
            --end;
        }
        if (found.empty()) return {"[UNK]"};
        out.push_back(std::move(found));
        start = end;
    }
    return out;
}

TokenizedText WordPieceTokenizer::encode(std::string_view text, int max_len) const {
    // Basic tokenization: lowercase, then split punctuation into its own words.
    std::vector<std::string> words;
    for (const auto& w : lowercase_words(text)) {
        std::string cur;
        for (char ch : w) {
            if (std::ispunct(static_cast<unsigned char>(ch))) {
                if (!cur.empty()) words.push_back(std::move(cur));
                cur.clear();
                words.emplace_back(1, ch);
            } else {
                cur.push_back(ch);
            }
        }
        if (!cur.empty()) words.push_back(std::move(cur));
    }
    if (words.empty()) throw std::invalid_argument("cannot encode empty text");
    std::vector<int> ids{cls_};
    std::size_t total = 1;
    for (const auto& w : words) {
        for (const auto& p : wordpieces(w)) {
            ++total;
            if (static_cast<int>(ids.size()) < max_len) {
                const auto it = ids_.find(p);
                ids.push_back(it == ids_.end() ? unk_ : it->second);
            }
        }
    }
    return finish(std::move(ids), total, max_len);
}

}  // namespace hazard::retrieval
