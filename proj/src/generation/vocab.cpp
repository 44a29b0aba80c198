#include "hazard/generation/vocab.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

namespace hazard::gen {

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

WordVocab::WordVocab() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(s);
}

void WordVocab::add(const std::string& w) {
    if (ids_.contains(w)) return;
    ids_.emplace(w, static_cast<int>(words_.size()));
    words_.push_back(w);
}

WordVocab WordVocab::build(const std::vector<std::string>& texts) {
    std::set<std::string> all;
    for (const auto& t : texts) {
        for (auto& w : split_words(t)) all.insert(std::move(w));
    }
    WordVocab v;
    for (const auto& w : all) v.add(w);
    return v;
}

WordVocab WordVocab::parse(std::string_view serialized) {
    WordVocab v;
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < serialized.size()) {
        const auto nl = serialized.find('\n', pos);
        const auto end = nl == std::string_view::npos ? serialized.size() : nl;
        lines.emplace_back(serialized.substr(pos, end - pos));
        pos = end + 1;
    }
    if (lines.size() < 4 || lines[0] != "<pad>" || lines[1] != "<bos>" || lines[2] != "<eos>" || lines[3] != "<unk>") {
        throw std::runtime_error("vocabulary file does not start with the special tokens");
    }
    for (std::size_t i = 4; i < lines.size(); ++i) {
        if (lines[i].empty()) throw std::runtime_error("empty word in vocabulary");
        v.add(lines[i]);
    }
    return v;
}

int WordVocab::id(std::string_view word) const {
    const auto it = ids_.find(word);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& WordVocab::word(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("token id outside vocabulary");
    return words_[static_cast<std::size_t>(id)];
}

std::vector<int> WordVocab::encode(std::string_view text) const {
    std::vector<int> out;
    for (const auto& w : split_words(text)) out.push_back(id(w));
    return out;
}

std::string WordVocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kEos) break;
        if (id == kPad || id == kBos) continue;
        if (!out.empty()) out.push_back(' ');
        out += word(id);
    }
    return out;
}

std::string WordVocab::serialize() const {
    std::string out;
    for (const auto& w : words_) out += w + "\n";
    return out;
}

}  // namespace hazard::gen
