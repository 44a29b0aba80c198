#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hazard::gen {

// Case-preserving whitespace word vocabulary for the toy decoder, so decoded
// text joins back into the exact reference string.
class WordVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    WordVocab();
    static WordVocab build(const std::vector<std::string>& texts);
    static WordVocab parse(std::string_view serialized);

    int id(std::string_view word) const;
    const std::string& word(int id) const;
    int size() const { return static_cast<int>(words_.size()); }

    std::vector<int> encode(std::string_view text) const;
    // Stops at EOS; specials other than UNK are dropped.
    std::string decode(const std::vector<int>& ids) const;
    std::string serialize() const;  // one word per line

private:
    void add(const std::string& w);

    std::vector<std::string> words_;
    std::map<std::string, int, std::less<>> ids_;
};

std::vector<std::string> split_words(std::string_view text);

}  // namespace hazard::gen
