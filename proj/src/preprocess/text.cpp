#include "hazard/dataset/dataset.hpp"
#include "hazard/preprocess/preprocess.hpp"
#include "hazard/tensor/rng.hpp"

#include <cctype>
#include <set>
#include <stdexcept>

namespace hazard::prep {

Permutation random_permutation(const data::Sample& sample, Rng& rng) {
    std::vector<int> from;
    for (const auto& e : sample.entities) from.push_back(e.index);
    std::vector<int> to = from;
    rng.shuffle(to);
    Permutation perm;
    for (std::size_t i = 0; i < from.size(); ++i) perm[from[i]] = to[i];
    return perm;
}

Permutation inverse(const Permutation& perm) {
    Permutation inv;
    for (const auto& [a, b] : perm) inv[b] = a;
    return inv;
}

data::Sample shuffle_entities(const data::Sample& sample, const Permutation& perm) {
    std::set<int> domain;
    for (const auto& e : sample.entities) domain.insert(e.index);
    std::set<int> keys;
    std::set<int> image;
    for (const auto& [a, b] : perm) {
        keys.insert(a);
        image.insert(b);
    }
    if (keys != domain || image != domain || perm.size() != domain.size()) {
        throw std::invalid_argument("permutation is not a bijection on the sample's entity indices");
    }

    data::Sample out = sample;
    for (auto& e : out.entities) e.index = perm.at(e.index);

    // Single pass over the original mentions: every rewrite reads the source
    // text, so a swap (1<->2) can never cascade.
    std::string text;
    std::size_t cursor = 0;
    for (const auto& ref : data::find_entity_refs(sample.hazard)) {
        std::size_t digits = ref.end;
        while (digits > ref.begin && std::isdigit(static_cast<unsigned char>(sample.hazard[digits - 1]))) --digits;
        text.append(sample.hazard, cursor, digits - cursor);
        auto it = perm.find(ref.index);
        text += std::to_string(it == perm.end() ? ref.index : it->second);
        cursor = ref.end;
    }
    text.append(sample.hazard, cursor, std::string::npos);
    out.hazard = std::move(text);
    return out;
}

ComprehensiveText make_comprehensive_text(const data::Sample& sample) {
    ComprehensiveText out;
    const std::string& src = sample.hazard;
    std::set<int> expanded;
    std::size_t cursor = 0;
    auto insert = [&](const std::string& piece) {
        out.inserted.emplace_back(out.text.size(), out.text.size() + piece.size());
        out.text += piece;
    };
    for (const auto& ref : data::find_entity_refs(src)) {
        if (expanded.contains(ref.index)) continue;
        const auto* entity = sample.entity(ref.index);
        if (entity == nullptr) continue;
        expanded.insert(ref.index);
        out.text.append(src, cursor, ref.end - cursor);
        cursor = ref.end;
        const bool followed_by_word = ref.end < src.size() && std::isspace(static_cast<unsigned char>(src[ref.end]));
        insert(", " + entity->description + (followed_by_word ? "," : ""));
    }
    out.text.append(src, cursor, std::string::npos);
    const auto last = out.text.find_last_not_of(" \t\r\n");
    if (last != std::string::npos && out.text[last] != '.' && out.text[last] != '!' && out.text[last] != '?') {
        if (last + 1 == out.text.size()) {
            insert(".");
        }
    }
    return out;
}

}  // namespace hazard::prep
