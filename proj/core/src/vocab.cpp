#include "esc/vocab.hpp"

#include <algorithm>
#include <map>

#include "esc/error.hpp"
#include "esc/text.hpp"

namespace esc {

Vocabulary::Vocabulary() {
    for (const char* s : {"<pad>", "<s>", "</s>", "<unk>", "<sep>"}) add(s);
}

int Vocabulary::add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    const int id = size();
    tokens_.push_back(word);
    index_.emplace(word, id);
    return id;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, std::size_t min_count,
                             std::size_t max_size, const std::vector<std::string>& always) {
    Vocabulary v;
    for (const auto& w : always)
        for (const auto& t : text::tokenize(w)) v.add(t);
    std::map<std::string, std::size_t> counts;
    for (const auto& s : texts)
        for (auto& t : text::tokenize(s)) ++counts[t];
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [w, c] : ranked) {
        if (static_cast<std::size_t>(v.size()) >= max_size) break;
        if (c >= min_count) v.add(w);
    }
    return v;
}

int Vocabulary::id(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.count(std::string(word)) > 0; }

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw InvalidArgument("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view s) const {
    std::vector<int> out;
    for (const auto& t : text::tokenize(s)) out.push_back(id(t));
    return out;
}

std::vector<std::string> Vocabulary::words(const std::vector<int>& ids) const {
    std::vector<std::string> out;
    for (int i : ids)
        if (!is_special(i) || i == kUnk) out.push_back(token(i));
    return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> toks;
    for (int i : ids)
        if (!is_special(i)) toks.push_back(token(i));
    return text::detokenize(toks);
}

nlohmann::json Vocabulary::to_json() const { return tokens_; }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    const auto toks = j.get<std::vector<std::string>>();
    if (toks.size() < 5) throw FormatError("vocabulary lacks special tokens");
    for (std::size_t i = 0; i < 5; ++i)
        if (toks[i] != v.tokens_[i]) throw FormatError("vocabulary special tokens out of order");
    for (const auto& t : toks) v.add(t);
    if (v.size() != static_cast<int>(toks.size())) throw FormatError("vocabulary has duplicates");
    return v;
}

} // namespace esc
