#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace esc {

/// Word-level vocabulary over text::tokenize() output. Ids 0..4 are the
/// special tokens.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kSep = 4;

    Vocabulary();

    /// Keeps words seen at least `min_count` times, most frequent first
    /// (ties alphabetical), up to `max_size` entries in total. Words in
    /// `always` are added first regardless of counts.
    static Vocabulary build(const std::vector<std::string>& texts, std::size_t min_count,
                            std::size_t max_size, const std::vector<std::string>& always = {});

    int add(const std::string& word);
    int id(std::string_view word) const;
    bool contains(std::string_view word) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()); }
    static bool is_special(int id) { return id >= 0 && id <= kSep; }

    std::vector<int> encode(std::string_view text) const;
    /// Drops special tokens and detokenizes.
    std::string decode(const std::vector<int>& ids) const;
    std::vector<std::string> words(const std::vector<int>& ids) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

} // namespace esc
