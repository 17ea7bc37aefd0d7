#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace esc::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Trim + ASCII case fold. Used for strategy and relation lookup.
std::string normalize_key(std::string_view s);

/// Lowercases and splits into word tokens and single punctuation tokens.
/// Runs of [a-z0-9] and bytes >= 0x80 form words; every other non-space
/// byte is its own token. "Don't!" -> {"don", "'", "t", "!"}.
std::vector<std::string> tokenize(std::string_view s);

/// Whitespace split without any normalization.
std::vector<std::string> split_ws(std::string_view s);

/// Joins model tokens back into readable text, attaching punctuation to
/// the preceding word.
std::string detokenize(const std::vector<std::string>& tokens);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Standard English stopword list (the common NLTK list).
const std::unordered_set<std::string>& english_stopwords();

bool is_punct_token(std::string_view tok);

} // namespace esc::text
