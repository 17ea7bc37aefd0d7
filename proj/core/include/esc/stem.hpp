#pragma once

#include <string>
#include <string_view>

namespace esc::text {

/// Porter stemmer, original 1980 rule set (no later extensions, and short
/// words are not exempt). Input is lowercased first.
std::string porter_stem(std::string_view word);

} // namespace esc::text
