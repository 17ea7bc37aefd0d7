#include "esc/stem.hpp"

#include <functional>
#include <vector>

#include "esc/text.hpp"

namespace esc::text {
namespace {

bool consonant(const std::string& w, std::size_t i) {
    switch (w[i]) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return false;
    case 'y': return i == 0 ? true : !consonant(w, i - 1);
    default: return true;
    }
}

// Number of VC sequences.
int measure(const std::string& s) {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool c = consonant(s, i);
        if (c && prev_vowel) ++m;
        prev_vowel = !c;
    }
    return m;
}

bool has_vowel(const std::string& s) {
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!consonant(s, i)) return true;
    return false;
}

bool ends_double_consonant(const std::string& w) {
    const auto n = w.size();
    return n >= 2 && w[n - 1] == w[n - 2] && consonant(w, n - 1);
}

bool ends_cvc(const std::string& w) {
    const auto n = w.size();
    if (n < 3) return false;
    const char last = w[n - 1];
    return consonant(w, n - 3) && !consonant(w, n - 2) && consonant(w, n - 1) && last != 'w' && last != 'x' &&
           last != 'y';
}

bool ends_with(const std::string& w, std::string_view suf) {
    return w.size() >= suf.size() && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
}

using Cond = std::function<bool(const std::string&)>;
struct Rule {
    std::string_view suffix;  // "*d": any double consonant
    std::string replacement;
    Cond cond;
};

// The first rule whose suffix matches decides; a failed condition leaves
// the word as is.
std::string apply_rules(const std::string& w, const std::vector<Rule>& rules) {
    for (const auto& r : rules) {
        if (r.suffix == "*d") {
            if (!ends_double_consonant(w)) continue;
            const std::string stem = w.substr(0, w.size() - 2);
            return (!r.cond || r.cond(stem)) ? stem + r.replacement : w;
        }
        if (ends_with(w, r.suffix)) {
            const std::string stem = w.substr(0, w.size() - r.suffix.size());
            return (!r.cond || r.cond(stem)) ? stem + r.replacement : w;
        }
    }
    return w;
}

const Cond m_gt0 = [](const std::string& s) { return measure(s) > 0; };
const Cond m_gt1 = [](const std::string& s) { return measure(s) > 1; };

std::string step1a(const std::string& w) {
    return apply_rules(w, {{"sses", "ss", {}}, {"ies", "i", {}}, {"ss", "ss", {}}, {"s", "", {}}});
}

std::string step1b(const std::string& w) {
    if (ends_with(w, "eed")) {
        const std::string stem = w.substr(0, w.size() - 3);
        return measure(stem) > 0 ? stem + "ee" : w;
    }
    std::string mid;
    bool hit = false;
    for (std::string_view suf : {std::string_view("ed"), std::string_view("ing")}) {
        if (ends_with(w, suf)) {
            mid = w.substr(0, w.size() - suf.size());
            if (has_vowel(mid)) {
                hit = true;
                break;
            }
        }
    }
    if (!hit) return w;
    const char last = mid.empty() ? '\0' : mid.back();
    return apply_rules(mid, {{"at", "ate", {}},
                             {"bl", "ble", {}},
                             {"iz", "ize", {}},
                             {"*d", std::string(1, last),
                              [last](const std::string&) { return last != 'l' && last != 's' && last != 'z'; }},
                             {"", "e", [](const std::string& s) { return measure(s) == 1 && ends_cvc(s); }}});
}

std::string step1c(const std::string& w) { return apply_rules(w, {{"y", "i", has_vowel}}); }

std::string step2(const std::string& w) {
    return apply_rules(w, {{"ational", "ate", m_gt0}, {"tional", "tion", m_gt0}, {"enci", "ence", m_gt0},
                           {"anci", "ance", m_gt0},   {"izer", "ize", m_gt0},    {"abli", "able", m_gt0},
                           {"alli", "al", m_gt0},     {"entli", "ent", m_gt0},   {"eli", "e", m_gt0},
                           {"ousli", "ous", m_gt0},   {"ization", "ize", m_gt0}, {"ation", "ate", m_gt0},
                           {"ator", "ate", m_gt0},    {"alism", "al", m_gt0},    {"iveness", "ive", m_gt0},
                           {"fulness", "ful", m_gt0}, {"ousness", "ous", m_gt0}, {"aliti", "al", m_gt0},
                           {"iviti", "ive", m_gt0},   {"biliti", "ble", m_gt0}});
}

std::string step3(const std::string& w) {
    return apply_rules(w, {{"icate", "ic", m_gt0}, {"ative", "", m_gt0}, {"alize", "al", m_gt0},
                           {"iciti", "ic", m_gt0}, {"ical", "ic", m_gt0}, {"ful", "", m_gt0},
                           {"ness", "", m_gt0}});
}

std::string step4(const std::string& w) {
    const Cond ion = [](const std::string& s) { return measure(s) > 1 && (s.back() == 's' || s.back() == 't'); };
    return apply_rules(w, {{"al", "", m_gt1},   {"ance", "", m_gt1}, {"ence", "", m_gt1}, {"er", "", m_gt1},
                           {"ic", "", m_gt1},   {"able", "", m_gt1}, {"ible", "", m_gt1}, {"ant", "", m_gt1},
                           {"ement", "", m_gt1}, {"ment", "", m_gt1}, {"ent", "", m_gt1}, {"ion", "", ion},
                           {"ou", "", m_gt1},   {"ism", "", m_gt1},  {"ate", "", m_gt1},  {"iti", "", m_gt1},
                           {"ous", "", m_gt1},  {"ive", "", m_gt1},  {"ize", "", m_gt1}});
}

std::string step5a(const std::string& w) {
    if (!ends_with(w, "e")) return w;
    const std::string stem = w.substr(0, w.size() - 1);
    const int m = measure(stem);
    if (m > 1 || (m == 1 && !ends_cvc(stem))) return stem;
    return w;
}

std::string step5b(const std::string& w) {
    return apply_rules(w, {{"ll", "l", [&w](const std::string&) { return measure(w.substr(0, w.size() - 1)) > 1; }}});
}

} // namespace

std::string porter_stem(std::string_view word) {
    std::string w = to_lower(word);
    w = step1a(w);
    w = step1b(w);
    w = step1c(w);
    w = step2(w);
    w = step3(w);
    w = step4(w);
    w = step5a(w);
    return step5b(w);
}

} // namespace esc::text
