#include "esc/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "esc/error.hpp"
#include "esc/text.hpp"

namespace esc::corpus {

using nlohmann::json;

std::string_view speaker_name(Speaker s) {
    return s == Speaker::Seeker ? "seeker" : "supporter";
}

StrategyTaxonomy::StrategyTaxonomy(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw InvalidArgument("strategy taxonomy is empty");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
        auto key = text::normalize_key(l);
        if (key.empty()) throw InvalidArgument("empty strategy name");
        if (!seen.insert(key).second) throw InvalidArgument("duplicate strategy name: " + l);
        keys_.push_back(std::move(key));
    }
}

const StrategyTaxonomy& StrategyTaxonomy::esconv() {
    static const StrategyTaxonomy tax({"Question", "Restatement or Paraphrasing",
                                       "Reflection of feelings", "Self-disclosure",
                                       "Affirmation and Reassurance", "Providing Suggestions",
                                       "Information", "Others"});
    return tax;
}

const std::string& StrategyTaxonomy::name(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= labels_.size())
        throw InvalidArgument("strategy index out of range: " + std::to_string(index));
    return labels_[static_cast<std::size_t>(index)];
}

std::optional<int> StrategyTaxonomy::find(std::string_view name) const {
    const auto key = text::normalize_key(name);
    for (std::size_t i = 0; i < keys_.size(); ++i)
        if (keys_[i] == key) return static_cast<int>(i);
    return std::nullopt;
}

int StrategyTaxonomy::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw NotFound("unknown strategy \"" + std::string(name) + "\"");
}

std::size_t LoadResult::utterance_count() const {
    std::size_t n = 0;
    for (const auto& c : conversations) n += c.utterances.size();
    return n;
}

namespace {

Conversation parse_record(const json& rec, std::size_t index, const StrategyTaxonomy& tax) {
    if (!rec.is_object()) throw FormatError("record is not an object");
    if (!rec.contains("situation") || !rec["situation"].is_string())
        throw FormatError("missing string field \"situation\"");
    if (!rec.contains("dialog") || !rec["dialog"].is_array())
        throw FormatError("missing list field \"dialog\"");

    Conversation conv;
    conv.id = index;
    conv.situation = rec["situation"].get<std::string>();
    std::size_t turn = 0;
    for (const auto& t : rec["dialog"]) {
        const auto where = " (turn " + std::to_string(turn++) + ")";
        if (!t.is_object()) throw FormatError("dialog entry is not an object" + where);
        if (!t.contains("speaker") || !t["speaker"].is_string())
            throw FormatError("missing speaker" + where);
        if (!t.contains("content") || !t["content"].is_string())
            throw FormatError("missing content" + where);
        Utterance u;
        const auto speaker = text::normalize_key(t["speaker"].get<std::string>());
        if (speaker == "seeker" || speaker == "usr") {
            u.speaker = Speaker::Seeker;
        } else if (speaker == "supporter" || speaker == "sys") {
            u.speaker = Speaker::Supporter;
        } else {
            throw FormatError("unknown speaker \"" + t["speaker"].get<std::string>() + "\"" + where);
        }
        u.text = text::trim(t["content"].get<std::string>());
        if (u.text.empty()) throw FormatError("empty content" + where);
        if (u.speaker == Speaker::Supporter) {
            const json* ann = t.contains("annotation") ? &t["annotation"] : nullptr;
            if (!ann || !ann->is_object() || !ann->contains("strategy") ||
                !(*ann)["strategy"].is_string())
                throw FormatError("supporter turn without strategy annotation" + where);
            const auto s = (*ann)["strategy"].get<std::string>();
            auto idx = tax.find(s);
            if (!idx) throw FormatError("unknown strategy \"" + s + "\"" + where);
            u.strategy = *idx;
        }
        conv.utterances.push_back(std::move(u));
    }
    const bool has_supporter =
        std::any_of(conv.utterances.begin(), conv.utterances.end(),
                    [](const Utterance& u) { return u.speaker == Speaker::Supporter; });
    if (!has_supporter) throw FormatError("conversation has no supporter utterance");
    return conv;
}

void merge_consecutive(Conversation& conv) {
    std::vector<Utterance> merged;
    for (auto& u : conv.utterances) {
        if (!merged.empty() && merged.back().speaker == u.speaker &&
            merged.back().strategy == u.strategy) {
            merged.back().text += " " + u.text;
        } else {
            merged.push_back(std::move(u));
        }
    }
    conv.utterances = std::move(merged);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

LoadResult parse_corpus(std::string_view json_text, const LoadOptions& opts) {
    const StrategyTaxonomy& tax = opts.taxonomy ? *opts.taxonomy : StrategyTaxonomy::esconv();
    LoadResult result;
    if (text::trim(json_text).empty()) return result;

    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("corpus is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw FormatError("corpus top level must be a list");

    for (std::size_t i = 0; i < doc.size(); ++i) {
        try {
            auto conv = parse_record(doc[i], i, tax);
            if (opts.merge_consecutive) merge_consecutive(conv);
            result.conversations.push_back(std::move(conv));
        } catch (const Error& e) {
            result.errors.push_back({i, e.what()});
        }
    }
    return result;
}

LoadResult load_corpus(const std::filesystem::path& path, const LoadOptions& opts) {
    return parse_corpus(read_file(path), opts);
}

std::vector<std::string> distinct_strategies(std::string_view json_text) {
    std::vector<std::string> out;
    const auto doc = json::parse(json_text);
    for (const auto& rec : doc) {
        if (!rec.contains("dialog")) continue;
        for (const auto& t : rec["dialog"]) {
            if (!t.contains("annotation") || !t["annotation"].is_object()) continue;
            const auto& ann = t["annotation"];
            if (!ann.contains("strategy") || !ann["strategy"].is_string()) continue;
            auto key = text::normalize_key(ann["strategy"].get<std::string>());
            if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(std::move(key));
        }
    }
    return out;
}

Split split_corpus(const std::vector<Conversation>& conversations, std::uint64_t seed,
                   SplitRatio ratio) {
    const std::size_t n = conversations.size();
    const unsigned parts = (ratio.train > 0) + (ratio.valid > 0) + (ratio.test > 0);
    if (parts == 0) throw InvalidArgument("split ratio is all zero");
    if (n < parts)
        throw InvalidArgument("cannot split " + std::to_string(n) + " conversations into " +
                              std::to_string(parts) + " partitions");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    // Fisher-Yates with a fixed engine so the split is stable across standard libraries.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }

    const unsigned total = ratio.train + ratio.valid + ratio.test;
    std::size_t n_valid = n * ratio.valid / total;
    std::size_t n_test = n * ratio.test / total;
    if (ratio.valid > 0 && n_valid == 0) n_valid = 1;
    if (ratio.test > 0 && n_test == 0) n_test = 1;
    const std::size_t n_train = n - n_valid - n_test;

    Split s;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& c = conversations[order[k]];
        if (k < n_train)
            s.train.push_back(c);
        else if (k < n_train + n_valid)
            s.valid.push_back(c);
        else
            s.test.push_back(c);
    }
    return s;
}

Split apply_split_file(const std::vector<Conversation>& conversations,
                       const std::filesystem::path& split_file) {
    const auto doc = json::parse(read_file(split_file));
    std::unordered_map<std::size_t, const Conversation*> by_id;
    for (const auto& c : conversations) by_id[c.id] = &c;

    std::unordered_set<std::size_t> used;
    Split s;
    auto take = [&](const char* key, std::vector<Conversation>& dst) {
        if (!doc.contains(key)) throw FormatError(std::string("split file lacks \"") + key + "\"");
        for (const auto& v : doc[key]) {
            const auto id = v.get<std::size_t>();
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw FormatError("split file references unknown conversation " + std::to_string(id));
            if (!used.insert(id).second)
                throw FormatError("conversation " + std::to_string(id) + " assigned twice");
            dst.push_back(*it->second);
        }
    };
    take("train", s.train);
    take("valid", s.valid);
    take("test", s.test);
    return s;
}

json split_to_json(const Split& split) {
    auto ids = [](const std::vector<Conversation>& v) {
        json a = json::array();
        for (const auto& c : v) a.push_back(c.id);
        return a;
    };
    return {{"train", ids(split.train)}, {"valid", ids(split.valid)}, {"test", ids(split.test)}};
}

std::vector<ESCSample> build_samples(const Conversation& conversation) {
    std::vector<ESCSample> out;
    const auto& utts = conversation.utterances;
    for (std::size_t k = 0; k < utts.size(); ++k) {
        if (utts[k].speaker != Speaker::Supporter) continue;
        ESCSample s;
        s.conv_id = conversation.id;
        s.turn = k;
        s.situation = conversation.situation;
        s.context.assign(utts.begin(), utts.begin() + static_cast<std::ptrdiff_t>(k));
        s.strategy = utts[k].strategy.value_or(0);
        s.response = utts[k].text;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ESCSample> build_samples(const std::vector<Conversation>& conversations) {
    std::vector<ESCSample> out;
    for (const auto& c : conversations) {
        auto part = build_samples(c);
        out.insert(out.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
    return out;
}

namespace {

json utterance_json(const Utterance& u, const StrategyTaxonomy& tax) {
    json j = {{"speaker", speaker_name(u.speaker)}, {"content", u.text}};
    if (u.strategy) j["annotation"] = {{"strategy", tax.name(*u.strategy)}};
    else j["annotation"] = json::object();
    return j;
}

Utterance utterance_from_json(const json& j, const StrategyTaxonomy& tax) {
    Utterance u;
    u.speaker = j.at("speaker").get<std::string>() == "supporter" ? Speaker::Supporter
                                                                  : Speaker::Seeker;
    u.text = j.at("content").get<std::string>();
    if (j.contains("annotation") && j["annotation"].contains("strategy"))
        u.strategy = tax.index(j["annotation"]["strategy"].get<std::string>());
    return u;
}

} // namespace

json to_json(const Conversation& c, const StrategyTaxonomy& tax) {
    json dialog = json::array();
    for (const auto& u : c.utterances) dialog.push_back(utterance_json(u, tax));
    return {{"situation", c.situation}, {"dialog", std::move(dialog)}};
}

json to_json(const ESCSample& s, const StrategyTaxonomy& tax) {
    json ctx = json::array();
    for (const auto& u : s.context) ctx.push_back(utterance_json(u, tax));
    return {{"conv_id", s.conv_id},   {"turn", s.turn},
            {"situation", s.situation}, {"context", std::move(ctx)},
            {"strategy", tax.name(s.strategy)}, {"response", s.response}};
}

ESCSample sample_from_json(const json& j, const StrategyTaxonomy& tax) {
    ESCSample s;
    s.conv_id = j.at("conv_id").get<std::size_t>();
    s.turn = j.at("turn").get<std::size_t>();
    s.situation = j.at("situation").get<std::string>();
    for (const auto& u : j.at("context")) s.context.push_back(utterance_from_json(u, tax));
    s.strategy = tax.index(j.at("strategy").get<std::string>());
    s.response = j.at("response").get<std::string>();
    return s;
}

void write_samples(const std::filesystem::path& path, const std::vector<ESCSample>& samples,
                   const StrategyTaxonomy& tax) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& s : samples) out << to_json(s, tax).dump() << '\n';
}

std::vector<ESCSample> read_samples(const std::filesystem::path& path, const StrategyTaxonomy& tax) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<ESCSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(sample_from_json(json::parse(line), tax));
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace esc::corpus
