#include "esc/emotion.hpp"

#include <algorithm>
#include <fstream>

#include "esc/error.hpp"
#include "esc/text.hpp"

namespace esc::emotion {

using nlohmann::json;

const std::vector<std::string>& taxonomy() {
    static const std::vector<std::string> labels = {
        "admiration", "amusement",   "anger",       "annoyance",     "approval",
        "caring",     "confusion",   "curiosity",   "desire",        "disappointment",
        "disapproval", "disgust",    "embarrassment", "excitement",  "fear",
        "gratitude",  "grief",       "joy",         "love",          "nervousness",
        "optimism",   "pride",       "realization", "relief",        "remorse",
        "sadness",    "surprise",    "neutral"};
    return labels;
}

namespace {

std::size_t label_index(const std::string& name) {
    const auto& tax = taxonomy();
    auto it = std::find(tax.begin(), tax.end(), name);
    if (it == tax.end()) throw InvalidArgument("unknown emotion label \"" + name + "\"");
    return static_cast<std::size_t>(it - tax.begin());
}

} // namespace

EmotionLabel::EmotionLabel(std::string name) : name_(std::move(name)) { label_index(name_); }

const LexiconDetector::Lexicon& LexiconDetector::builtin_lexicon() {
    static const Lexicon lex = {
        {"admiration", {"amazing", "impressive", "admire", "wonderful", "brilliant", "great job"}},
        {"amusement", {"funny", "lol", "haha", "hilarious", "laugh"}},
        {"anger", {"angry", "furious", "mad", "rage", "hate", "pissed"}},
        {"annoyance", {"annoyed", "annoying", "irritated", "frustrated", "frustrating", "fed up"}},
        {"approval", {"agree", "right", "good idea", "makes sense", "exactly"}},
        {"caring", {"here for you", "care", "support you", "take care", "i understand",
                    "be there for you"}},
        {"confusion", {"confused", "confusing", "not sure", "don't know", "unsure", "lost about"}},
        {"curiosity", {"wonder", "curious", "what do you", "how do you", "how did", "why"}},
        {"desire", {"wish", "want", "hope to", "would love", "long for"}},
        {"disappointment", {"disappointed", "let down", "disappointing", "failed"}},
        {"disapproval", {"wrong", "unfair", "disagree", "should not", "shouldn't"}},
        {"disgust", {"disgusting", "gross", "sick of", "revolting"}},
        {"embarrassment", {"embarrassed", "ashamed", "awkward", "humiliated"}},
        {"excitement", {"excited", "can't wait", "thrilled", "exciting"}},
        {"fear", {"afraid", "scared", "fear", "terrified", "frightened", "panic"}},
        {"gratitude", {"thank", "thanks", "grateful", "appreciate"}},
        {"grief", {"died", "passed away", "funeral", "grieving", "mourning", "loss of"}},
        {"joy", {"happy", "glad", "joy", "delighted", "enjoy"}},
        {"love", {"love", "adore", "my heart"}},
        {"nervousness", {"nervous", "anxious", "anxiety", "worried", "worry", "stress", "stressed"}},
        {"optimism", {"hopeful", "better soon", "will get better", "optimistic", "positive",
                      "you can do"}},
        {"pride", {"proud", "accomplished"}},
        {"realization", {"realize", "realized", "i see", "now i know"}},
        {"relief", {"relieved", "relief", "phew"}},
        {"remorse", {"sorry", "regret", "my fault", "apologize"}},
        {"sadness", {"sad", "hopeless", "depressed", "lonely", "unhappy", "cry", "crying",
                     "lost my", "miserable", "down"}},
        {"surprise", {"surprised", "wow", "unexpected", "shocked"}},
        {"neutral", {}},
    };
    return lex;
}

LexiconDetector::LexiconDetector() : LexiconDetector(builtin_lexicon()) {}

LexiconDetector::LexiconDetector(Lexicon lexicon, std::size_t max_tokens)
    : max_tokens_(max_tokens) {
    if (max_tokens_ == 0) throw InvalidArgument("detector token limit must be positive");
    for (const auto& [label, phrases] : lexicon) {
        const auto idx = label_index(label);
        for (const auto& p : phrases) {
            auto toks = text::tokenize(p);
            if (!toks.empty()) entries_.push_back({idx, std::move(toks)});
        }
    }
}

LexiconDetector LexiconDetector::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open emotion lexicon " + path.string());
    const auto doc = json::parse(in);
    Lexicon lex;
    for (const auto& [label, phrases] : doc.items())
        lex[label] = phrases.get<std::vector<std::string>>();
    return LexiconDetector(std::move(lex));
}

EmotionLabel LexiconDetector::detect(std::string_view input) const {
    if (text::trim(input).empty()) throw InvalidArgument("cannot detect emotion of empty text");
    auto toks = text::tokenize(input);
    if (toks.size() > max_tokens_) toks.resize(max_tokens_);

    std::vector<int> score(taxonomy().size(), 0);
    for (const auto& e : entries_) {
        const auto n = e.phrase.size();
        for (std::size_t i = 0; i + n <= toks.size(); ++i)
            if (std::equal(e.phrase.begin(), e.phrase.end(), toks.begin() + static_cast<std::ptrdiff_t>(i)))
                ++score[e.label];
    }
    const auto best = std::max_element(score.begin(), score.end());
    if (*best == 0) return EmotionLabel("neutral");
    return EmotionLabel(taxonomy()[static_cast<std::size_t>(best - score.begin())]);
}

PretrainedDetector::PretrainedDetector(const std::filesystem::path& weights) {
    throw Error("pretrained emotion detector is not available in this build (weights: " +
                weights.string() + "); set emotion.detector=stub to use the lexicon detector");
}

EmotionLabel PretrainedDetector::detect(std::string_view) const {
    throw Error("pretrained emotion detector is not available");
}

std::unique_ptr<EmotionDetector> make_detector(const json& cfg) {
    // absent and null both mean "not set"
    auto str = [&cfg](const char* key, const std::string& dflt) {
        const auto it = cfg.find(key);
        return it == cfg.end() || it->is_null() ? dflt : it->get<std::string>();
    };
    const auto kind = str("detector", "stub");
    if (kind == "stub") {
        const auto lexicon = str("lexicon", "");
        if (lexicon.empty()) return std::make_unique<LexiconDetector>();
        return std::make_unique<LexiconDetector>(LexiconDetector::from_file(lexicon));
    }
    if (kind == "pretrained") return std::make_unique<PretrainedDetector>(str("weights", ""));
    throw InvalidArgument("emotion.detector must be \"pretrained\" or \"stub\", got \"" + kind + "\"");
}

std::string InjectedContext::surface(std::string_view separator) const {
    std::string out;
    for (const auto& s : segments) {
        if (!out.empty()) out.push_back(' ');
        out += s.kind == SegmentKind::Separator ? std::string(separator) : s.text;
    }
    return out;
}

std::string InjectedContext::utterance_text() const {
    std::string out;
    for (const auto& s : segments) {
        if (s.kind != SegmentKind::Utterance) continue;
        if (!out.empty()) out.push_back(' ');
        out += s.text;
    }
    return out;
}

std::size_t InjectedContext::emotion_count() const {
    return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const Segment& s) {
        return s.kind == SegmentKind::Emotion;
    }));
}

std::size_t InjectedContext::separator_count() const {
    return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const Segment& s) {
        return s.kind == SegmentKind::Separator;
    }));
}

InjectedContext build_injected_context(const std::vector<corpus::Utterance>& context,
                                       const std::vector<EmotionLabel>& labels) {
    if (labels.size() != context.size())
        throw InvalidArgument("emotion labels (" + std::to_string(labels.size()) +
                              ") do not match context length (" + std::to_string(context.size()) + ")");
    InjectedContext out;
    for (std::size_t i = 0; i < context.size(); ++i) {
        const auto begin = out.segments.size();
        out.segments.push_back({SegmentKind::Utterance, context[i].text});
        out.segments.push_back({SegmentKind::Emotion, labels[i].name()});
        out.segments.push_back({SegmentKind::Separator, {}});
        out.spans.push_back({i, begin, out.segments.size(), labels[i]});
    }
    return out;
}

InjectedContext build_plain_context(const std::vector<corpus::Utterance>& context) {
    InjectedContext out;
    for (std::size_t i = 0; i < context.size(); ++i) {
        const auto begin = out.segments.size();
        out.segments.push_back({SegmentKind::Utterance, context[i].text});
        out.segments.push_back({SegmentKind::Separator, {}});
        out.spans.push_back({i, begin, out.segments.size(), std::nullopt});
    }
    return out;
}

std::optional<EmotionLabel> LabelCache::get(std::size_t conv_id, std::size_t turn) const {
    auto it = labels_.find({conv_id, turn});
    if (it == labels_.end()) return std::nullopt;
    return it->second;
}

void LabelCache::put(std::size_t conv_id, std::size_t turn, const EmotionLabel& label) {
    labels_.emplace(std::make_pair(conv_id, turn), label);
}

void LabelCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open emotion cache " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            put(j.at("conv_id").get<std::size_t>(), j.at("turn").get<std::size_t>(),
                EmotionLabel(j.at("label").get<std::string>()));
        } catch (const std::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void LabelCache::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write emotion cache " + path.string());
    for (const auto& [key, label] : labels_)
        out << json{{"conv_id", key.first}, {"turn", key.second}, {"label", label.name()}}.dump()
            << '\n';
}

std::vector<EmotionLabel> label_context(const EmotionDetector& detector,
                                        const std::vector<corpus::Utterance>& context,
                                        LabelCache* cache, std::size_t conv_id) {
    std::vector<EmotionLabel> out;
    out.reserve(context.size());
    for (std::size_t turn = 0; turn < context.size(); ++turn) {
        if (cache) {
            if (auto hit = cache->get(conv_id, turn)) {
                out.push_back(*hit);
                continue;
            }
        }
        auto label = detector.detect(context[turn].text);
        if (cache) cache->put(conv_id, turn, label);
        out.push_back(std::move(label));
    }
    return out;
}

} // namespace esc::emotion
