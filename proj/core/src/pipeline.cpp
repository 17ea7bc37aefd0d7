#include "esc/pipeline.hpp"

#include <algorithm>

#include "esc/error.hpp"

namespace esc::pipeline {

namespace {

std::size_t total_size(const std::vector<std::vector<int>>& groups) {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.size();
    return n;
}

} // namespace

ModelInput assemble_input(const std::vector<int>& situation,
                          const std::vector<std::vector<int>>& utterance_groups,
                          const std::vector<std::vector<int>>& concept_groups, int max_len) {
    if (max_len < 4) throw InvalidArgument("max_len must be at least 4");
    const auto budget = static_cast<std::size_t>(max_len);

    std::vector<int> sit = situation;
    std::vector<std::vector<int>> utts = utterance_groups;
    std::vector<std::vector<int>> cons = concept_groups;
    ModelInput out;

    // <s> t <sep> ... </s>
    auto context_len = [&] { return 3 + sit.size() + total_size(utts) + total_size(cons); };
    while (context_len() > budget && !cons.empty()) {
        cons.pop_back();
        ++out.dropped_concepts;
    }
    while (context_len() > budget && utts.size() > 1) {
        utts.erase(utts.begin());
        ++out.dropped_utterances;
    }
    if (context_len() > budget && !utts.empty()) {
        // Keep the tail (emotion word and separator) of the newest group.
        auto& g = utts.front();
        const auto over = context_len() - budget;
        const auto cut = std::min(over, g.size());
        g.erase(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(cut));
        if (g.empty()) {
            utts.clear();
            ++out.dropped_utterances;
        }
    }
    if (context_len() > budget) sit.resize(budget - 3 - total_size(utts));

    out.context_ids.push_back(Vocabulary::kBos);
    out.context_ids.insert(out.context_ids.end(), sit.begin(), sit.end());
    out.context_ids.push_back(Vocabulary::kSep);
    for (const auto& g : utts) out.context_ids.insert(out.context_ids.end(), g.begin(), g.end());
    for (const auto& g : cons) out.context_ids.insert(out.context_ids.end(), g.begin(), g.end());
    out.context_ids.push_back(Vocabulary::kEos);

    // The strategy predictor sees I only, with its own budget.
    std::vector<std::vector<int>> sutts = utterance_groups;
    auto strategy_len = [&] { return 2 + total_size(sutts); };
    while (strategy_len() > budget && sutts.size() > 1) sutts.erase(sutts.begin());
    if (strategy_len() > budget && !sutts.empty()) {
        auto& g = sutts.front();
        const auto cut = std::min(strategy_len() - budget, g.size());
        g.erase(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(cut));
    }
    out.strategy_ids.push_back(Vocabulary::kBos);
    for (const auto& g : sutts) out.strategy_ids.insert(out.strategy_ids.end(), g.begin(), g.end());
    out.strategy_ids.push_back(Vocabulary::kEos);
    return out;
}

Pipeline::Pipeline(const Vocabulary& vocab, const emotion::EmotionDetector* detector,
                   const concepts::ConceptGraph* graph, concepts::FrequencyTable freq, Options opts)
    : vocab_(&vocab), detector_(detector), graph_(graph), freq_(std::move(freq)), opts_(std::move(opts)) {
    if (opts_.use_emotion && !detector_)
        throw InvalidArgument("emotion injection is enabled but no detector was given");
}

ContextFeatures Pipeline::features(const std::vector<corpus::Utterance>& context,
                                   emotion::LabelCache* cache, std::size_t conv_id) const {
    ContextFeatures f;
    if (opts_.use_emotion) {
        f.emotions = emotion::label_context(*detector_, context, cache, conv_id);
        f.injected = emotion::build_injected_context(context, f.emotions);
    } else {
        f.injected = emotion::build_plain_context(context);
    }
    if (opts_.use_concepts && graph_) {
        std::string ctx_text;
        for (const auto& u : context) {
            if (!ctx_text.empty()) ctx_text.push_back(' ');
            ctx_text += u.text;
        }
        const auto anchors = concepts::extract_anchors(ctx_text, *graph_, freq_, opts_.match);
        f.concepts = concepts::expand_and_filter(anchors, *graph_, ctx_text, freq_, opts_.expand);
    }
    return f;
}

ModelInput Pipeline::assemble(const std::string& situation, const ContextFeatures& f) const {
    std::vector<std::vector<int>> groups;
    for (const auto& span : f.injected.spans) {
        std::vector<int> g;
        for (std::size_t i = span.begin; i < span.end; ++i) {
            const auto& seg = f.injected.segments[i];
            if (seg.kind == emotion::SegmentKind::Separator) {
                g.push_back(Vocabulary::kSep);
            } else {
                const auto ids = vocab_->encode(seg.text);
                g.insert(g.end(), ids.begin(), ids.end());
            }
        }
        groups.push_back(std::move(g));
    }
    std::vector<std::vector<int>> cons;
    for (const auto& c : f.concepts.selected) cons.push_back(vocab_->encode(c));
    return assemble_input(vocab_->encode(situation), groups, cons, opts_.max_len);
}

ModelInput Pipeline::encode_context(const std::string& situation,
                                    const std::vector<corpus::Utterance>& context,
                                    emotion::LabelCache* cache, std::size_t conv_id) const {
    return assemble(situation, features(context, cache, conv_id));
}

EncodedSample Pipeline::encode(const corpus::ESCSample& s, emotion::LabelCache* cache) const {
    EncodedSample e;
    e.input = encode_context(s.situation, s.context, cache, s.conv_id);
    e.strategy = s.strategy;
    e.conv_id = s.conv_id;
    e.turn = s.turn;

    auto body = vocab_->encode(s.response);
    const auto cap = static_cast<std::size_t>(opts_.max_len - 2);
    if (body.size() > cap) body.resize(cap);
    if (body.empty()) throw InvalidArgument("empty response in sample " + std::to_string(s.conv_id));

    e.response_ids.push_back(Vocabulary::kBos);
    e.response_ids.insert(e.response_ids.end(), body.begin(), body.end());
    e.response_ids.push_back(Vocabulary::kEos);
    e.decoder_input.push_back(Vocabulary::kBos);
    e.decoder_input.insert(e.decoder_input.end(), body.begin(), body.end());
    e.decoder_target = body;
    e.decoder_target.push_back(Vocabulary::kEos);
    return e;
}

std::vector<EncodedSample> Pipeline::encode_all(const std::vector<corpus::ESCSample>& samples,
                                                emotion::LabelCache* cache) const {
    std::vector<EncodedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode(s, cache));
    return out;
}

std::vector<std::string> frequency_texts(const std::vector<corpus::Conversation>& train) {
    std::vector<std::string> out;
    for (const auto& c : train)
        for (const auto& u : c.utterances) out.push_back(u.text);
    return out;
}

Vocabulary build_vocabulary(const std::vector<corpus::Conversation>& train, std::size_t min_count,
                            std::size_t max_size, const std::vector<std::string>& extra) {
    std::vector<std::string> texts = extra;
    for (const auto& c : train) {
        texts.push_back(c.situation);
        for (const auto& u : c.utterances) texts.push_back(u.text);
    }
    return Vocabulary::build(texts, min_count, max_size, emotion::taxonomy());
}

} // namespace esc::pipeline
