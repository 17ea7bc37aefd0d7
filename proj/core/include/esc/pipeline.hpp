#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "esc/concepts.hpp"
#include "esc/corpus.hpp"
#include "esc/emotion.hpp"
#include "esc/vocab.hpp"

// Turns (situation, context) into encoder token ids. Training, evaluation
// and the chat service all go through Pipeline so their inputs match.
namespace esc::pipeline {

struct Options {
    int max_len = 512;          // L
    bool use_emotion = true;    // false: w/o-Emo
    bool use_concepts = true;   // false: w/o-KG
    concepts::ExpandOptions expand;
    concepts::MatchOptions match;
};

struct ContextFeatures {
    emotion::InjectedContext injected;
    std::vector<emotion::EmotionLabel> emotions;  // empty when emotion is off
    concepts::ConceptSet concepts;
};

struct ModelInput {
    std::vector<int> context_ids;   // <s> t <sep> {u e <sep>}* C </s>
    std::vector<int> strategy_ids;  // <s> {u e <sep>}* </s>
    std::size_t dropped_utterances = 0;
    std::size_t dropped_concepts = 0;

    bool operator==(const ModelInput&) const = default;
};

struct EncodedSample {
    ModelInput input;
    std::vector<int> response_ids;    // <s> R </s>, input of the pattern extractor
    std::vector<int> decoder_input;   // <s> R
    std::vector<int> decoder_target;  // R </s>
    int strategy = 0;
    std::size_t conv_id = 0;
    std::size_t turn = 0;
};

/// Builds the encoder input under a token budget of `max_len`. Concepts
/// are dropped from the tail first, then the oldest utterance groups; the
/// newest remaining group is left-truncated if it alone is too long, and
/// the situation is cut only as a last resort.
ModelInput assemble_input(const std::vector<int>& situation,
                          const std::vector<std::vector<int>>& utterance_groups,
                          const std::vector<std::vector<int>>& concept_groups, int max_len);

class Pipeline {
public:
    /// `detector` may be null when emotion is off; `graph` may be null,
    /// which yields no concepts.
    Pipeline(const Vocabulary& vocab, const emotion::EmotionDetector* detector,
             const concepts::ConceptGraph* graph, concepts::FrequencyTable freq, Options opts);

    const Options& options() const { return opts_; }
    const Vocabulary& vocab() const { return *vocab_; }
    const concepts::FrequencyTable& frequency_table() const { return freq_; }

    ContextFeatures features(const std::vector<corpus::Utterance>& context,
                             emotion::LabelCache* cache = nullptr, std::size_t conv_id = 0) const;
    ModelInput assemble(const std::string& situation, const ContextFeatures& f) const;
    ModelInput encode_context(const std::string& situation,
                              const std::vector<corpus::Utterance>& context,
                              emotion::LabelCache* cache = nullptr, std::size_t conv_id = 0) const;

    EncodedSample encode(const corpus::ESCSample& s, emotion::LabelCache* cache = nullptr) const;
    std::vector<EncodedSample> encode_all(const std::vector<corpus::ESCSample>& samples,
                                          emotion::LabelCache* cache = nullptr) const;

private:
    const Vocabulary* vocab_;
    const emotion::EmotionDetector* detector_;
    const concepts::ConceptGraph* graph_;
    concepts::FrequencyTable freq_;
    Options opts_;
};

/// Utterance texts of training conversations, each counted once; input
/// for the concept frequency table.
std::vector<std::string> frequency_texts(const std::vector<corpus::Conversation>& train);

/// Vocabulary over situations and utterances of `train` and any `extra`
/// texts (e.g. concept surface forms). Emotion words are always present.
Vocabulary build_vocabulary(const std::vector<corpus::Conversation>& train, std::size_t min_count,
                            std::size_t max_size, const std::vector<std::string>& extra = {});

} // namespace esc::pipeline
