#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/corpus.hpp"

namespace esc::emotion {

/// The 28 fine-grained emotion categories (GoEmotions order, neutral last).
const std::vector<std::string>& taxonomy();

class EmotionLabel {
public:
    /// Throws InvalidArgument when `name` is not one of the 28 categories.
    explicit EmotionLabel(std::string name);

    const std::string& name() const { return name_; }
    bool operator==(const EmotionLabel&) const = default;

private:
    std::string name_;
};

class EmotionDetector {
public:
    virtual ~EmotionDetector() = default;
    /// Top class for `text`. Throws InvalidArgument on empty-after-trim text.
    virtual EmotionLabel detect(std::string_view text) const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic keyword detector. Each category owns a list of keyword
/// phrases; the category with the most phrase hits wins, ties go to the
/// earlier category, and no hits yields "neutral".
class LexiconDetector final : public EmotionDetector {
public:
    using Lexicon = std::map<std::string, std::vector<std::string>>;

    LexiconDetector();  // built-in lexicon
    explicit LexiconDetector(Lexicon lexicon, std::size_t max_tokens = 512);
    static LexiconDetector from_file(const std::filesystem::path& path);

    EmotionLabel detect(std::string_view text) const override;
    std::string name() const override { return "stub"; }

    static const Lexicon& builtin_lexicon();

private:
    struct Entry {
        std::size_t label;
        std::vector<std::string> phrase;
    };
    std::vector<Entry> entries_;
    std::size_t max_tokens_;
};

/// Placeholder for the 28-class pretrained transformer detector. No
/// runtime for it ships with this build, so construction always fails
/// with a message pointing at the stub configuration.
class PretrainedDetector final : public EmotionDetector {
public:
    explicit PretrainedDetector(const std::filesystem::path& weights);
    EmotionLabel detect(std::string_view text) const override;
    std::string name() const override { return "pretrained"; }
};

/// Reads `detector` ("stub" | "pretrained"), `lexicon`, `weights` from an
/// emotion config section.
std::unique_ptr<EmotionDetector> make_detector(const nlohmann::json& emotion_config);

enum class SegmentKind { Utterance, Emotion, Separator };

struct Segment {
    SegmentKind kind;
    std::string text;
};

struct UtteranceSpan {
    std::size_t utterance;  // index into the context
    std::size_t begin;      // segment range [begin, end)
    std::size_t end;
    std::optional<EmotionLabel> label;
};

/// Emotion-injected context: u_1 e_1 SEP ... u_n e_n SEP.
struct InjectedContext {
    std::vector<Segment> segments;
    std::vector<UtteranceSpan> spans;

    std::string surface(std::string_view separator = "SEP") const;
    /// Utterance texts joined by single spaces, without emotion words or
    /// separators.
    std::string utterance_text() const;
    std::size_t emotion_count() const;
    std::size_t separator_count() const;
};

InjectedContext build_injected_context(const std::vector<corpus::Utterance>& context,
                                       const std::vector<EmotionLabel>& labels);
/// Same layout with the emotion words left out (u_1 SEP ... u_n SEP).
InjectedContext build_plain_context(const std::vector<corpus::Utterance>& context);

/// Labels keyed by (conversation id, turn). First write wins.
class LabelCache {
public:
    std::optional<EmotionLabel> get(std::size_t conv_id, std::size_t turn) const;
    void put(std::size_t conv_id, std::size_t turn, const EmotionLabel& label);
    std::size_t size() const { return labels_.size(); }

    void load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::pair<std::size_t, std::size_t>, EmotionLabel> labels_;
};

/// Labels every utterance of `context`, consulting and filling `cache`
/// when given. Turn indices are positions within the conversation.
std::vector<EmotionLabel> label_context(const EmotionDetector& detector,
                                        const std::vector<corpus::Utterance>& context,
                                        LabelCache* cache = nullptr, std::size_t conv_id = 0);

} // namespace esc::emotion
