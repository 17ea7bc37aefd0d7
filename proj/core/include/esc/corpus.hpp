#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace esc::corpus {

enum class Speaker { Seeker, Supporter };

std::string_view speaker_name(Speaker s);

/// Ordered list of support strategy names. Lookup trims and case-folds.
class StrategyTaxonomy {
public:
    explicit StrategyTaxonomy(std::vector<std::string> labels);

    /// The eight ESConv strategies in their canonical annotation order.
    static const StrategyTaxonomy& esconv();

    std::size_t size() const { return labels_.size(); }
    const std::string& name(int index) const;
    const std::vector<std::string>& labels() const { return labels_; }

    std::optional<int> find(std::string_view name) const;
    /// Throws NotFound naming the offending string.
    int index(std::string_view name) const;

private:
    std::vector<std::string> labels_;
    std::vector<std::string> keys_;
};

struct Utterance {
    Speaker speaker = Speaker::Seeker;
    std::string text;
    std::optional<int> strategy;  // present iff speaker == Supporter

    bool operator==(const Utterance&) const = default;
};

struct Conversation {
    std::size_t id = 0;  // record index in the source file
    std::string situation;
    std::vector<Utterance> utterances;

    bool operator==(const Conversation&) const = default;
};

struct ESCSample {
    std::size_t conv_id = 0;
    std::size_t turn = 0;  // index of the target utterance in its conversation
    std::string situation;
    std::vector<Utterance> context;
    int strategy = 0;
    std::string response;

    bool operator==(const ESCSample&) const = default;
};

struct RecordError {
    std::size_t index = 0;
    std::string message;
};

struct LoadOptions {
    const StrategyTaxonomy* taxonomy = nullptr;  // defaults to esconv()
    bool merge_consecutive = false;
};

struct LoadResult {
    std::vector<Conversation> conversations;
    std::vector<RecordError> errors;

    std::size_t utterance_count() const;
};

/// Parses ESConv JSON text. Bad records are reported and skipped; a
/// document that is not a JSON list throws FormatError.
LoadResult parse_corpus(std::string_view json_text, const LoadOptions& opts = {});
LoadResult load_corpus(const std::filesystem::path& path, const LoadOptions& opts = {});

/// Distinct normalized strategy strings in order of first appearance.
std::vector<std::string> distinct_strategies(std::string_view json_text);

struct SplitRatio {
    unsigned train = 8;
    unsigned valid = 1;
    unsigned test = 1;
};

struct Split {
    std::vector<Conversation> train;
    std::vector<Conversation> valid;
    std::vector<Conversation> test;
};

/// Deterministic shuffle-then-cut partition at conversation granularity.
Split split_corpus(const std::vector<Conversation>& conversations, std::uint64_t seed,
                   SplitRatio ratio = {});

/// Explicit partition by conversation id: {"train": [...], "valid": [...], "test": [...]}.
Split apply_split_file(const std::vector<Conversation>& conversations,
                       const std::filesystem::path& split_file);
nlohmann::json split_to_json(const Split& split);

std::vector<ESCSample> build_samples(const Conversation& conversation);
std::vector<ESCSample> build_samples(const std::vector<Conversation>& conversations);

// ESConv-record serialization (the same shape parse_corpus reads).
nlohmann::json to_json(const Conversation& c, const StrategyTaxonomy& tax);
nlohmann::json to_json(const ESCSample& s, const StrategyTaxonomy& tax);
ESCSample sample_from_json(const nlohmann::json& j, const StrategyTaxonomy& tax);

void write_samples(const std::filesystem::path& path, const std::vector<ESCSample>& samples,
                   const StrategyTaxonomy& tax);
std::vector<ESCSample> read_samples(const std::filesystem::path& path, const StrategyTaxonomy& tax);

} // namespace esc::corpus
