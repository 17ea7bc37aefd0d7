#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace esc::concepts {

using NodeId = std::uint32_t;
using RelationId = std::uint32_t;

struct Edge {
    NodeId start;
    RelationId relation;
    NodeId end;
    double weight;
};

/// "/c/en/ice_cream/n" -> "ice cream"; returns nullopt for non-concept URIs.
struct ConceptUri {
    std::string lang;
    std::string surface;
};
std::optional<ConceptUri> parse_concept_uri(std::string_view uri);
/// "/r/RelatedTo" -> "RelatedTo", "/r/dbpedia/genre" -> "dbpedia/genre".
std::string relation_name(std::string_view uri);

struct IngestStats {
    std::size_t lines = 0;
    std::size_t skipped = 0;         // unreadable lines
    std::size_t other_language = 0;  // parsed but filtered out
};

/// Immutable-after-build concept graph. Edges are stored once and indexed
/// from both endpoints.
class ConceptGraph {
public:
    NodeId add_node(std::string_view surface);
    RelationId add_relation(std::string_view name);
    /// Throws InvalidArgument on non-positive weight or unknown ids.
    void add_edge(NodeId start, RelationId relation, NodeId end, double weight);
    void add_edge(std::string_view start, std::string_view relation, std::string_view end,
                  double weight);

    std::optional<NodeId> find(std::string_view surface) const;
    bool contains(std::string_view surface) const { return find(surface).has_value(); }
    const std::string& node(NodeId id) const { return nodes_.at(id); }
    const std::string& relation(RelationId id) const { return relations_.at(id); }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }
    /// Indices into edges() of every edge touching `id`.
    const std::vector<std::size_t>& incident(NodeId id) const { return incident_.at(id); }

    /// Parses a ConceptNet assertions dump (tab separated: edge URI,
    /// relation URI, start URI, end URI, JSON metadata with "weight").
    /// Both endpoints must be in `lang` (empty = keep all). Unreadable
    /// lines are counted and skipped; zero loaded edges throws.
    static ConceptGraph ingest(std::istream& in, std::string_view lang, IngestStats* stats = nullptr);
    static ConceptGraph ingest(const std::filesystem::path& dump, std::string_view lang,
                               IngestStats* stats = nullptr);

    static constexpr int kCacheVersion = 1;
    void save_cache(const std::filesystem::path& path) const;
    static ConceptGraph load_cache(const std::filesystem::path& path);

private:
    std::vector<std::string> nodes_;
    std::unordered_map<std::string, NodeId> node_index_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, RelationId> relation_index_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> incident_;
};

struct MatchOptions {
    const std::unordered_set<std::string>* stopwords = nullptr;  // defaults to English list
    bool lemmatize = false;  // fall back to a crude singular form when a token misses
};

/// Every unigram/bigram mention of a graph concept in `text`, in order of
/// position (bigram before unigram at the same position). Stopword
/// unigrams and all-stopword bigrams are ignored.
std::vector<std::string> find_mentions(std::string_view text, const ConceptGraph& graph,
                                       const MatchOptions& opts = {});

struct FrequencyTable {
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> top_k;

    bool in_top_k(std::string_view word) const;
};

/// Counts concept mentions over `texts`. top_k holds the K highest counts,
/// ties broken lexicographically.
FrequencyTable build_frequency_table(const std::vector<std::string>& texts,
                                     const ConceptGraph& graph, std::size_t k,
                                     const MatchOptions& opts = {});

/// Distinct mentions in order of first appearance, minus top-K members.
std::vector<std::string> extract_anchors(std::string_view context, const ConceptGraph& graph,
                                         const FrequencyTable& freq, const MatchOptions& opts = {});

struct NeighborPair {
    std::string neighbor;
    std::string relation;
    double weight = 0.0;

    bool operator==(const NeighborPair&) const = default;
};

struct ConceptSet {
    std::vector<std::string> anchors;
    std::vector<std::vector<NeighborPair>> neighbor_pairs;  // parallel to anchors
    std::vector<std::string> selected;
};

struct ExpandOptions {
    /// Relation names to drop. An entry ending in '*' matches by prefix.
    std::vector<std::string> excluded = default_excluded_relations();
    std::size_t per_anchor_cap = 5;
    std::size_t global_cap = 64;

    static std::vector<std::string> default_excluded_relations();
};

bool is_excluded(std::string_view relation, const std::vector<std::string>& excluded);

/// One-hop expansion of each anchor. Per anchor: incident edges minus
/// excluded relations, sorted by weight (descending, then concept and
/// relation name), capped at per_anchor_cap. `selected` concatenates the
/// pairs' concepts in anchor order, dropping duplicates, anchors, words
/// and bigrams of `context`, and top-K members, then truncates to
/// global_cap.
ConceptSet expand_and_filter(const std::vector<std::string>& anchors, const ConceptGraph& graph,
                             std::string_view context, const FrequencyTable& freq,
                             const ExpandOptions& opts = {});

/// Space-joined concept list appended to the encoder input.
std::string render_concepts(const std::vector<std::string>& selected);

} // namespace esc::concepts
