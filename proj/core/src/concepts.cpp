#include "esc/concepts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "esc/error.hpp"
#include "esc/text.hpp"

namespace esc::concepts {

using nlohmann::json;

std::optional<ConceptUri> parse_concept_uri(std::string_view uri) {
    // /c/<lang>/<term>[/<pos>/...]
    if (uri.size() < 4 || uri.substr(0, 3) != "/c/") return std::nullopt;
    uri.remove_prefix(3);
    const auto slash = uri.find('/');
    if (slash == std::string_view::npos || slash == 0) return std::nullopt;
    ConceptUri out;
    out.lang = std::string(uri.substr(0, slash));
    auto term = uri.substr(slash + 1);
    term = term.substr(0, term.find('/'));
    if (term.empty()) return std::nullopt;
    std::string surface(term);
    std::replace(surface.begin(), surface.end(), '_', ' ');
    out.surface = text::to_lower(surface);
    return out;
}

std::string relation_name(std::string_view uri) {
    if (uri.substr(0, 3) == "/r/") uri.remove_prefix(3);
    return std::string(uri);
}

NodeId ConceptGraph::add_node(std::string_view surface) {
    std::string key(surface);
    auto it = node_index_.find(key);
    if (it != node_index_.end()) return it->second;
    const auto id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(key);
    node_index_.emplace(std::move(key), id);
    incident_.emplace_back();
    return id;
}

RelationId ConceptGraph::add_relation(std::string_view name) {
    std::string key(name);
    auto it = relation_index_.find(key);
    if (it != relation_index_.end()) return it->second;
    const auto id = static_cast<RelationId>(relations_.size());
    relations_.push_back(key);
    relation_index_.emplace(std::move(key), id);
    return id;
}

void ConceptGraph::add_edge(NodeId start, RelationId relation, NodeId end, double weight) {
    if (!(weight > 0.0)) throw InvalidArgument("edge weight must be positive");
    if (start >= nodes_.size() || end >= nodes_.size() || relation >= relations_.size())
        throw InvalidArgument("edge references unknown node or relation");
    const auto idx = edges_.size();
    edges_.push_back({start, relation, end, weight});
    incident_[start].push_back(idx);
    if (end != start) incident_[end].push_back(idx);
}

void ConceptGraph::add_edge(std::string_view start, std::string_view relation,
                            std::string_view end, double weight) {
    if (!(weight > 0.0)) throw InvalidArgument("edge weight must be positive");
    const auto s = add_node(start);
    const auto r = add_relation(relation);
    const auto e = add_node(end);
    add_edge(s, r, e, weight);
}

std::optional<NodeId> ConceptGraph::find(std::string_view surface) const {
    auto it = node_index_.find(std::string(surface));
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
}

namespace {

bool split_dump_line(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::size_t pos = 0;
    while (fields.size() < 4) {
        const auto tab = line.find('\t', pos);
        if (tab == std::string::npos) break;
        fields.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    if (fields.size() == 4) {
        fields.push_back(line.substr(pos));
        return true;
    }
    // Space-separated variant: four URIs, then the metadata object.
    fields.clear();
    std::istringstream ss(line);
    std::string tok;
    for (int i = 0; i < 4 && ss >> tok; ++i) fields.push_back(tok);
    if (fields.size() != 4) return false;
    std::string rest;
    std::getline(ss, rest);
    fields.push_back(text::trim(rest));
    return true;
}

} // namespace

ConceptGraph ConceptGraph::ingest(std::istream& in, std::string_view lang, IngestStats* stats) {
    ConceptGraph g;
    IngestStats local;
    std::string line;
    std::vector<std::string> f;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        ++local.lines;
        if (!split_dump_line(line, f)) {
            ++local.skipped;
            continue;
        }
        const auto start = parse_concept_uri(f[2]);
        const auto end = parse_concept_uri(f[3]);
        if (!start || !end || f[1].rfind("/r/", 0) != 0) {
            ++local.skipped;
            continue;
        }
        double weight = 0.0;
        try {
            const auto meta = json::parse(f[4]);
            weight = meta.at("weight").get<double>();
        } catch (const std::exception&) {
            ++local.skipped;
            continue;
        }
        if (!(weight > 0.0)) {
            ++local.skipped;
            continue;
        }
        if (!lang.empty() && (start->lang != lang || end->lang != lang)) {
            ++local.other_language;
            continue;
        }
        g.add_edge(start->surface, relation_name(f[1]), end->surface, weight);
    }
    if (stats) *stats = local;
    if (g.edge_count() == 0) throw FormatError("concept dump yielded zero edges");
    return g;
}

ConceptGraph ConceptGraph::ingest(const std::filesystem::path& dump, std::string_view lang,
                                  IngestStats* stats) {
    std::ifstream in(dump);
    if (!in) throw Error("cannot open concept dump " + dump.string());
    return ingest(in, lang, stats);
}

void ConceptGraph::save_cache(const std::filesystem::path& path) const {
    json edges = json::array();
    for (const auto& e : edges_) edges.push_back({e.start, e.relation, e.end, e.weight});
    const json doc = {{"format", "esc-concept-graph"}, {"version", kCacheVersion},
                      {"nodes", nodes_},               {"relations", relations_},
                      {"edges", std::move(edges)}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write graph cache " + path.string());
    out << doc.dump();
}

ConceptGraph ConceptGraph::load_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph cache " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("graph cache is not valid JSON: " + std::string(e.what()));
    }
    if (doc.value("format", "") != "esc-concept-graph")
        throw FormatError("not a concept graph cache: " + path.string());
    if (doc.value("version", 0) != kCacheVersion)
        throw FormatError("unsupported graph cache version " + doc.value("version", json()).dump());
    ConceptGraph g;
    for (const auto& n : doc.at("nodes")) g.add_node(n.get<std::string>());
    for (const auto& r : doc.at("relations")) g.add_relation(r.get<std::string>());
    for (const auto& e : doc.at("edges"))
        g.add_edge(e.at(0).get<NodeId>(), e.at(1).get<RelationId>(), e.at(2).get<NodeId>(),
                   e.at(3).get<double>());
    return g;
}

namespace {

std::string singular(const std::string& w) {
    if (w.size() > 4 && w.ends_with("ies")) return w.substr(0, w.size() - 3) + "y";
    if (w.size() > 3 && w.ends_with("es") && (w.ends_with("ses") || w.ends_with("xes") ||
                                              w.ends_with("ches") || w.ends_with("shes")))
        return w.substr(0, w.size() - 2);
    if (w.size() > 3 && w.ends_with('s') && !w.ends_with("ss")) return w.substr(0, w.size() - 1);
    return w;
}

std::optional<std::string> lookup(const std::string& surface, const ConceptGraph& g, bool lemmatize) {
    if (g.contains(surface)) return surface;
    if (lemmatize) {
        auto s = singular(surface);
        if (s != surface && g.contains(s)) return s;
    }
    return std::nullopt;
}

std::vector<std::string> words_of(std::string_view text) {
    auto toks = text::tokenize(text);
    std::erase_if(toks, [](const std::string& t) { return text::is_punct_token(t); });
    return toks;
}

} // namespace

std::vector<std::string> find_mentions(std::string_view input, const ConceptGraph& graph,
                                       const MatchOptions& opts) {
    const auto& stop = opts.stopwords ? *opts.stopwords : text::english_stopwords();
    const auto words = words_of(input);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i + 1 < words.size() && !(stop.count(words[i]) && stop.count(words[i + 1]))) {
            if (auto hit = lookup(words[i] + " " + words[i + 1], graph, opts.lemmatize))
                out.push_back(*hit);
        }
        if (!stop.count(words[i])) {
            if (auto hit = lookup(words[i], graph, opts.lemmatize)) out.push_back(*hit);
        }
    }
    return out;
}

bool FrequencyTable::in_top_k(std::string_view word) const {
    return std::find(top_k.begin(), top_k.end(), word) != top_k.end();
}

FrequencyTable build_frequency_table(const std::vector<std::string>& texts,
                                     const ConceptGraph& graph, std::size_t k,
                                     const MatchOptions& opts) {
    FrequencyTable t;
    for (const auto& s : texts)
        for (auto& m : find_mentions(s, graph, opts)) ++t.counts[m];
    std::vector<std::pair<std::string, std::size_t>> ranked(t.counts.begin(), t.counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) t.top_k.push_back(ranked[i].first);
    return t;
}

std::vector<std::string> extract_anchors(std::string_view context, const ConceptGraph& graph,
                                         const FrequencyTable& freq, const MatchOptions& opts) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& m : find_mentions(context, graph, opts)) {
        if (freq.in_top_k(m)) continue;
        if (seen.insert(m).second) out.push_back(std::move(m));
    }
    return out;
}

std::vector<std::string> ExpandOptions::default_excluded_relations() {
    return {"Antonym",        "ExternalURL",  "NotCapableOf", "NotDesires",
            "NotHasProperty", "DistinctFrom", "ObstructedBy", "dbpedia/*"};
}

bool is_excluded(std::string_view relation, const std::vector<std::string>& excluded) {
    for (const auto& ex : excluded) {
        if (!ex.empty() && ex.back() == '*') {
            if (relation.substr(0, ex.size() - 1) == std::string_view(ex).substr(0, ex.size() - 1))
                return true;
        } else if (relation == ex) {
            return true;
        }
    }
    return false;
}

ConceptSet expand_and_filter(const std::vector<std::string>& anchors, const ConceptGraph& graph,
                             std::string_view context, const FrequencyTable& freq,
                             const ExpandOptions& opts) {
    ConceptSet out;
    out.anchors = anchors;

    std::unordered_set<std::string> blocked(anchors.begin(), anchors.end());
    const auto words = words_of(context);
    for (std::size_t i = 0; i < words.size(); ++i) {
        blocked.insert(words[i]);
        if (i + 1 < words.size()) blocked.insert(words[i] + " " + words[i + 1]);
    }

    for (const auto& anchor : anchors) {
        std::vector<NeighborPair> pairs;
        if (auto id = graph.find(anchor)) {
            for (auto ei : graph.incident(*id)) {
                const auto& e = graph.edges()[ei];
                const auto other = e.start == *id ? e.end : e.start;
                if (other == *id) continue;
                const auto& rel = graph.relation(e.relation);
                if (is_excluded(rel, opts.excluded)) continue;
                pairs.push_back({graph.node(other), rel, e.weight});
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const NeighborPair& a, const NeighborPair& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            if (a.neighbor != b.neighbor) return a.neighbor < b.neighbor;
            return a.relation < b.relation;
        });
        if (pairs.size() > opts.per_anchor_cap) pairs.resize(opts.per_anchor_cap);
        out.neighbor_pairs.push_back(std::move(pairs));
    }

    std::unordered_set<std::string> taken;
    for (const auto& pairs : out.neighbor_pairs) {
        for (const auto& p : pairs) {
            if (out.selected.size() >= opts.global_cap) break;
            if (blocked.count(p.neighbor) || freq.in_top_k(p.neighbor)) continue;
            if (taken.insert(p.neighbor).second) out.selected.push_back(p.neighbor);
        }
    }
    return out;
}

std::string render_concepts(const std::vector<std::string>& selected) {
    return text::join(selected, " ");
}

} // namespace esc::concepts
