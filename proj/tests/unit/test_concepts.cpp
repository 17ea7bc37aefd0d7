#include <doctest.h>

#include <sstream>

#include "esc/concepts.hpp"
#include "esc/error.hpp"
#include "fixtures.hpp"

using namespace esc;
using namespace esc::concepts;

TEST_CASE("concept URIs") {
    const auto u = parse_concept_uri("/c/en/ice_cream/n");
    REQUIRE(u);
    CHECK(u->lang == "en");
    CHECK(u->surface == "ice cream");
    CHECK(parse_concept_uri("/c/en/Dog")->surface == "dog");
    CHECK_FALSE(parse_concept_uri("http://dbpedia.org/x"));
    CHECK_FALSE(parse_concept_uri("/c/"));
    CHECK(relation_name("/r/RelatedTo") == "RelatedTo");
    CHECK(relation_name("/r/dbpedia/genre") == "dbpedia/genre");
}

TEST_CASE("fixture dump ingest") {
    IngestStats stats;
    const auto g = ConceptGraph::ingest(fixtures::data("conceptnet_fixture.csv"), "en", &stats);
    CHECK(stats.lines == 66);
    CHECK(stats.skipped == 3);  // junk line, bad metadata, non-concept end
    CHECK(stats.other_language == 2);
    CHECK(g.edge_count() == 61);
    CHECK(g.contains("job"));
    CHECK(g.contains("earning money"));
    CHECK_FALSE(g.contains("travail"));
}

TEST_CASE("ingest rejects an empty result") {
    std::istringstream in("garbage\n");
    CHECK_THROWS_AS(ConceptGraph::ingest(in, "en"), FormatError);
}

TEST_CASE("graph edges") {
    ConceptGraph g;
    g.add_edge("a", "RelatedTo", "b", 1.0);
    CHECK_THROWS_AS(g.add_edge("a", "RelatedTo", "b", 0.0), InvalidArgument);
    CHECK(g.incident(*g.find("b")).size() == 1);
}

TEST_CASE("cache round trip") {
    const auto g = fixtures::graph();
    const auto dir = fixtures::scratch("cache");
    g.save_cache(dir / "g.json");
    const auto h = ConceptGraph::load_cache(dir / "g.json");
    CHECK(h.edge_count() == g.edge_count());
    CHECK(h.node_count() == g.node_count());
    for (std::size_t i = 0; i < g.edge_count(); ++i) {
        CHECK(h.node(h.edges()[i].start) == g.node(g.edges()[i].start));
        CHECK(h.relation(h.edges()[i].relation) == g.relation(g.edges()[i].relation));
        CHECK(h.edges()[i].weight == g.edges()[i].weight);
    }
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"format": "other"})";
    }
    CHECK_THROWS_AS(ConceptGraph::load_cache(dir / "bad.json"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("mentions: bigrams first, stopwords skipped") {
    const auto g = fixtures::graph();
    const auto m = find_mentions("I joined a study group for the exam", g);
    CHECK(m == std::vector<std::string>{"study group", "study", "exam"});
    CHECK(find_mentions("the and of", g).empty());
    MatchOptions lem;
    lem.lemmatize = true;
    CHECK(find_mentions("my exams", g, lem) == std::vector<std::string>{"exam"});
    CHECK(find_mentions("my exams", g).empty());
}

TEST_CASE("frequency table and anchors") {
    const auto g = fixtures::graph();
    const auto f = build_frequency_table({"job job rent", "job sleep", "rent"}, g, 1);
    CHECK(f.counts.at("job") == 3);
    CHECK(f.counts.at("rent") == 2);
    CHECK(f.top_k == std::vector<std::string>{"job"});
    CHECK(f.in_top_k("job"));
    const auto tie = build_frequency_table({"sleep rent"}, g, 1);
    CHECK(tie.top_k == std::vector<std::string>{"rent"});
    CHECK(extract_anchors("my job and my rent and my job", g, f) == std::vector<std::string>{"rent"});
}

TEST_CASE("exclusion patterns") {
    const auto ex = ExpandOptions::default_excluded_relations();
    CHECK(is_excluded("Antonym", ex));
    CHECK(is_excluded("dbpedia/genre", ex));
    CHECK_FALSE(is_excluded("RelatedTo", ex));
}

TEST_CASE("expansion on a hand-checked anchor") {
    const auto g = fixtures::graph();
    const FrequencyTable none;
    const auto cs = expand_and_filter({"sleep"}, g, "I can not sleep at night", none);
    REQUIRE(cs.neighbor_pairs.size() == 1);
    // rest 2.2, bed 1.7, dream 1.2, night 1.0, snore 0.7; wake (Antonym) and noise (ObstructedBy) dropped
    std::vector<std::string> names;
    for (const auto& p : cs.neighbor_pairs[0]) names.push_back(p.neighbor);
    CHECK(names == std::vector<std::string>{"rest", "bed", "dream", "night", "snore"});
    CHECK(cs.selected == std::vector<std::string>{"rest", "bed", "dream", "snore"});
}

TEST_CASE("caps") {
    const auto g = fixtures::graph();
    ExpandOptions o;
    o.per_anchor_cap = 2;
    o.global_cap = 3;
    const auto cs = expand_and_filter({"job", "exam"}, g, "", {}, o);
    CHECK(cs.neighbor_pairs[0].size() == 2);
    CHECK(cs.selected.size() == 3);
    CHECK(render_concepts(cs.selected) == "work earning money test");
}
