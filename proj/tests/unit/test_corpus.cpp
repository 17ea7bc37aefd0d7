#include <doctest.h>

#include <set>

#include "esc/corpus.hpp"
#include "esc/error.hpp"
#include "fixtures.hpp"

using namespace esc;
using namespace esc::corpus;

TEST_CASE("taxonomy has the eight ESConv strategies") {
    const auto& t = StrategyTaxonomy::esconv();
    CHECK(t.size() == 8);
    CHECK(t.index("question") == 0);
    CHECK(t.index("  Providing Suggestions ") == 5);
    CHECK(t.name(7) == "Others");
    CHECK_FALSE(t.find("Hug").has_value());
    CHECK_THROWS_AS(t.index("Hug"), NotFound);
    CHECK_THROWS_AS(StrategyTaxonomy({"a", "A"}), InvalidArgument);
}

TEST_CASE("fixture corpus loads cleanly") {
    const auto r = fixtures::conversations();
    CHECK(r.errors.empty());
    REQUIRE(r.conversations.size() == 6);
    CHECK(r.conversations[0].id == 0);
    CHECK(r.conversations[0].utterances.size() == 7);
    CHECK(r.conversations[0].utterances[1].strategy == 0);
    CHECK(r.utterance_count() == 37);
    CHECK(build_samples(r.conversations).size() == 18);
}

TEST_CASE("bad records are reported and skipped") {
    const std::string doc = R"([
      {"situation": "s", "dialog": [{"speaker": "seeker", "content": "hi"},
                                    {"speaker": "supporter", "annotation": {"strategy": "Question"}, "content": "why?"}]},
      {"dialog": []},
      {"situation": "s", "dialog": [{"speaker": "robot", "content": "hi"}]},
      {"situation": "s", "dialog": [{"speaker": "supporter", "content": "hi"}]},
      {"situation": "s", "dialog": [{"speaker": "supporter", "annotation": {"strategy": "Hugging"}, "content": "hi"}]},
      {"situation": "s", "dialog": [{"speaker": "seeker", "content": "   "}]},
      {"situation": "s", "dialog": [{"speaker": "seeker", "content": "only me"}]},
      {"situation": "s", "dialog": [{"speaker": "usr", "content": "a"}, {"speaker": "sys", "annotation": {"strategy": "others"}, "content": "b"}]}
    ])";
    const auto r = parse_corpus(doc);
    CHECK(r.conversations.size() == 2);
    REQUIRE(r.errors.size() == 6);
    CHECK(r.errors[0].index == 1);
    CHECK(r.errors[3].message.find("Hugging") != std::string::npos);
    CHECK(r.conversations[1].id == 7);
}

TEST_CASE("top level must be a list; empty input is empty") {
    CHECK_THROWS_AS(parse_corpus(R"({"a": 1})"), FormatError);
    CHECK_THROWS_AS(parse_corpus("[1, 2"), FormatError);
    CHECK(parse_corpus("").conversations.empty());
}

TEST_CASE("merging joins same-speaker same-strategy runs only") {
    const std::string doc = R"([{"situation": "s", "dialog": [
      {"speaker": "seeker", "content": "a"}, {"speaker": "seeker", "content": "b"},
      {"speaker": "supporter", "annotation": {"strategy": "Question"}, "content": "c"},
      {"speaker": "supporter", "annotation": {"strategy": "Question"}, "content": "d"},
      {"speaker": "supporter", "annotation": {"strategy": "Others"}, "content": "e"}]}])";
    LoadOptions o;
    o.merge_consecutive = true;
    const auto r = parse_corpus(doc, o);
    REQUIRE(r.conversations.size() == 1);
    const auto& u = r.conversations[0].utterances;
    REQUIRE(u.size() == 3);
    CHECK(u[0].text == "a b");
    CHECK(u[1].text == "c d");
    CHECK(u[2].text == "e");
    CHECK(parse_corpus(doc).conversations[0].utterances.size() == 5);
}

TEST_CASE("samples carry the preceding context") {
    const auto convs = fixtures::conversations().conversations;
    const auto s = build_samples(convs[0]);
    REQUIRE(s.size() == 3);
    CHECK(s[0].turn == 1);
    CHECK(s[0].context.size() == 1);
    CHECK(s[2].context.size() == 5);
    CHECK(s[2].strategy == StrategyTaxonomy::esconv().index("Providing Suggestions"));
    CHECK(s[2].response == "Maybe you could talk to your landlord about a payment plan.");
    CHECK(s[1].situation == convs[0].situation);
}

TEST_CASE("split is deterministic, disjoint and complete") {
    std::vector<Conversation> convs(50);
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].id = i;
    const auto a = split_corpus(convs, 7);
    const auto b = split_corpus(convs, 7);
    CHECK(split_to_json(a) == split_to_json(b));
    CHECK(a.train.size() == 40);
    CHECK(a.valid.size() == 5);
    CHECK(a.test.size() == 5);
    std::set<std::size_t> ids;
    for (const auto* part : {&a.train, &a.valid, &a.test})
        for (const auto& c : *part) ids.insert(c.id);
    CHECK(ids.size() == 50);
    CHECK(split_to_json(split_corpus(convs, 8)) != split_to_json(a));
    CHECK_THROWS_AS(split_corpus(std::vector<Conversation>(2), 1), InvalidArgument);
    const auto small = split_corpus(std::vector<Conversation>(3), 1);
    CHECK(small.train.size() == 1);
    CHECK(small.valid.size() == 1);
    CHECK(small.test.size() == 1);
}

TEST_CASE("split file round trip") {
    const auto convs = fixtures::conversations().conversations;
    const auto s = split_corpus(convs, 3);
    const auto dir = fixtures::scratch("split");
    {
        std::ofstream out(dir / "split.json");
        out << split_to_json(s).dump();
    }
    const auto t = apply_split_file(convs, dir / "split.json");
    CHECK(t.train == s.train);
    CHECK(t.valid == s.valid);
    CHECK(t.test == s.test);
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"train": [0, 0], "valid": [], "test": []})";
    }
    CHECK_THROWS_AS(apply_split_file(convs, dir / "bad.json"), FormatError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("sample serialization round trip") {
    const auto& tax = StrategyTaxonomy::esconv();
    const auto samples = build_samples(fixtures::conversations().conversations);
    const auto dir = fixtures::scratch("samples");
    write_samples(dir / "s.jsonl", samples, tax);
    CHECK(read_samples(dir / "s.jsonl", tax) == samples);
    CHECK(sample_from_json(to_json(samples[3], tax), tax) == samples[3]);
    std::filesystem::remove_all(dir);

    const auto conv = fixtures::conversations().conversations[1];
    const auto again = parse_corpus(nlohmann::json::array({to_json(conv, tax)}).dump());
    REQUIRE(again.conversations.size() == 1);
    CHECK(again.conversations[0].utterances == conv.utterances);
}

TEST_CASE("full ESConv file, when available") {
    const char* path = std::getenv("ESC_ESCONV_PATH");
    if (!path) {
        MESSAGE("ESC_ESCONV_PATH not set; skipping the full-corpus check");
        return;
    }
    const auto r = load_corpus(path);
    CHECK(r.conversations.size() == 1300);
    CHECK(distinct_strategies(fixtures::slurp(path)).size() == 8);
}
