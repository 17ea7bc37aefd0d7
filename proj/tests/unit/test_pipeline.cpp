#include <doctest.h>

#include "esc/error.hpp"
#include "esc/pipeline.hpp"
#include "fixtures.hpp"

using namespace esc;
using namespace esc::pipeline;

TEST_CASE("vocabulary basics") {
    Vocabulary v;
    CHECK(v.size() == 5);
    CHECK(v.token(Vocabulary::kSep) == "<sep>");
    const auto w = v.add("hello");
    CHECK(v.add("hello") == w);
    CHECK(v.id("nope") == Vocabulary::kUnk);
    CHECK(v.encode("Hello, nope") == std::vector<int>{w, Vocabulary::kUnk, Vocabulary::kUnk});
    CHECK(v.decode({Vocabulary::kBos, w, Vocabulary::kEos}) == "hello");
    CHECK(Vocabulary::from_json(v.to_json()) == v);
    CHECK_THROWS_AS(Vocabulary::from_json(nlohmann::json::array({"x"})), FormatError);
}

TEST_CASE("vocabulary build ranks by count, then alphabetically") {
    const auto v = Vocabulary::build({"b a b c", "c b"}, 1, 7, {"zeta"});
    CHECK(v.token(5) == "zeta");
    CHECK(v.token(6) == "b");
    CHECK(v.size() == 7);
    const auto all = Vocabulary::build({"b a b c", "c b"}, 2, 100);
    CHECK(all.contains("c"));
    CHECK_FALSE(all.contains("a"));
}

TEST_CASE("assemble_input layout") {
    const auto in = assemble_input({10, 11}, {{20, 4}, {21, 22, 4}}, {{30}, {31, 32}}, 64);
    CHECK(in.context_ids == std::vector<int>{1, 10, 11, 4, 20, 4, 21, 22, 4, 30, 31, 32, 2});
    CHECK(in.strategy_ids == std::vector<int>{1, 20, 4, 21, 22, 4, 2});
    CHECK(in.dropped_concepts == 0);
}

TEST_CASE("truncation drops concepts first, then old utterances, never the situation") {
    const std::vector<int> sit{10, 11};
    const std::vector<std::vector<int>> utts{{20, 4}, {21, 4}, {22, 23, 4}};
    const std::vector<std::vector<int>> cons{{30}, {31}};
    // full length: 3 + 2 + 7 + 2 = 14
    auto a = assemble_input(sit, utts, cons, 13);
    CHECK(a.dropped_concepts == 1);
    CHECK(a.context_ids.size() == 13);
    auto b = assemble_input(sit, utts, cons, 12);
    CHECK(b.dropped_concepts == 2);
    CHECK(b.dropped_utterances == 0);
    auto c = assemble_input(sit, utts, cons, 10);
    CHECK(c.dropped_concepts == 2);
    CHECK(c.dropped_utterances == 1);
    CHECK(c.context_ids == std::vector<int>{1, 10, 11, 4, 21, 4, 22, 23, 4, 2});
    auto d = assemble_input(sit, utts, cons, 7);
    CHECK(d.context_ids == std::vector<int>{1, 10, 11, 4, 23, 4, 2});
    CHECK(d.context_ids[1] == 10);
    CHECK_THROWS_AS(assemble_input(sit, utts, cons, 3), InvalidArgument);
}

namespace {

struct World {
    corpus::LoadResult data = fixtures::conversations();
    std::vector<corpus::ESCSample> samples = corpus::build_samples(data.conversations);
    concepts::ConceptGraph graph = fixtures::graph();
    emotion::LexiconDetector detector;
    Vocabulary vocab = build_vocabulary(data.conversations, 1, 10000);
    concepts::FrequencyTable freq = concepts::build_frequency_table(frequency_texts(data.conversations), graph, 2);
};

} // namespace

TEST_CASE("vocabulary covers emotion words") {
    World w;
    for (const auto& e : emotion::taxonomy()) CHECK(w.vocab.contains(e));
}

TEST_CASE("pipeline encodes a sample end to end") {
    World w;
    const Pipeline p(w.vocab, &w.detector, &w.graph, w.freq, Options{});
    const auto e = p.encode(w.samples[2]);
    CHECK(e.input.context_ids.front() == Vocabulary::kBos);
    CHECK(e.input.context_ids.back() == Vocabulary::kEos);
    CHECK(e.decoder_input.front() == Vocabulary::kBos);
    CHECK(e.decoder_target.back() == Vocabulary::kEos);
    CHECK(std::vector<int>(e.decoder_input.begin() + 1, e.decoder_input.end()) ==
          std::vector<int>(e.decoder_target.begin(), e.decoder_target.end() - 1));
    CHECK(e.response_ids.front() == Vocabulary::kBos);
    CHECK(e.response_ids.back() == Vocabulary::kEos);
    CHECK(e.strategy == w.samples[2].strategy);

    const auto f = p.features(w.samples[2].context);
    CHECK(f.emotions.size() == w.samples[2].context.size());
    CHECK(f.injected.emotion_count() == w.samples[2].context.size());
    CHECK_FALSE(f.concepts.selected.empty());
}

TEST_CASE("ablation switches change only their part of the input") {
    World w;
    Options no_emo;
    no_emo.use_emotion = false;
    Options no_kg;
    no_kg.use_concepts = false;
    const Pipeline full(w.vocab, &w.detector, &w.graph, w.freq, Options{});
    const Pipeline pe(w.vocab, nullptr, &w.graph, w.freq, no_emo);
    const Pipeline pk(w.vocab, &w.detector, &w.graph, w.freq, no_kg);
    const auto& ctx = w.samples[2].context;

    const auto fe = pe.features(ctx);
    CHECK(fe.injected.emotion_count() == 0);
    CHECK(fe.concepts.selected == full.features(ctx).concepts.selected);
    const auto fk = pk.features(ctx);
    CHECK(fk.concepts.selected.empty());
    CHECK(fk.injected.surface() == full.features(ctx).injected.surface());
    CHECK_THROWS_AS(Pipeline(w.vocab, nullptr, &w.graph, w.freq, Options{}), InvalidArgument);
}

TEST_CASE("emotion cache is filled per conversation turn") {
    World w;
    const Pipeline p(w.vocab, &w.detector, &w.graph, w.freq, Options{});
    emotion::LabelCache cache;
    p.encode_all(w.samples, &cache);
    CHECK(cache.size() > 0);
    CHECK(*cache.get(0, 0) == w.detector.detect(w.data.conversations[0].utterances[0].text));
}

TEST_CASE("encoder input respects max_len") {
    World w;
    Options o;
    o.max_len = 16;
    const Pipeline p(w.vocab, &w.detector, &w.graph, w.freq, o);
    for (const auto& s : w.samples) {
        const auto e = p.encode(s);
        CHECK(e.input.context_ids.size() <= 16);
        CHECK(e.input.strategy_ids.size() <= 16);
        CHECK(e.decoder_input.size() <= 15);
    }
}

TEST_CASE("empty responses are rejected") {
    World w;
    const Pipeline p(w.vocab, &w.detector, &w.graph, w.freq, Options{});
    auto s = w.samples[0];
    s.response = " ";
    CHECK_THROWS_AS(p.encode(s), InvalidArgument);
}
