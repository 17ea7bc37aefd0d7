#include <doctest.h>

#include "esc/emotion.hpp"
#include "esc/error.hpp"
#include "fixtures.hpp"

using namespace esc;
using namespace esc::emotion;

namespace {

std::vector<corpus::Utterance> ctx(std::initializer_list<const char*> texts) {
    std::vector<corpus::Utterance> out;
    for (const char* t : texts) out.push_back({corpus::Speaker::Seeker, t, std::nullopt});
    return out;
}

} // namespace

TEST_CASE("taxonomy has 28 labels with neutral last") {
    CHECK(taxonomy().size() == 28);
    CHECK(taxonomy().back() == "neutral");
    CHECK_NOTHROW(EmotionLabel("grief"));
    CHECK_THROWS_AS(EmotionLabel("meh"), InvalidArgument);
}

TEST_CASE("lexicon detector picks the label with most hits") {
    const LexiconDetector d;
    CHECK(d.detect("I feel so sad and hopeless").name() == "sadness");
    CHECK(d.detect("I am here for you").name() == "caring");
    CHECK(d.detect("I lost my dog").name() == "sadness");
    CHECK(d.detect("The weather is mild.").name() == "neutral");
    CHECK(d.detect("I don't know what to do").name() == "confusion");
    CHECK(d.detect("Thanks, that is a good idea").name() == "approval");  // tie, earlier label wins
    CHECK_THROWS_AS(d.detect("   "), InvalidArgument);
}

TEST_CASE("detector truncates long inputs") {
    LexiconDetector::Lexicon lex{{"joy", {"happy"}}};
    const LexiconDetector d(lex, 3);
    CHECK(d.detect("a b happy").name() == "joy");
    CHECK(d.detect("a b c happy").name() == "neutral");
}

TEST_CASE("make_detector") {
    CHECK(make_detector(nlohmann::json::object())->name() == "stub");
    CHECK_THROWS_AS(make_detector({{"detector", "pretrained"}}), Error);
    CHECK_THROWS_AS(make_detector({{"detector", "other"}}), InvalidArgument);
}

TEST_CASE("injected context layout") {
    const auto c = ctx({"I am sad.", "Thanks!"});
    const auto inj = build_injected_context(c, {EmotionLabel("sadness"), EmotionLabel("gratitude")});
    CHECK(inj.surface() == "I am sad. sadness SEP Thanks! gratitude SEP");
    CHECK(inj.emotion_count() == 2);
    CHECK(inj.separator_count() == 2);
    CHECK(inj.utterance_text() == "I am sad. Thanks!");
    REQUIRE(inj.spans.size() == 2);
    CHECK(inj.spans[1].begin == 3);
    CHECK(inj.spans[1].label->name() == "gratitude");
    CHECK_THROWS_AS(build_injected_context(c, {EmotionLabel("sadness")}), InvalidArgument);

    const auto plain = build_plain_context(c);
    CHECK(plain.surface() == "I am sad. SEP Thanks! SEP");
    CHECK(plain.emotion_count() == 0);
    CHECK(build_injected_context({}, {}).segments.empty());
}

TEST_CASE("label cache: first write wins, round trip") {
    LabelCache cache;
    cache.put(1, 0, EmotionLabel("joy"));
    cache.put(1, 0, EmotionLabel("fear"));
    CHECK(cache.get(1, 0)->name() == "joy");
    CHECK_FALSE(cache.get(2, 0).has_value());

    const LexiconDetector d;
    const auto c = ctx({"I am scared", "ok"});
    const auto labels = label_context(d, c, &cache, 5);
    CHECK(labels[0].name() == "fear");
    CHECK(cache.size() == 3);
    // cached labels take precedence over the detector
    cache.put(6, 0, EmotionLabel("pride"));
    CHECK(label_context(d, c, &cache, 6)[0].name() == "pride");

    const auto dir = fixtures::scratch("labels");
    cache.save(dir / "l.jsonl");
    LabelCache back;
    back.load(dir / "l.jsonl");
    CHECK(back.size() == cache.size());
    CHECK(back.get(5, 1)->name() == "neutral");
    std::filesystem::remove_all(dir);
}
