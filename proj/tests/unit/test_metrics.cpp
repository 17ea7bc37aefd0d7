#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "esc/error.hpp"
#include "esc/metrics.hpp"
#include "esc/text.hpp"
#include "fixtures.hpp"
#include "toy.hpp"

using namespace esc;
using namespace esc::eval;
using doctest::Approx;

namespace {

struct Pairs {
    std::vector<std::string> hyps, refs;
};

Pairs load_pairs() {
    Pairs p;
    for (const auto& j : nlohmann::json::parse(fixtures::slurp(fixtures::data("metric_pairs.json")))) {
        p.hyps.push_back(j.at("hypothesis"));
        p.refs.push_back(j.at("reference"));
    }
    return p;
}

std::vector<Tokens> tok(const std::vector<std::string>& v) {
    std::vector<Tokens> out;
    for (const auto& s : v) out.push_back(text::tokenize(s));
    return out;
}

} // namespace

// Frozen from tests/oracles/metric_oracle.py (nltk 3.10 and pycocoevalcap).
TEST_CASE("metrics agree with the reference implementations") {
    const auto p = load_pairs();
    const auto r = corpus_metrics(p.hyps, p.refs);
    CHECK(r.samples == 5);
    CHECK(r.b1 == Approx(45.26724260758305).epsilon(1e-9));
    CHECK(r.b2 == Approx(33.3118455521666).epsilon(1e-9));
    CHECK(r.b3 == Approx(26.304965712728233).epsilon(1e-9));
    CHECK(r.b4 == Approx(19.68037169029297).epsilon(1e-9));
    CHECK(r.rouge_l == Approx(47.879399645822915).epsilon(1e-9));
    CHECK(r.meteor == Approx(42.70656895540354).epsilon(1e-9));
    CHECK(r.cider == Approx(228.82814467623612).epsilon(1e-9));

    const std::vector<double> per{78.2267115600449, 49.90583804143125, 22.22222222222222, 57.96973961998594,
                                  5.208333333333333};
    const auto h = tok(p.hyps), f = tok(p.refs);
    for (std::size_t i = 0; i < per.size(); ++i)
        CHECK(100.0 * meteor(h[i], f[i]) == Approx(per[i]).epsilon(1e-9));
}

TEST_CASE("identical corpora score perfectly") {
    const std::vector<std::string> s{"i am here for you today", "that sounds really hard to deal with"};
    const auto r = corpus_metrics(s, s);
    CHECK(r.b1 == Approx(100.0));
    CHECK(r.b4 == Approx(100.0));
    CHECK(r.rouge_l == Approx(100.0));
    CHECK(meteor({"a", "b", "c", "d"}, {"a", "b", "c", "d"}) == Approx(1.0 - 0.5 / 64.0).epsilon(1e-12));
}

TEST_CASE("meteor uses stems when the surface differs") {
    CHECK(meteor({"talking"}, {"talked"}) > 0.0);
    CHECK(meteor({"xyz"}, {"abc"}) == 0.0);
}

TEST_CASE("rouge-l by hand") {
    // LCS = 3 of 4 / 5: P .75, R .6
    const double p = 0.75, rc = 0.6, b2 = 1.2 * 1.2;
    const double want = (1 + b2) * p * rc / (rc + b2 * p);
    CHECK(rouge_l({"a", "b", "c", "d"}, {"a", "x", "b", "c", "y"}) == Approx(want).epsilon(1e-12));
    CHECK(rouge_l({"a"}, {"b"}) == 0.0);
}

TEST_CASE("bleu brevity penalty and zero matches") {
    const auto b = corpus_bleu({{"a", "b"}}, {{"a", "b", "c", "d"}});
    CHECK(b[0] == Approx(std::exp(1.0 - 2.0)).epsilon(1e-12));
    CHECK(b[2] == 0.0);
}

TEST_CASE("corpus scores do not depend on pair order") {
    auto p = load_pairs();
    const auto a = corpus_metrics(p.hyps, p.refs);
    std::reverse(p.hyps.begin(), p.hyps.end());
    std::reverse(p.refs.begin(), p.refs.end());
    const auto b = corpus_metrics(p.hyps, p.refs);
    CHECK(a.b2 == Approx(b.b2).epsilon(1e-12));
    CHECK(a.meteor == Approx(b.meteor).epsilon(1e-12));
    CHECK(a.cider == Approx(b.cider).epsilon(1e-12));
    CHECK(a.rouge_l == Approx(b.rouge_l).epsilon(1e-12));
}

TEST_CASE("bad input") {
    CHECK_THROWS_AS(corpus_metrics({"a"}, {"a", "b"}), InvalidArgument);
    CHECK_THROWS_AS(corpus_metrics({}, {}), InvalidArgument);
    CHECK_THROWS_AS(perplexity_from_nll(1.0, 0), InvalidArgument);
}

TEST_CASE("report json") {
    MetricsReport r;
    r.ppl = 14.99;
    r.has_ppl = true;
    r.b2 = 10.13;
    const auto j = r.to_json();
    CHECK(j.at("ppl").get<double>() == 14.99);
    CHECK(j.at("b2").get<double>() == 10.13);
}

TEST_CASE("a uniform model has perplexity equal to the vocabulary size") {
    CHECK(perplexity_from_nll(3 * std::log(50.0), 3) == Approx(50.0).epsilon(1e-12));
    auto cfg = net::ModelConfig::test_profile(50);
    net::Model m(cfg, 3);
    m.params().value(*m.params().find("embed")).setZero();
    m.params().value(*m.params().find("logits_bias")).setZero();
    membank::MemoryBank bank(8, 4, 64);
    std::mt19937_64 rng(1);
    std::vector<pipeline::EncodedSample> samples;
    for (int i = 0; i < 4; ++i) samples.push_back(toy::sample(rng, 50, i));
    CHECK(perplexity(m, bank, samples) == Approx(50.0).epsilon(1e-9));
    CHECK(perplexity(m, bank, samples, true) == Approx(50.0).epsilon(1e-9));
}
