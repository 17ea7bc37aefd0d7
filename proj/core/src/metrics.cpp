#include "esc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "esc/error.hpp"
#include "esc/stem.hpp"
#include "esc/text.hpp"

namespace esc::eval {

double perplexity_from_nll(double nll_sum, std::size_t tokens) {
    if (tokens == 0) throw InvalidArgument("perplexity over zero tokens");
    return std::exp(nll_sum / static_cast<double>(tokens));
}

double perplexity(const net::Model& model, const membank::MemoryBank& bank,
                  const std::vector<pipeline::EncodedSample>& samples, bool no_mem) {
    if (samples.empty()) throw InvalidArgument("perplexity of an empty dataset");
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        const auto r = model.reply_nll(s, bank, no_mem);
        sum += r.sum;
        n += r.tokens;
    }
    return perplexity_from_nll(sum, n);
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
    NgramCounts out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
    return out;
}

void check_pairs(std::size_t h, std::size_t r) {
    if (h != r)
        throw InvalidArgument("metric inputs differ in size: " + std::to_string(h) + " hypotheses, " +
                              std::to_string(r) + " references");
    if (h == 0) throw InvalidArgument("metric inputs are empty");
}

} // namespace

std::array<double, 4> corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
    check_pairs(hyps.size(), refs.size());
    std::array<double, 4> num{}, den{};
    double hyp_len = 0.0, ref_len = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        hyp_len += static_cast<double>(hyps[i].size());
        ref_len += static_cast<double>(refs[i].size());
        for (std::size_t n = 1; n <= 4; ++n) {
            const auto h = ngrams(hyps[i], n);
            const auto r = ngrams(refs[i], n);
            int clipped = 0, total = 0;
            for (const auto& [g, c] : h) {
                total += c;
                const auto it = r.find(g);
                if (it != r.end()) clipped += std::min(c, it->second);
            }
            num[n - 1] += clipped;
            // Sentences without any n-gram of this order still add 1 to the
            // denominator, as the common toolkit does.
            den[n - 1] += std::max(1, total);
        }
    }
    double bp = 0.0;
    if (hyp_len > ref_len) bp = 1.0;
    else if (hyp_len > 0.0) bp = std::exp(1.0 - ref_len / hyp_len);

    std::array<double, 4> out{};
    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t n = 0; n < 4; ++n) {
        if (num[n] == 0.0) zero = true;
        if (!zero) log_sum += std::log(num[n] / den[n]);
        out[n] = zero ? 0.0 : bp * std::exp(log_sum / static_cast<double>(n + 1));
    }
    return out;
}

double rouge_l(const Tokens& hyp, const Tokens& ref, double beta) {
    if (hyp.empty() || ref.empty()) return 0.0;
    std::vector<std::vector<int>> dp(hyp.size() + 1, std::vector<int>(ref.size() + 1, 0));
    for (std::size_t i = 1; i <= hyp.size(); ++i)
        for (std::size_t j = 1; j <= ref.size(); ++j)
            dp[i][j] = hyp[i - 1] == ref[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    const double lcs = dp[hyp.size()][ref.size()];
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(hyp.size());
    const double r = lcs / static_cast<double>(ref.size());
    return (1.0 + beta * beta) * p * r / (r + beta * beta * p);
}

namespace {

using Enum = std::vector<std::pair<std::size_t, std::string>>;
using Match = std::pair<std::size_t, std::size_t>;

// Matches from the right: each hypothesis word (last first) takes the last
// still-unmatched reference word equal to it.
void match_enums(Enum& hyp, Enum& ref, std::vector<Match>& out) {
    for (std::size_t i = hyp.size(); i-- > 0;) {
        for (std::size_t j = ref.size(); j-- > 0;) {
            if (hyp[i].second == ref[j].second) {
                out.emplace_back(hyp[i].first, ref[j].first);
                hyp.erase(hyp.begin() + static_cast<std::ptrdiff_t>(i));
                ref.erase(ref.begin() + static_cast<std::ptrdiff_t>(j));
                break;
            }
        }
    }
}

} // namespace

double meteor(const Tokens& hyp, const Tokens& ref, double alpha, double beta, double gamma) {
    Enum h, r;
    for (std::size_t i = 0; i < hyp.size(); ++i) h.emplace_back(i, text::to_lower(hyp[i]));
    for (std::size_t j = 0; j < ref.size(); ++j) r.emplace_back(j, text::to_lower(ref[j]));
    std::vector<Match> matches;
    match_enums(h, r, matches);
    for (auto& e : h) e.second = text::porter_stem(e.second);
    for (auto& e : r) e.second = text::porter_stem(e.second);
    match_enums(h, r, matches);
    std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) { return a.first < b.first; });

    const double m = static_cast<double>(matches.size());
    if (m == 0.0 || hyp.empty() || ref.empty()) return 0.0;
    const double p = m / static_cast<double>(hyp.size());
    const double rc = m / static_cast<double>(ref.size());
    const double fmean = p * rc / (alpha * p + (1.0 - alpha) * rc);
    double chunks = 1.0;
    for (std::size_t i = 0; i + 1 < matches.size(); ++i)
        if (!(matches[i + 1].first == matches[i].first + 1 && matches[i + 1].second == matches[i].second + 1))
            chunks += 1.0;
    const double penalty = gamma * std::pow(chunks / m, beta);
    return (1.0 - penalty) * fmean;
}

double cider(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
    check_pairs(hyps.size(), refs.size());
    std::map<std::vector<std::string>, double> df;
    std::vector<std::array<NgramCounts, 4>> hc(hyps.size()), rc(refs.size());
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        for (std::size_t n = 0; n < 4; ++n) {
            hc[i][n] = ngrams(hyps[i], n + 1);
            rc[i][n] = ngrams(refs[i], n + 1);
            for (const auto& kv : rc[i][n]) df[kv.first] += 1.0;
        }
    }
    const double log_n = std::log(static_cast<double>(refs.size()));
    auto weigh = [&](const NgramCounts& c, std::map<std::vector<std::string>, double>& vec) {
        double norm = 0.0;
        for (const auto& [g, tf] : c) {
            const auto it = df.find(g);
            const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
            const double v = tf * (log_n - d);
            vec[g] = v;
            norm += v * v;
        }
        return std::sqrt(norm);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        double score = 0.0;
        for (std::size_t n = 0; n < 4; ++n) {
            std::map<std::vector<std::string>, double> vh, vr;
            const double nh = weigh(hc[i][n], vh);
            const double nr = weigh(rc[i][n], vr);
            double dot = 0.0;
            for (const auto& [g, v] : vh) {
                const auto it = vr.find(g);
                if (it != vr.end()) dot += v * it->second;
            }
            if (nh != 0.0 && nr != 0.0) dot /= nh * nr;
            score += dot;
        }
        total += score / 4.0 * 10.0;
    }
    return total / static_cast<double>(hyps.size());
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j = {{"b1", b1},           {"b2", b2},         {"b3", b3},       {"b4", b4},
                        {"rouge_l", rouge_l}, {"meteor", meteor}, {"cider", cider}, {"samples", samples}};
    j["ppl"] = has_ppl ? nlohmann::json(ppl) : nlohmann::json(nullptr);
    j["meta"] = {{"bleu", "corpus-level, cumulative, no smoothing"},
                 {"rouge_l_beta", 1.2},
                 {"meteor", "exact + porter stem, no synonyms"},
                 {"cider", "plain CIDEr x10, reported x100"},
                 {"tokenization", "lowercase, punctuation split"}};
    return j;
}

MetricsReport corpus_metrics(const std::vector<std::string>& hypotheses,
                             const std::vector<std::string>& references) {
    check_pairs(hypotheses.size(), references.size());
    std::vector<Tokens> h, r;
    h.reserve(hypotheses.size());
    r.reserve(references.size());
    for (const auto& s : hypotheses) h.push_back(text::tokenize(s));
    for (const auto& s : references) r.push_back(text::tokenize(s));

    MetricsReport rep;
    rep.samples = h.size();
    const auto bleu = corpus_bleu(h, r);
    rep.b1 = 100.0 * bleu[0];
    rep.b2 = 100.0 * bleu[1];
    rep.b3 = 100.0 * bleu[2];
    rep.b4 = 100.0 * bleu[3];
    double rl = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        rl += rouge_l(h[i], r[i]);
        mt += meteor(h[i], r[i]);
    }
    rep.rouge_l = 100.0 * rl / static_cast<double>(h.size());
    rep.meteor = 100.0 * mt / static_cast<double>(h.size());
    rep.cider = 100.0 * cider(h, r);
    return rep;
}

} // namespace esc::eval
