#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/membank.hpp"
#include "esc/model.hpp"

// Corpus metrics over detokenized text. Both sides are tokenized with
// text::tokenize (lowercase, punctuation split) before scoring.
namespace esc::eval {

using Tokens = std::vector<std::string>;

/// exp(nll_sum / tokens). Throws when tokens == 0.
double perplexity_from_nll(double nll_sum, std::size_t tokens);

/// Teacher-forced PPL over every non-pad target token of `samples`,
/// with inference-time memory selection.
double perplexity(const net::Model& model, const membank::MemoryBank& bank,
                  const std::vector<pipeline::EncodedSample>& samples, bool no_mem = false);

/// Cumulative corpus BLEU-1..4 (uniform weights, no smoothing, brevity
/// penalty against the single reference), 0..1.
std::array<double, 4> corpus_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

/// LCS F-measure with beta = 1.2 for one pair, 0..1.
double rouge_l(const Tokens& hyp, const Tokens& ref, double beta = 1.2);

/// METEOR for one pair: exact then Porter-stem matching, alpha 0.9,
/// beta 3, gamma 0.5. No synonym stage. 0..1.
double meteor(const Tokens& hyp, const Tokens& ref, double alpha = 0.9, double beta = 3.0, double gamma = 0.5);

/// CIDEr (not CIDEr-D): per n = 1..4 cosine of tf-idf vectors with
/// idf = log(pairs) - log(df), averaged over n, times 10, mean over pairs.
double cider(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs);

struct MetricsReport {
    double ppl = 0.0;
    bool has_ppl = false;
    double b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 0.0;
    double rouge_l = 0.0;
    double meteor = 0.0;
    double cider = 0.0;
    std::size_t samples = 0;

    nlohmann::json to_json() const;
};

/// BLEU, ROUGE-L and METEOR on 0..100; CIDEr on the same x100 scale as the
/// usual dialogue tables (i.e. 100 * the x10 CIDEr value).
/// Throws on a size mismatch or an empty corpus.
MetricsReport corpus_metrics(const std::vector<std::string>& hypotheses,
                             const std::vector<std::string>& references);

} // namespace esc::eval
