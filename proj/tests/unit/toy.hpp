#pragma once

#include <random>
#include <vector>

#include "esc/model.hpp"
#include "esc/vocab.hpp"

// Random encoded samples over a small vocabulary, for model-level tests
// that do not need real text.
namespace toy {

inline std::vector<int> words(std::mt19937_64& rng, int vocab, int n) {
    std::uniform_int_distribution<int> d(esc::Vocabulary::kSep + 1, vocab - 1);
    std::vector<int> out;
    for (int i = 0; i < n; ++i) out.push_back(d(rng));
    return out;
}

inline esc::pipeline::EncodedSample sample(std::mt19937_64& rng, int vocab, int strategy, int ctx_len = 8,
                                           int reply_len = 5) {
    using V = esc::Vocabulary;
    esc::pipeline::EncodedSample s;
    const auto ctx = words(rng, vocab, ctx_len);
    s.input.context_ids = {V::kBos};
    s.input.context_ids.insert(s.input.context_ids.end(), ctx.begin(), ctx.end());
    s.input.context_ids.push_back(V::kEos);
    s.input.strategy_ids = s.input.context_ids;
    const auto reply = words(rng, vocab, reply_len);
    s.response_ids = {V::kBos};
    s.response_ids.insert(s.response_ids.end(), reply.begin(), reply.end());
    s.response_ids.push_back(V::kEos);
    s.decoder_input = {V::kBos};
    s.decoder_input.insert(s.decoder_input.end(), reply.begin(), reply.end());
    s.decoder_target = reply;
    s.decoder_target.push_back(V::kEos);
    s.strategy = strategy;
    return s;
}

/// d = 8, one layer everywhere, 16 positions.
inline esc::net::ModelConfig tiny(int vocab = 20) {
    esc::net::ModelConfig c;
    c.vocab_size = vocab;
    c.dim = 8;
    c.heads = 2;
    c.ffn = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.max_positions = 16;
    c.dropout = 0.0;
    c.init_std = 0.3;
    return c;
}

} // namespace toy
