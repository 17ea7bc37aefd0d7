#pragma once

#include <random>
#include <string>
#include <vector>

#include "esc/autograd.hpp"

// Transformer building blocks on top of the autodiff tape. Each block owns
// parameter ids in a shared ParameterStore; forward calls are const.
namespace esc::nn {

struct Init {
    std::mt19937_64* rng;
    double stddev;
};

struct RunContext {
    bool train = false;
    double dropout = 0.0;
    std::mt19937_64* rng = nullptr;

    ag::Var drop(ag::Var x) const;
};

struct Linear {
    ag::ParamId weight{};  // in x out
    ag::ParamId bias{};    // 1 x out
    int in = 0;
    int out = 0;

    static Linear make(ag::ParameterStore& ps, const std::string& name, int in, int out, Init init);
    ag::Var operator()(ag::Tape& t, ag::Var x) const;
};

struct LayerNorm {
    ag::ParamId gain{};
    ag::ParamId bias{};

    static LayerNorm make(ag::ParameterStore& ps, const std::string& name, int dim);
    ag::Var operator()(ag::Tape& t, ag::Var x) const;
};

/// Multi-head attention with separate query/key/value/output projections.
struct Attention {
    Linear q, k, v, o;
    int heads = 1;

    static Attention make(ag::ParameterStore& ps, const std::string& name, int dim, int heads, Init init);
    ag::Var operator()(ag::Tape& t, ag::Var query, ag::Var memory,
                       const std::vector<char>* key_valid, bool causal) const;
};

struct FeedForward {
    Linear fc1, fc2;

    static FeedForward make(ag::ParameterStore& ps, const std::string& name, int dim, int hidden, Init init);
    ag::Var operator()(ag::Tape& t, ag::Var x, const RunContext& ctx) const;
};

// Post-norm blocks, as in BART.
struct EncoderLayer {
    Attention self_attn;
    LayerNorm ln_attn;
    FeedForward ffn;
    LayerNorm ln_ffn;

    ag::Var operator()(ag::Tape& t, ag::Var x, const std::vector<char>* valid, const RunContext& ctx) const;
};

struct DecoderLayer {
    Attention self_attn;
    LayerNorm ln_self;
    Attention cross_attn;
    LayerNorm ln_cross;
    FeedForward ffn;
    LayerNorm ln_ffn;

    ag::Var operator()(ag::Tape& t, ag::Var x, ag::Var enc, const std::vector<char>* enc_valid,
                       const RunContext& ctx) const;
};

struct StackConfig {
    int dim;
    int heads;
    int ffn;
    int layers;
    int max_positions;
};

/// Token + learned position embeddings, embedding norm, layer stack.
/// The token table is passed in so stacks can share it.
struct Encoder {
    ag::ParamId positions{};
    LayerNorm ln_embed;
    std::vector<EncoderLayer> layers;
    int max_positions = 0;

    static Encoder make(ag::ParameterStore& ps, const std::string& name, const StackConfig& cfg, Init init);
    ag::Var operator()(ag::Tape& t, ag::ParamId token_table, const std::vector<int>& ids,
                       const std::vector<char>* valid, const RunContext& ctx) const;
};

struct Decoder {
    ag::ParamId positions{};
    LayerNorm ln_embed;
    std::vector<DecoderLayer> layers;
    int max_positions = 0;

    static Decoder make(ag::ParameterStore& ps, const std::string& name, const StackConfig& cfg, Init init);
    /// Hidden states for every decoder input position (causal).
    ag::Var operator()(ag::Tape& t, ag::ParamId token_table, const std::vector<int>& ids, ag::Var enc,
                       const std::vector<char>* enc_valid, const RunContext& ctx) const;
};

Matrix normal_matrix(int rows, int cols, Init init);

} // namespace esc::nn
