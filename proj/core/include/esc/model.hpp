#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/autograd.hpp"
#include "esc/membank.hpp"
#include "esc/nn.hpp"
#include "esc/pipeline.hpp"

namespace esc::net {

struct ModelConfig {
    int vocab_size = 0;
    int dim = 768;
    int heads = 12;
    int ffn = 3072;
    int encoder_layers = 6;
    int decoder_layers = 6;
    int max_positions = 512;
    int strategies = 8;
    int memory_heads = 0;  // 0: same as heads
    double dropout = 0.1;
    double init_std = 0.02;
    bool share_response_encoder = false;

    /// bart-base sized stacks.
    static ModelConfig base(int vocab_size);
    /// Two layers, d = 64, no dropout.
    static ModelConfig test_profile(int vocab_size);

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    /// FNV-1a over the canonical JSON dump.
    std::uint64_t fingerprint() const;
};

struct StrategyPrediction {
    RowVector s;       // pooled strategy representation, 1 x d
    RowVector scores;  // MLP output, 1 x G
    int predicted = 0;
};

struct LossBreakdown {
    double generation = 0.0;  // L_g
    double strategy = 0.0;    // L_s
    double pattern = 0.0;     // L_r
    double total = 0.0;
};

/// total = L_g + lambda1 * L_s + lambda2 * L_r. Throws on negative lambdas.
LossBreakdown total_loss(double generation, double strategy, double pattern, double lambda1,
                         double lambda2);

/// -log softmax(scores)[target].
double softmax_cross_entropy(const RowVector& scores, int target);
/// Auxiliary strategy classification loss on pattern-head scores.
double pattern_loss(const RowVector& scores, int strategy);
/// Mean over non-padding targets of -log softmax(logits row)[target].
double generation_loss(const Matrix& logits, const std::vector<int>& targets);
/// Index of the first maximum.
int argmax(const RowVector& v);

struct LossWeights {
    double lambda1 = 0.3;
    double lambda2 = 0.1;
};

/// Everything one teacher-forced training pass produces.
struct TrainForward {
    ag::Var total;
    LossBreakdown losses;
    RowVector pattern;  // r, detached
    RowVector fused;    // m
    int predicted = 0;
    std::size_t target_tokens = 0;
};

/// Encoder side of inference, computed once per reply.
struct DecodeState {
    Matrix memory_states;           // E = [m; H]
    std::vector<char> memory_valid; // row 0 is off under w/o-Mem
    StrategyPrediction prediction;
    int memory_strategy = 0;
    RowVector fused;
};

class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ag::ParameterStore& params() { return params_; }
    const ag::ParameterStore& params() const { return params_; }
    std::vector<ag::ParamId> params_with_prefix(const std::string& prefix) const;

    // ---- tape-level pieces ------------------------------------------------

    /// H = Enc_c([t; I; C]), one row per input token.
    ag::Var encode_context(ag::Tape& t, const std::vector<int>& ids, const nn::RunContext& ctx = {}) const;
    /// Token states of Enc_r. `valid` marks non-padding positions.
    ag::Var encode_response(ag::Tape& t, const std::vector<int>& ids, const std::vector<char>* valid,
                            const nn::RunContext& ctx = {}) const;
    /// r = MaxPooling(Enc_r(R)) over valid positions.
    ag::Var extract_pattern(ag::Tape& t, const std::vector<int>& ids, const std::vector<char>* valid = nullptr,
                            const nn::RunContext& ctx = {}) const;
    ag::Var pattern_scores(ag::Tape& t, ag::Var r) const;
    /// s = MaxPooling(Enc_s(I)).
    ag::Var strategy_representation(ag::Tape& t, const std::vector<int>& ids,
                                    const nn::RunContext& ctx = {}) const;
    ag::Var strategy_scores(ag::Tape& t, ag::Var s) const;
    /// m = MaxPooling(CrossAtt(H, M)); a zero row when M has no rows.
    ag::Var fuse_memory(ag::Tape& t, ag::Var h, const Matrix& memory) const;
    /// Decoder logits for every position of `decoder_input` given E.
    ag::Var decoder_logits(ag::Tape& t, ag::Var e, const std::vector<char>& e_valid,
                           const std::vector<int>& decoder_input, const nn::RunContext& ctx = {}) const;

    // ---- composite passes -------------------------------------------------

    /// Teacher-forced pass with the gold strategy's memory matrix.
    TrainForward forward_train(ag::Tape& t, const pipeline::EncodedSample& sample, const Matrix& gold_memory,
                               const LossWeights& weights, bool no_mem, const nn::RunContext& ctx = {}) const;

    StrategyPrediction predict_strategy(const std::vector<int>& strategy_ids) const;

    /// Predicts the strategy (unless `strategy` is given), reads its memory
    /// matrix and builds E.
    DecodeState prepare(const pipeline::ModelInput& input, const membank::MemoryBank& bank, bool no_mem,
                        std::optional<int> strategy = std::nullopt) const;
    /// Next-token probabilities after `prefix` (which starts with <s>).
    RowVector next_token_distribution(const DecodeState& state, const std::vector<int>& prefix) const;
    /// Generated ids without <s> and </s>; stops at </s> or `max_steps`.
    /// Never emits pad, <s>, <unk> or <sep>, and never stops before one word.
    std::vector<int> greedy_decode(const DecodeState& state, int max_steps = 64) const;
    std::vector<int> beam_decode(const DecodeState& state, int beam_size, int max_steps = 64) const;

    struct TokenNll {
        double sum = 0.0;
        std::size_t tokens = 0;
    };
    /// Teacher-forced NLL of the gold reply under inference-time memory
    /// selection (predicted strategy).
    TokenNll reply_nll(const pipeline::EncodedSample& sample, const membank::MemoryBank& bank, bool no_mem) const;

    static constexpr std::uint32_t kFormatVersion = 1;
    void save(std::ostream& out) const;
    /// Loads parameter values saved from a model with the same config.
    void load(std::istream& in);

private:
    ModelConfig cfg_;
    ag::ParameterStore params_;
    ag::ParamId embed_{};
    ag::ParamId logits_bias_{};
    nn::Encoder context_encoder_;
    nn::Encoder strategy_encoder_;
    nn::Encoder response_encoder_;
    nn::Decoder decoder_;
    nn::Attention memory_attn_;
    nn::Linear strategy_hidden_;
    nn::Linear strategy_out_;
    nn::Linear pattern_head_;
};

} // namespace esc::net
