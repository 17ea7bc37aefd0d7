#include "esc/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "esc/binio.hpp"
#include "esc/error.hpp"
#include "esc/vocab.hpp"

namespace esc::net {

using nlohmann::json;

// ---- config ----------------------------------------------------------------

ModelConfig ModelConfig::base(int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
}

ModelConfig ModelConfig::test_profile(int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.dim = 64;
    c.heads = 4;
    c.ffn = 256;
    c.encoder_layers = 2;
    c.decoder_layers = 2;
    c.dropout = 0.0;
    return c;
}

void ModelConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("model config: ") + what);
    };
    need(vocab_size > Vocabulary::kSep + 1, "vocab_size must cover the special tokens and one word");
    need(dim > 0 && heads > 0 && dim % heads == 0, "dim must be a positive multiple of heads");
    need(memory_heads >= 0 && dim % (memory_heads ? memory_heads : heads) == 0,
         "dim must be a multiple of memory_heads");
    need(ffn > 0, "ffn must be positive");
    need(encoder_layers >= 0 && decoder_layers >= 0, "layer counts must be non-negative");
    need(max_positions >= 4, "max_positions must be at least 4");
    need(strategies >= 1, "strategies must be positive");
    need(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    need(init_std > 0.0, "init_std must be positive");
}

json ModelConfig::to_json() const {
    return {{"vocab_size", vocab_size},
            {"dim", dim},
            {"heads", heads},
            {"ffn", ffn},
            {"encoder_layers", encoder_layers},
            {"decoder_layers", decoder_layers},
            {"max_positions", max_positions},
            {"strategies", strategies},
            {"memory_heads", memory_heads},
            {"dropout", dropout},
            {"init_std", init_std},
            {"share_response_encoder", share_response_encoder}};
}

ModelConfig ModelConfig::from_json(const json& j) {
    ModelConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.dim = j.value("dim", c.dim);
    c.heads = j.value("heads", c.heads);
    c.ffn = j.value("ffn", c.ffn);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.decoder_layers = j.value("decoder_layers", c.decoder_layers);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.strategies = j.value("strategies", c.strategies);
    c.memory_heads = j.value("memory_heads", c.memory_heads);
    c.dropout = j.value("dropout", c.dropout);
    c.init_std = j.value("init_std", c.init_std);
    c.share_response_encoder = j.value("share_response_encoder", c.share_response_encoder);
    return c;
}

std::uint64_t ModelConfig::fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_json().dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// ---- scalar losses ---------------------------------------------------------

LossBreakdown total_loss(double generation, double strategy, double pattern, double lambda1,
                         double lambda2) {
    if (lambda1 < 0.0 || lambda2 < 0.0) throw InvalidArgument("loss weights must be non-negative");
    return {generation, strategy, pattern, generation + lambda1 * strategy + lambda2 * pattern};
}

double softmax_cross_entropy(const RowVector& scores, int target) {
    if (target < 0 || target >= scores.size()) throw InvalidArgument("target class out of range");
    const double m = scores.maxCoeff();
    return m + std::log((scores.array() - m).exp().sum()) - scores(target);
}

double pattern_loss(const RowVector& scores, int strategy) { return softmax_cross_entropy(scores, strategy); }

double generation_loss(const Matrix& logits, const std::vector<int>& targets) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
        throw InvalidArgument("generation_loss: " + std::to_string(targets.size()) + " targets for " +
                              std::to_string(logits.rows()) + " logit rows");
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int tgt = targets[static_cast<std::size_t>(i)];
        if (tgt < 0 || tgt == Vocabulary::kPad) continue;
        sum += softmax_cross_entropy(logits.row(i), tgt);
        ++n;
    }
    if (n == 0) throw InvalidArgument("generation_loss: no target tokens");
    return sum / static_cast<double>(n);
}

int argmax(const RowVector& v) {
    if (v.size() == 0) throw InvalidArgument("argmax of empty vector");
    Eigen::Index i = 0;
    v.maxCoeff(&i);
    return static_cast<int>(i);
}

// ---- model -----------------------------------------------------------------

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const nn::Init init{&rng, cfg_.init_std};
    const nn::StackConfig enc{cfg_.dim, cfg_.heads, cfg_.ffn, cfg_.encoder_layers, cfg_.max_positions};
    const nn::StackConfig dec{cfg_.dim, cfg_.heads, cfg_.ffn, cfg_.decoder_layers, cfg_.max_positions};

    embed_ = params_.add("embed", nn::normal_matrix(cfg_.vocab_size, cfg_.dim, init));
    logits_bias_ = params_.add("logits_bias", Matrix::Zero(1, cfg_.vocab_size));
    context_encoder_ = nn::Encoder::make(params_, "context_encoder", enc, init);
    strategy_encoder_ = nn::Encoder::make(params_, "strategy_encoder", enc, init);
    if (cfg_.share_response_encoder)
        response_encoder_ = context_encoder_;
    else
        response_encoder_ = nn::Encoder::make(params_, "response_encoder", enc, init);
    decoder_ = nn::Decoder::make(params_, "decoder", dec, init);
    memory_attn_ = nn::Attention::make(params_, "memory_attn", cfg_.dim,
                                       cfg_.memory_heads ? cfg_.memory_heads : cfg_.heads, init);
    strategy_hidden_ = nn::Linear::make(params_, "strategy_head.hidden", cfg_.dim, cfg_.dim, init);
    strategy_out_ = nn::Linear::make(params_, "strategy_head.out", cfg_.dim, cfg_.strategies, init);
    pattern_head_ = nn::Linear::make(params_, "pattern_head", cfg_.dim, cfg_.strategies, init);
}

std::vector<ag::ParamId> Model::params_with_prefix(const std::string& prefix) const {
    std::vector<ag::ParamId> out;
    for (ag::ParamId i = 0; i < params_.size(); ++i)
        if (params_.name(i).rfind(prefix, 0) == 0) out.push_back(i);
    return out;
}

ag::Var Model::encode_context(ag::Tape& t, const std::vector<int>& ids, const nn::RunContext& ctx) const {
    if (ids.empty()) throw InvalidArgument("encode_context: empty input");
    return context_encoder_(t, embed_, ids, nullptr, ctx);
}

ag::Var Model::encode_response(ag::Tape& t, const std::vector<int>& ids, const std::vector<char>* valid,
                               const nn::RunContext& ctx) const {
    if (ids.empty()) throw InvalidArgument("encode_response: empty response");
    return response_encoder_(t, embed_, ids, valid, ctx);
}

ag::Var Model::extract_pattern(ag::Tape& t, const std::vector<int>& ids, const std::vector<char>* valid,
                               const nn::RunContext& ctx) const {
    return ag::max_rows(encode_response(t, ids, valid, ctx), valid);
}

ag::Var Model::pattern_scores(ag::Tape& t, ag::Var r) const { return pattern_head_(t, r); }

ag::Var Model::strategy_representation(ag::Tape& t, const std::vector<int>& ids,
                                       const nn::RunContext& ctx) const {
    if (ids.empty()) throw InvalidArgument("strategy_representation: empty input");
    return ag::max_rows(strategy_encoder_(t, embed_, ids, nullptr, ctx));
}

ag::Var Model::strategy_scores(ag::Tape& t, ag::Var s) const {
    return strategy_out_(t, ag::tanh(strategy_hidden_(t, s)));
}

ag::Var Model::fuse_memory(ag::Tape& t, ag::Var h, const Matrix& memory) const {
    if (memory.rows() == 0) return t.constant(Matrix::Zero(1, cfg_.dim));
    if (memory.cols() != cfg_.dim)
        throw InvalidArgument("memory rows have dim " + std::to_string(memory.cols()) + ", model dim is " +
                              std::to_string(cfg_.dim));
    auto kv = t.constant(memory);
    return ag::max_rows(memory_attn_(t, h, kv, nullptr, false));
}

ag::Var Model::decoder_logits(ag::Tape& t, ag::Var e, const std::vector<char>& e_valid,
                              const std::vector<int>& decoder_input, const nn::RunContext& ctx) const {
    auto h = decoder_(t, embed_, decoder_input, e, &e_valid, ctx);
    return ag::add_row(ag::matmul_nt(h, t.param(embed_)), t.param(logits_bias_));
}

TrainForward Model::forward_train(ag::Tape& t, const pipeline::EncodedSample& sample, const Matrix& gold_memory,
                                  const LossWeights& weights, bool no_mem, const nn::RunContext& ctx) const {
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0)
        throw InvalidArgument("loss weights must be non-negative");
    if (sample.strategy < 0 || sample.strategy >= cfg_.strategies)
        throw InvalidArgument("sample strategy out of range");

    TrainForward out;
    auto h = encode_context(t, sample.input.context_ids, ctx);

    auto s = strategy_representation(t, sample.input.strategy_ids, ctx);
    auto scores = strategy_scores(t, s);
    auto ls = ag::cross_entropy(scores, {sample.strategy});
    out.predicted = argmax(scores.value().row(0));

    auto r = extract_pattern(t, sample.response_ids, nullptr, ctx);
    auto lr = ag::cross_entropy(pattern_scores(t, r), {sample.strategy});
    out.pattern = r.value().row(0);

    std::vector<char> e_valid(static_cast<std::size_t>(h.rows()) + 1, 1);
    ag::Var m;
    if (no_mem) {
        m = t.constant(Matrix::Zero(1, cfg_.dim));
        e_valid[0] = 0;
    } else {
        m = fuse_memory(t, h, gold_memory);
    }
    out.fused = m.value().row(0);
    auto e = ag::concat_rows({m, h});
    auto logits = decoder_logits(t, e, e_valid, sample.decoder_input, ctx);
    auto lg = ag::cross_entropy(logits, sample.decoder_target);

    out.total = ag::lincomb({lg, ls, lr}, {1.0, weights.lambda1, weights.lambda2});
    out.losses = total_loss(lg.scalar(), ls.scalar(), lr.scalar(), weights.lambda1, weights.lambda2);
    out.target_tokens = sample.decoder_target.size();
    return out;
}

StrategyPrediction Model::predict_strategy(const std::vector<int>& strategy_ids) const {
    ag::Tape t(params_, false);
    auto s = strategy_representation(t, strategy_ids);
    auto scores = strategy_scores(t, s);
    StrategyPrediction p;
    p.s = s.value().row(0);
    p.scores = scores.value().row(0);
    p.predicted = argmax(p.scores);
    return p;
}

DecodeState Model::prepare(const pipeline::ModelInput& input, const membank::MemoryBank& bank, bool no_mem,
                           std::optional<int> strategy) const {
    DecodeState st;
    st.prediction = predict_strategy(input.strategy_ids);
    st.memory_strategy = strategy.value_or(st.prediction.predicted);

    ag::Tape t(params_, false);
    auto h = encode_context(t, input.context_ids);
    st.memory_valid.assign(static_cast<std::size_t>(h.rows()) + 1, 1);
    ag::Var m;
    if (no_mem) {
        m = t.constant(Matrix::Zero(1, cfg_.dim));
        st.memory_valid[0] = 0;
    } else {
        m = fuse_memory(t, h, bank.read(st.memory_strategy));
    }
    st.fused = m.value().row(0);
    st.memory_states = ag::concat_rows({m, h}).value();
    return st;
}

RowVector Model::next_token_distribution(const DecodeState& state, const std::vector<int>& prefix) const {
    ag::Tape t(params_, false);
    auto e = t.constant(state.memory_states);
    auto logits = decoder_logits(t, e, state.memory_valid, prefix);
    RowVector z = logits.value().row(logits.rows() - 1);
    z = (z.array() - z.maxCoeff()).exp().matrix();
    return z / z.sum();
}

namespace {

// Tokens a reply may never contain; </s> is also barred as the first token
// so replies are never empty.
void mask_specials(RowVector& p, bool first) {
    p(Vocabulary::kPad) = -1.0;
    p(Vocabulary::kBos) = -1.0;
    p(Vocabulary::kUnk) = -1.0;
    p(Vocabulary::kSep) = -1.0;
    if (first) p(Vocabulary::kEos) = -1.0;
}

} // namespace

std::vector<int> Model::greedy_decode(const DecodeState& state, int max_steps) const {
    std::vector<int> prefix{Vocabulary::kBos};
    const int limit = std::min(max_steps, cfg_.max_positions - 1);
    for (int step = 0; step < limit; ++step) {
        RowVector p = next_token_distribution(state, prefix);
        mask_specials(p, prefix.size() == 1);
        const int next = argmax(p);
        if (next == Vocabulary::kEos) break;
        prefix.push_back(next);
    }
    return {prefix.begin() + 1, prefix.end()};
}

std::vector<int> Model::beam_decode(const DecodeState& state, int beam_size, int max_steps) const {
    if (beam_size < 1) throw InvalidArgument("beam size must be positive");
    if (beam_size == 1) return greedy_decode(state, max_steps);
    struct Hyp {
        std::vector<int> tokens;
        double logp = 0.0;
        bool done = false;
        double norm() const { return logp / static_cast<double>(std::max<std::size_t>(1, tokens.size())); }
    };
    std::vector<Hyp> beams{{{Vocabulary::kBos}, 0.0, false}};
    const int limit = std::min(max_steps, cfg_.max_positions - 1);
    for (int step = 0; step < limit; ++step) {
        std::vector<Hyp> cand;
        for (const auto& b : beams) {
            if (b.done) {
                cand.push_back(b);
                continue;
            }
            RowVector p = next_token_distribution(state, b.tokens);
            mask_specials(p, b.tokens.size() == 1);
            std::vector<int> order(static_cast<std::size_t>(p.size()));
            for (int i = 0; i < p.size(); ++i) order[static_cast<std::size_t>(i)] = i;
            std::erase_if(order, [&p](int i) { return p(i) < 0.0; });
            std::partial_sort(order.begin(), order.begin() + std::min<std::ptrdiff_t>(beam_size, std::ssize(order)),
                              order.end(), [&](int a, int b2) { return p(a) > p(b2); });
            for (int k = 0; k < beam_size && k < static_cast<int>(order.size()); ++k) {
                Hyp h = b;
                const int tok = order[static_cast<std::size_t>(k)];
                h.logp += std::log(std::max(p(tok), 1e-300));
                if (tok == Vocabulary::kEos) h.done = true;
                else h.tokens.push_back(tok);
                cand.push_back(std::move(h));
            }
        }
        std::stable_sort(cand.begin(), cand.end(), [](const Hyp& a, const Hyp& b) { return a.norm() > b.norm(); });
        if (static_cast<int>(cand.size()) > beam_size) cand.resize(static_cast<std::size_t>(beam_size));
        beams = std::move(cand);
        if (std::all_of(beams.begin(), beams.end(), [](const Hyp& h) { return h.done; })) break;
    }
    const auto& best = beams.front();
    return {best.tokens.begin() + 1, best.tokens.end()};
}

Model::TokenNll Model::reply_nll(const pipeline::EncodedSample& sample, const membank::MemoryBank& bank,
                                 bool no_mem) const {
    const auto st = prepare(sample.input, bank, no_mem);
    ag::Tape t(params_, false);
    auto logits = decoder_logits(t, t.constant(st.memory_states), st.memory_valid, sample.decoder_input);
    TokenNll out;
    const Matrix& z = logits.value();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const int tgt = sample.decoder_target[static_cast<std::size_t>(i)];
        if (tgt == Vocabulary::kPad) continue;
        out.sum += softmax_cross_entropy(z.row(i), tgt);
        ++out.tokens;
    }
    return out;
}

void Model::save(std::ostream& out) const {
    out.write("PRMS", 4);
    binio::write<std::uint32_t>(out, kFormatVersion);
    binio::write_string(out, cfg_.to_json().dump());
    binio::write<std::uint64_t>(out, params_.size());
    for (ag::ParamId i = 0; i < params_.size(); ++i) {
        binio::write_string(out, params_.name(i));
        binio::write_matrix(out, params_.value(i));
    }
}

void Model::load(std::istream& in) {
    binio::expect_magic(in, "PRMS");
    const auto version = binio::read<std::uint32_t>(in);
    if (version != kFormatVersion) throw FormatError("unsupported parameter format version " + std::to_string(version));
    const auto saved = ModelConfig::from_json(json::parse(binio::read_string(in)));
    if (saved.fingerprint() != cfg_.fingerprint())
        throw FormatError("checkpoint model config does not match this model");
    const auto n = binio::read<std::uint64_t>(in);
    if (n != params_.size()) throw FormatError("checkpoint parameter count mismatch");
    for (ag::ParamId i = 0; i < n; ++i) {
        const auto name = binio::read_string(in);
        auto m = binio::read_matrix(in);
        if (name != params_.name(i)) throw FormatError("checkpoint parameter order mismatch at " + name);
        auto& v = params_.value(i);
        if (m.rows() != v.rows() || m.cols() != v.cols()) throw FormatError("shape mismatch for " + name);
        v = std::move(m);
    }
}

} // namespace esc::net
