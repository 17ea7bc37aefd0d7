#include "esc/nn.hpp"

#include "esc/error.hpp"

namespace esc::nn {

Matrix normal_matrix(int rows, int cols, Init init) {
    std::normal_distribution<double> dist(0.0, init.stddev);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(*init.rng);
    return m;
}

ag::Var RunContext::drop(ag::Var x) const {
    if (!train || dropout <= 0.0 || !rng) return x;
    return ag::dropout(x, dropout, *rng);
}

Linear Linear::make(ag::ParameterStore& ps, const std::string& name, int in, int out, Init init) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = ps.add(name + ".weight", normal_matrix(in, out, init));
    l.bias = ps.add(name + ".bias", Matrix::Zero(1, out));
    return l;
}

ag::Var Linear::operator()(ag::Tape& t, ag::Var x) const {
    return ag::add_row(ag::matmul(x, t.param(weight)), t.param(bias));
}

LayerNorm LayerNorm::make(ag::ParameterStore& ps, const std::string& name, int dim) {
    LayerNorm ln;
    ln.gain = ps.add(name + ".gain", Matrix::Ones(1, dim));
    ln.bias = ps.add(name + ".bias", Matrix::Zero(1, dim));
    return ln;
}

ag::Var LayerNorm::operator()(ag::Tape& t, ag::Var x) const {
    return ag::layer_norm(x, t.param(gain), t.param(bias));
}

Attention Attention::make(ag::ParameterStore& ps, const std::string& name, int dim, int heads, Init init) {
    if (heads < 1 || dim % heads != 0)
        throw InvalidArgument(name + ": dim " + std::to_string(dim) + " not divisible by " +
                              std::to_string(heads) + " heads");
    Attention a;
    a.heads = heads;
    a.q = Linear::make(ps, name + ".q", dim, dim, init);
    a.k = Linear::make(ps, name + ".k", dim, dim, init);
    a.v = Linear::make(ps, name + ".v", dim, dim, init);
    a.o = Linear::make(ps, name + ".o", dim, dim, init);
    return a;
}

ag::Var Attention::operator()(ag::Tape& t, ag::Var query, ag::Var memory,
                              const std::vector<char>* key_valid, bool causal) const {
    auto ctx = ag::attention(q(t, query), k(t, memory), v(t, memory), heads, key_valid, causal);
    return o(t, ctx);
}

FeedForward FeedForward::make(ag::ParameterStore& ps, const std::string& name, int dim, int hidden,
                              Init init) {
    return {Linear::make(ps, name + ".fc1", dim, hidden, init),
            Linear::make(ps, name + ".fc2", hidden, dim, init)};
}

ag::Var FeedForward::operator()(ag::Tape& t, ag::Var x, const RunContext& ctx) const {
    return fc2(t, ctx.drop(ag::gelu(fc1(t, x))));
}

ag::Var EncoderLayer::operator()(ag::Tape& t, ag::Var x, const std::vector<char>* valid,
                                 const RunContext& ctx) const {
    x = ln_attn(t, ag::add(x, ctx.drop(self_attn(t, x, x, valid, false))));
    return ln_ffn(t, ag::add(x, ctx.drop(ffn(t, x, ctx))));
}

ag::Var DecoderLayer::operator()(ag::Tape& t, ag::Var x, ag::Var enc, const std::vector<char>* enc_valid,
                                 const RunContext& ctx) const {
    x = ln_self(t, ag::add(x, ctx.drop(self_attn(t, x, x, nullptr, true))));
    x = ln_cross(t, ag::add(x, ctx.drop(cross_attn(t, x, enc, enc_valid, false))));
    return ln_ffn(t, ag::add(x, ctx.drop(ffn(t, x, ctx))));
}

namespace {

std::vector<int> position_ids(std::size_t n, int max_positions) {
    if (n == 0) throw InvalidArgument("empty token sequence");
    if (n > static_cast<std::size_t>(max_positions))
        throw InvalidArgument("sequence of " + std::to_string(n) + " tokens exceeds " +
                              std::to_string(max_positions) + " positions");
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(i);
    return pos;
}

} // namespace

Encoder Encoder::make(ag::ParameterStore& ps, const std::string& name, const StackConfig& cfg, Init init) {
    Encoder e;
    e.max_positions = cfg.max_positions;
    e.positions = ps.add(name + ".positions", normal_matrix(cfg.max_positions, cfg.dim, init));
    e.ln_embed = LayerNorm::make(ps, name + ".ln_embed", cfg.dim);
    for (int i = 0; i < cfg.layers; ++i) {
        const auto p = name + ".layer" + std::to_string(i);
        e.layers.push_back({Attention::make(ps, p + ".self_attn", cfg.dim, cfg.heads, init),
                            LayerNorm::make(ps, p + ".ln_attn", cfg.dim),
                            FeedForward::make(ps, p + ".ffn", cfg.dim, cfg.ffn, init),
                            LayerNorm::make(ps, p + ".ln_ffn", cfg.dim)});
    }
    return e;
}

ag::Var Encoder::operator()(ag::Tape& t, ag::ParamId token_table, const std::vector<int>& ids,
                            const std::vector<char>* valid, const RunContext& ctx) const {
    const auto pos = position_ids(ids.size(), max_positions);
    auto x = ag::add(ag::gather_rows(t.param(token_table), ids), ag::gather_rows(t.param(positions), pos));
    x = ctx.drop(ln_embed(t, x));
    for (const auto& layer : layers) x = layer(t, x, valid, ctx);
    return x;
}

Decoder Decoder::make(ag::ParameterStore& ps, const std::string& name, const StackConfig& cfg, Init init) {
    Decoder d;
    d.max_positions = cfg.max_positions;
    d.positions = ps.add(name + ".positions", normal_matrix(cfg.max_positions, cfg.dim, init));
    d.ln_embed = LayerNorm::make(ps, name + ".ln_embed", cfg.dim);
    for (int i = 0; i < cfg.layers; ++i) {
        const auto p = name + ".layer" + std::to_string(i);
        d.layers.push_back({Attention::make(ps, p + ".self_attn", cfg.dim, cfg.heads, init),
                            LayerNorm::make(ps, p + ".ln_self", cfg.dim),
                            Attention::make(ps, p + ".cross_attn", cfg.dim, cfg.heads, init),
                            LayerNorm::make(ps, p + ".ln_cross", cfg.dim),
                            FeedForward::make(ps, p + ".ffn", cfg.dim, cfg.ffn, init),
                            LayerNorm::make(ps, p + ".ln_ffn", cfg.dim)});
    }
    return d;
}

ag::Var Decoder::operator()(ag::Tape& t, ag::ParamId token_table, const std::vector<int>& ids, ag::Var enc,
                            const std::vector<char>* enc_valid, const RunContext& ctx) const {
    const auto pos = position_ids(ids.size(), max_positions);
    auto x = ag::add(ag::gather_rows(t.param(token_table), ids), ag::gather_rows(t.param(positions), pos));
    x = ctx.drop(ln_embed(t, x));
    for (const auto& layer : layers) x = layer(t, x, enc, enc_valid, ctx);
    return x;
}

} // namespace esc::nn
