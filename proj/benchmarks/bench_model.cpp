#include <benchmark/benchmark.h>

#include <random>

#include "esc/model.hpp"

namespace {

std::vector<int> ids(int n, int vocab, std::mt19937_64& rng) {
    std::vector<int> out{esc::Vocabulary::kBos};
    for (int i = 1; i < n - 1; ++i) out.push_back(5 + static_cast<int>(rng() % static_cast<unsigned>(vocab - 5)));
    out.push_back(esc::Vocabulary::kEos);
    return out;
}

esc::pipeline::EncodedSample sample(int ctx, int reply, int vocab) {
    std::mt19937_64 rng(1);
    esc::pipeline::EncodedSample s;
    s.input.context_ids = ids(ctx, vocab, rng);
    s.input.strategy_ids = s.input.context_ids;
    s.response_ids = ids(reply, vocab, rng);
    s.decoder_input.assign(s.response_ids.begin(), s.response_ids.end() - 1);
    s.decoder_target.assign(s.response_ids.begin() + 1, s.response_ids.end());
    s.strategy = 2;
    return s;
}

} // namespace

static void BM_Attention(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0));
    esc::ag::ParameterStore ps;
    esc::ag::Tape t(ps, false);
    auto q = t.constant(esc::Matrix::Random(rows, 64));
    auto k = t.constant(esc::Matrix::Random(rows, 64));
    for (auto _ : state) {
        auto out = esc::ag::attention(q, k, k, 4, nullptr, false);
        benchmark::DoNotOptimize(out.value().data());
    }
}
BENCHMARK(BM_Attention)->Arg(32)->Arg(128)->Arg(512);

static void BM_MemoryFusion(benchmark::State& state) {
    const esc::net::Model m(esc::net::ModelConfig::test_profile(500), 3);
    const esc::Matrix mem = esc::Matrix::Random(state.range(0), 64);
    esc::ag::Tape t(m.params(), false);
    auto h = t.constant(esc::Matrix::Random(128, 64));
    for (auto _ : state) {
        auto f = m.fuse_memory(t, h, mem);
        benchmark::DoNotOptimize(f.value().data());
    }
}
BENCHMARK(BM_MemoryFusion)->Arg(1)->Arg(64);

// One teacher-forced sample, forward only and forward + backward.
static void BM_TrainForward(benchmark::State& state) {
    const esc::net::Model m(esc::net::ModelConfig::test_profile(2000), 3);
    const auto s = sample(static_cast<int>(state.range(0)), 24, 2000);
    const esc::Matrix mem = esc::Matrix::Random(64, 64);
    for (auto _ : state) {
        esc::ag::Tape t(m.params(), false);
        auto f = m.forward_train(t, s, mem, {}, false);
        benchmark::DoNotOptimize(f.losses.total);
    }
}
BENCHMARK(BM_TrainForward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_TrainBackward(benchmark::State& state) {
    const esc::net::Model m(esc::net::ModelConfig::test_profile(2000), 3);
    const auto s = sample(static_cast<int>(state.range(0)), 24, 2000);
    const esc::Matrix mem = esc::Matrix::Random(64, 64);
    esc::ag::Gradients g(m.params());
    for (auto _ : state) {
        esc::ag::Tape t(m.params());
        auto f = m.forward_train(t, s, mem, {}, false);
        t.backward(f.total, g);
    }
}
BENCHMARK(BM_TrainBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_GreedyDecode(benchmark::State& state) {
    const esc::net::Model m(esc::net::ModelConfig::test_profile(2000), 3);
    esc::membank::MemoryBank bank(8, 64, 64);
    const auto st = m.prepare(sample(128, 8, 2000).input, bank, false);
    for (auto _ : state) {
        auto out = m.greedy_decode(st, 16);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);
