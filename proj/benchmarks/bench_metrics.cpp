#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "esc/metrics.hpp"

namespace {

std::vector<std::string> corpus(std::size_t n, std::uint64_t seed) {
    static const char* words[] = {"i",    "you",  "feel", "that", "sounds", "hard", "maybe", "talk",
                                  "work", "sad",  "help", "can",  "it",     "is",   "to",    "the",
                                  "very", "much", "try",  "friend"};
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        const int len = 6 + static_cast<int>(rng() % 14);
        for (int k = 0; k < len; ++k) s += std::string(words[rng() % 20]) + " ";
        out.push_back(s);
    }
    return out;
}

} // namespace

static void BM_CorpusMetrics(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto h = corpus(n, 1), r = corpus(n, 2);
    for (auto _ : state) {
        auto m = esc::eval::corpus_metrics(h, r);
        benchmark::DoNotOptimize(m.b2);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CorpusMetrics)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
