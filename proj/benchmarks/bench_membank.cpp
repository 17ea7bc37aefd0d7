#include <benchmark/benchmark.h>

#include <random>

#include "esc/membank.hpp"

static void BM_BankStore(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    esc::membank::MemoryBank bank(8, 64, dim);
    const esc::RowVector r = esc::RowVector::Random(dim);
    int g = 0;
    for (auto _ : state) {
        bank.store(g, r);
        g = (g + 1) & 7;
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BankStore)->Arg(64)->Arg(768);

static void BM_BankRead(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    esc::membank::MemoryBank bank(8, 64, dim);
    for (int i = 0; i < 200; ++i) bank.store(i % 8, esc::RowVector::Random(dim));
    for (auto _ : state) {
        auto m = bank.read(3);
        benchmark::DoNotOptimize(m.data());
    }
}
BENCHMARK(BM_BankRead)->Arg(64)->Arg(768);
