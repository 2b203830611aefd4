#include <benchmark/benchmark.h>

#include "nldiff/control_model.hpp"
#include "nldiff/rng.hpp"
#include "nldiff/sde_lab.hpp"

using namespace nldiff;

static void BM_NormalDraw(benchmark::State& state) {
    std::uint64_t k = 0;
    const std::uint64_t key = rng::stream_key(1, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(rng::normal_draw(key, k++));
    }
}
BENCHMARK(BM_NormalDraw);

static void BM_SimulateExtremal(benchmark::State& state) {
    ConditionFlags flags;
    flags.zero_drift = true;
    const ControlSpec spec =
        ControlSpec::from_interval(1.0, 4.0, 33, Expr::parse("0"), Expr::parse("f"), flags);
    const int n_paths = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 256, n_paths, 42));
    }
    state.SetItemsProcessed(state.iterations() * n_paths * 256);
}
BENCHMARK(BM_SimulateExtremal)->Arg(1000)->Arg(10000);

static void BM_SimulateStateDependent(benchmark::State& state) {
    const ControlSpec spec = ControlSpec::from_interval(
        1.0, 4.0, 33, Expr::parse("0"), Expr::parse("f*(1 + 0.1*sin(x)^2)"));
    const int n_paths = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 256, n_paths, 42));
    }
    state.SetItemsProcessed(state.iterations() * n_paths * 256);
}
BENCHMARK(BM_SimulateStateDependent)->Arg(1000);
