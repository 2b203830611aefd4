#include <benchmark/benchmark.h>

#include "nldiff/expr.hpp"

using namespace nldiff;

static void BM_EvalSimple(benchmark::State& state) {
    const Expr e = Expr::parse("f");
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(e.eval(2.5, x));
        x += 1e-9;
    }
}
BENCHMARK(BM_EvalSimple);

static void BM_EvalCoefficient(benchmark::State& state) {
    const Expr e = Expr::parse("f*(1 + 0.1*sin(x)^2)");
    double x = 0.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(e.eval(2.5, x));
        x += 1e-9;
    }
}
BENCHMARK(BM_EvalCoefficient);

static void BM_Parse(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(Expr::parse("f*x + max(1, sqrt(abs(x)))^2 - exp(-f)"));
    }
}
BENCHMARK(BM_Parse);
