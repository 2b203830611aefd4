#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/hjb_solver.hpp"

using namespace nldiff;

namespace {

ControlSpec gheat_spec() {
    return ControlSpec::from_interval(1.0, 4.0, 33, Expr::parse("0"), Expr::parse("f"));
}

std::vector<double> square_terminal(const GridSpec& grid) {
    std::vector<double> out;
    for (double x : grid.xs()) {
        out.push_back(x * x);
    }
    return out;
}

} // namespace

static void BM_SolveNonlinear(benchmark::State& state) {
    const ControlSpec spec = gheat_spec();
    GridSpec grid;
    grid.nx = static_cast<int>(state.range(0));
    grid.T = 0.1;
    const std::vector<double> terminal = square_terminal(grid);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_nonlinear(spec, grid, terminal));
    }
    state.SetItemsProcessed(state.iterations() * grid.nx);
}
BENCHMARK(BM_SolveNonlinear)->Arg(101)->Arg(201)->Arg(401);

static void BM_ExtractPolicy(benchmark::State& state) {
    const ControlSpec spec = gheat_spec();
    GridSpec grid;
    grid.nx = 201;
    grid.T = 0.1;
    const ValueField field = solve_nonlinear(spec, grid, square_terminal(grid));
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_policy(spec, grid, field));
    }
}
BENCHMARK(BM_ExtractPolicy);
