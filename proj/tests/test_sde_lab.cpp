#include <doctest.h>

#include <cmath>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/errors.hpp"
#include "nldiff/rng.hpp"
#include "nldiff/sde_lab.hpp"

using namespace nldiff;

namespace {

ControlSpec gheat_spec(bool declare_zero_drift = true) {
    ConditionFlags flags;
    flags.zero_drift = declare_zero_drift;
    flags.ellipticity = true;
    return ControlSpec::from_interval(1.0, 4.0, 33, Expr::parse("0"), Expr::parse("f"), flags);
}

PathEnsemble hand_built(std::vector<double> terminal) {
    PathEnsemble ens;
    ens.n_paths = static_cast<int>(terminal.size());
    ens.n_steps = 1;
    ens.T = 1.0;
    ens.terminal = std::move(terminal);
    return ens;
}

} // namespace

TEST_CASE("normal quantile sanity") {
    CHECK(rng::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rng::normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
    CHECK(rng::normal_quantile(0.0001) == doctest::Approx(-3.71901648546).epsilon(1e-8));
    for (double p : {0.01, 0.2, 0.5, 0.77, 0.999}) {
        CHECK(rng::normal_quantile(p) == doctest::Approx(-rng::normal_quantile(1.0 - p))
                                             .epsilon(1e-10));
    }
}

TEST_CASE("counter streams give unit-scale standard normals") {
    double sum = 0.0, sum_sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng::normal_draw(rng::stream_key(99, static_cast<std::uint64_t>(i)), 0);
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(0.01));
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("replay is bit-identical, independent of worker count") {
    const ControlSpec spec = gheat_spec();
    const PathEnsemble a = simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 500, 42);
    const PathEnsemble b = simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 500, 42);
    CHECK(a.terminal == b.terminal);

    SimOptions threaded;
    threaded.threads = 3;
    const PathEnsemble c =
        simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 500, 42, threaded);
    CHECK(a.terminal == c.terminal);

    const PathEnsemble other_seed = simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 500, 43);
    CHECK(a.terminal != other_seed.terminal);
}

TEST_CASE("zero-drift martingale: ensemble mean near the start point") {
    const ControlSpec spec = gheat_spec();
    const PathEnsemble ens = simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 128, 20000, 7);
    const Estimate est = estimate(ens, [](double y) { return y; });
    CHECK(std::fabs(est.mean) <= 3.0 * est.stderr_mean);
    // Terminal variance 4 under the extremal diffusion.
    const Estimate second = estimate(ens, [](double y) { return y * y; });
    CHECK(second.mean == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("preconditions") {
    const ControlSpec spec = gheat_spec();
    CHECK_THROWS_AS(simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 0, 1), InvalidArgument);
    CHECK_THROWS_AS(simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 0, 10, 1), InvalidArgument);
    CHECK_THROWS_AS(simulate(spec, ConstantPolicy{2.31}, 0.0, 1.0, 8, 4, 1), InvalidArgument);
    CHECK_THROWS_AS(estimate(hand_built({}), [](double y) { return y; }), InvalidArgument);
}

TEST_CASE("estimate arithmetic on hand-built ensembles") {
    const Estimate ones = estimate(hand_built({1.0, 1.0, 1.0}), [](double y) { return y; });
    CHECK(ones.mean == doctest::Approx(1.0));
    CHECK(ones.stderr_mean == doctest::Approx(0.0));

    const Estimate pair = estimate(hand_built({0.0, 2.0}), [](double y) { return y; });
    CHECK(pair.mean == doctest::Approx(1.0));
    CHECK(pair.stderr_mean == doctest::Approx(1.0));

    CHECK_THROWS_AS(estimate(hand_built({0.0, 1.0}), [](double) {
        return std::numeric_limits<double>::quiet_NaN();
    }),
                    EvalError);
}

TEST_CASE("degenerate dynamics keep every path at the start point") {
    const ControlSpec still =
        ControlSpec::from_values({1.0}, Expr::parse("0"), Expr::parse("0"));
    const PathEnsemble ens = simulate(still, ConstantPolicy{1.0}, 2.5, 1.0, 32, 50, 9);
    for (double y : ens.terminal) {
        CHECK(y == 2.5);
    }
}

TEST_CASE("weak Euler error shrinks with the step count (state-dependent a)") {
    // dY = Y dW: E[Y_T^2] = e^T exactly; the Euler chain gives (1 + dt)^n.
    const ControlSpec spec =
        ControlSpec::from_values({1.0}, Expr::parse("0"), Expr::parse("x^2"));
    const double exact = std::exp(1.0);
    double euler_oracle[2];
    const int steps[2] = {32, 256};
    for (int i = 0; i < 2; ++i) {
        const double dt = 1.0 / steps[i];
        euler_oracle[i] = std::pow(1.0 + dt, steps[i]);
        SimOptions opts;
        opts.threads = 2;
        const PathEnsemble ens =
            simulate(spec, ConstantPolicy{1.0}, 1.0, 1.0, steps[i], 200000, 31, opts);
        const Estimate est = estimate(ens, [](double y) { return y * y; });
        CHECK(std::fabs(est.mean - euler_oracle[i]) <= 4.0 * est.stderr_mean);
    }
    CHECK(std::fabs(euler_oracle[1] - exact) < std::fabs(euler_oracle[0] - exact));
}

TEST_CASE("increment scaling: slope of log E|X_t - X_0|^2 in log t is ~1") {
    const ControlSpec spec = gheat_spec();
    SimOptions opts;
    opts.snapshot_steps = {1, 2, 4, 8, 16, 32};
    const PathEnsemble ens = simulate(spec, ExtremalAStarPolicy{}, 0.0, 1.0, 64, 20000, 5, opts);
    const double dt = 1.0 / 64.0;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < opts.snapshot_steps.size(); ++i) {
        double m2 = 0.0;
        for (double v : ens.snapshots[i]) {
            m2 += v * v;
        }
        m2 /= ens.n_paths;
        lx.push_back(std::log(dt * opts.snapshot_steps[i]));
        ly.push_back(std::log(m2));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(lx.size());
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("negative diffusion along a path raises NegativeVariance") {
    const ControlSpec spec = ControlSpec::from_values({1.0}, Expr::parse("0"), Expr::parse("x"));
    CHECK_THROWS_AS(simulate(spec, ConstantPolicy{1.0}, -1.0, 1.0, 8, 4, 1), NegativeVariance);
}

TEST_CASE("feedback lookup resolves through the table, matching a constant policy") {
    const ControlSpec spec = gheat_spec();
    PolicyField table;
    table.times = {0.0, 0.5, 1.0};
    table.xs = {-10.0, 0.0, 10.0};
    table.f_star = {{4.0, 4.0, 4.0}, {4.0, 4.0, 4.0}, {4.0, 4.0, 4.0}};
    const PathEnsemble via_table =
        simulate(spec, FeedbackPolicy{table}, 0.0, 1.0, 64, 300, 17);
    const PathEnsemble via_constant =
        simulate(spec, ConstantPolicy{4.0}, 0.0, 1.0, 64, 300, 17);
    CHECK(via_table.terminal == via_constant.terminal);
}

TEST_CASE("running max dominates the endpoints") {
    const ControlSpec spec = gheat_spec();
    SimOptions opts;
    opts.track_running_max = true;
    const PathEnsemble ens = simulate(spec, ExtremalAStarPolicy{}, 1.5, 1.0, 64, 200, 3, opts);
    REQUIRE(ens.running_max_abs.size() == ens.terminal.size());
    for (std::size_t p = 0; p < ens.terminal.size(); ++p) {
        CHECK(ens.running_max_abs[p] >= std::fabs(ens.terminal[p]) - 1e-15);
        CHECK(ens.running_max_abs[p] >= 1.5);
    }
}

TEST_CASE("convex order against the extremal diffusion") {
    const ControlSpec spec = gheat_spec();
    const auto square = [](double y) { return y * y; };

    // Constant small volatility vs a* = 4: variances 1 vs 4.
    const ConvexOrderRecord low =
        convex_order_check(spec, ConstantPolicy{1.0}, square, 0.0, 1.0, 128, 20000, 11);
    CHECK(low.pass);
    CHECK(low.lhs.mean == doctest::Approx(1.0).epsilon(0.1));
    CHECK(low.rhs.mean == doctest::Approx(4.0).epsilon(0.1));

    // The extremal policy against itself shares streams: exactly equal.
    const ConvexOrderRecord self =
        convex_order_check(spec, ExtremalAStarPolicy{}, square, 0.0, 1.0, 128, 5000, 11);
    CHECK(self.pass);
    CHECK(self.lhs.mean == self.rhs.mean);
    CHECK(self.lhs.stderr_mean == self.rhs.stderr_mean);

    // Linear payoffs are martingale-flat on both sides.
    const ConvexOrderRecord linear =
        convex_order_check(spec, ConstantPolicy{1.0}, [](double y) { return y; }, 0.0, 1.0, 128,
                           20000, 11);
    CHECK(linear.pass);
    CHECK(std::fabs(linear.lhs.mean) <= 3.0 * linear.lhs.stderr_mean);
    CHECK(std::fabs(linear.rhs.mean) <= 3.0 * linear.rhs.stderr_mean);

    const ControlSpec undeclared = gheat_spec(false);
    CHECK_THROWS_AS(
        convex_order_check(undeclared, ConstantPolicy{1.0}, square, 0.0, 1.0, 8, 10, 1),
        HypothesisViolated);
}
