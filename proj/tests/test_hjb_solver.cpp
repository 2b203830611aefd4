#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/errors.hpp"
#include "nldiff/hjb_solver.hpp"

using namespace nldiff;

namespace {

ControlSpec gheat_spec() {
    return ControlSpec::from_interval(1.0, 4.0, 33, Expr::parse("0"), Expr::parse("f"));
}

GridSpec test_grid(int nx = 201, double T = 1.0) {
    GridSpec grid;
    grid.x_min = -10.0;
    grid.x_max = 10.0;
    grid.nx = nx;
    grid.T = T;
    return grid;
}

std::vector<double> sample(const GridSpec& grid, const std::function<double(double)>& fn) {
    std::vector<double> out;
    for (double x : grid.xs()) {
        out.push_back(fn(x));
    }
    return out;
}

std::size_t center_node(const std::vector<double>& xs) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < xs.size(); ++j) {
        if (std::fabs(xs[j]) < std::fabs(xs[best])) best = j;
    }
    return best;
}

} // namespace

TEST_CASE("cfl_dt follows the stability formula") {
    // A_max = 4, B_max = 0, dx = 0.05, safety 0.9.
    GridSpec grid = test_grid(401);
    grid.dt_policy = DtPolicy::auto_cfl(0.9);
    CHECK(cfl_dt(gheat_spec(), grid) == doctest::Approx(5.625e-4).epsilon(1e-12));

    // A_max = 1, B_max = 1, dx = 0.1, safety 1.
    const ControlSpec advective =
        ControlSpec::from_interval(-1.0, 1.0, 33, Expr::parse("f"), Expr::parse("1"));
    GridSpec grid2 = test_grid(201);
    grid2.dt_policy = DtPolicy::auto_cfl(1.0);
    CHECK(cfl_dt(advective, grid2) == doctest::Approx(0.01 / 1.1).epsilon(1e-12));

    GridSpec unstable = test_grid(401);
    unstable.dt_policy = DtPolicy::fixed(1.0);
    CHECK_THROWS_AS(cfl_dt(gheat_spec(), unstable), UnstableStep);
    CHECK_THROWS_AS(solve_nonlinear(gheat_spec(), unstable,
                                    sample(unstable, [](double x) { return x * x; })),
                    UnstableStep);

    GridSpec stable_fixed = test_grid(401);
    stable_fixed.dt_policy = DtPolicy::fixed(5e-4);
    CHECK(cfl_dt(gheat_spec(), stable_fixed) == doctest::Approx(5e-4));
}

TEST_CASE("G-heat oracle: worst-case variance for convex/concave squares") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid();
    const std::vector<double> xs = grid.xs();
    const std::size_t j0 = center_node(xs);

    const ValueField up = solve_nonlinear(spec, grid, sample(grid, [](double x) {
        return x * x;
    }));
    // Closed form x^2 + a_max t: worst case variance 4.
    CHECK(up.values.front()[j0] == doctest::Approx(4.0).epsilon(2e-2));
    CHECK(up.times.front() == 0.0);
    CHECK(up.times.back() == grid.T);

    const ValueField down = solve_nonlinear(spec, grid, sample(grid, [](double x) {
        return -x * x;
    }));
    // Closed form -x^2 - a_min t.
    CHECK(down.values.front()[j0] == doctest::Approx(-1.0).epsilon(2e-2));
}

TEST_CASE("constants are preserved exactly") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);
    const ValueField field = solve_nonlinear(spec, grid, sample(grid, [](double) {
        return 7.0;
    }));
    for (const std::vector<double>& row : field.values) {
        for (double v : row) {
            CHECK(v == 7.0);
        }
    }
}

TEST_CASE("solve_linear oracles") {
    const GridSpec grid = test_grid();
    const std::vector<double> xs = grid.xs();
    const std::size_t j0 = center_node(xs);

    const ValueField heat = solve_linear([](double) { return 0.0; },
                                         [](double) { return 4.0; }, grid,
                                         sample(grid, [](double x) { return x * x; }));
    CHECK(heat.values.front()[j0] == doctest::Approx(4.0).epsilon(2e-2));

    // Linear terminal advects exactly: E[x + t + W_t] = x + t.
    const ValueField drifted = solve_linear([](double) { return 1.0; },
                                            [](double) { return 1.0; }, grid,
                                            sample(grid, [](double x) { return x; }));
    CHECK(drifted.values.front()[j0] == doctest::Approx(1.0).epsilon(1e-9));

    const ValueField constant = solve_linear([](double) { return 1.0; },
                                             [](double) { return 1.0; }, grid,
                                             sample(grid, [](double) { return -2.5; }));
    for (double v : constant.values.front()) {
        CHECK(v == -2.5);
    }
}

TEST_CASE("semigroup_apply slices the sweep at the requested time") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid();
    const std::vector<double> terminal = sample(grid, [](double x) { return x * x; });

    const SemigroupSlice at_zero = semigroup_apply(spec, grid, terminal, 0.0);
    CHECK(at_zero.values == terminal); // T_0 = id, bit-exact
    CHECK(at_zero.snap_distance == 0.0);

    const SemigroupSlice at_half = semigroup_apply(spec, grid, terminal, 0.5);
    CHECK(at_half.snap_distance <= 0.5 * cfl_dt(spec, grid) + 1e-12);
    const auto [lo, hi] = interior_band(at_half.values.size());
    for (std::size_t j = lo; j <= hi; ++j) {
        const double x = at_half.xs[j];
        CHECK(at_half.values[j] ==
              doctest::Approx(x * x + 4.0 * at_half.t_snapped).epsilon(2e-2));
    }

    // Zero drift keeps a linear terminal a martingale: T_t(id) = id.
    const SemigroupSlice mart =
        semigroup_apply(spec, grid, sample(grid, [](double x) { return x; }), 0.7);
    for (std::size_t j = lo; j <= hi; ++j) {
        CHECK(mart.values[j] == doctest::Approx(mart.xs[j]).epsilon(1e-9));
    }

    CHECK_THROWS_AS(semigroup_apply(spec, grid, terminal, 1.5), InvalidArgument);
    CHECK_THROWS_AS(semigroup_apply(spec, grid, terminal, -0.1), InvalidArgument);
}

TEST_CASE("monotone in the terminal data") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);
    std::mt19937 gen(5u);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        const double c1 = amp(gen), w1 = 0.5 + std::fabs(amp(gen));
        const double c2 = amp(gen), w2 = 0.5 + std::fabs(amp(gen));
        const std::vector<double> lower = sample(grid, [&](double x) {
            return c1 * std::cos(w1 * x) + c2 * std::sin(w2 * x);
        });
        std::vector<double> upper = lower;
        for (std::size_t j = 0; j < upper.size(); ++j) {
            upper[j] += 0.3 + 0.3 * std::cos(0.7 * grid.xs()[j]);
        }
        const ValueField lo_field = solve_nonlinear(spec, grid, lower);
        const ValueField hi_field = solve_nonlinear(spec, grid, upper);
        for (std::size_t i = 0; i < lo_field.values.size(); ++i) {
            for (std::size_t j = 0; j < lo_field.values[i].size(); ++j) {
                CHECK(lo_field.values[i][j] <= hi_field.values[i][j] + 1e-12);
            }
        }
    }
}

TEST_CASE("sublinear in the terminal data") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);
    const std::vector<double> psi1 = sample(grid, [](double x) { return std::sin(0.8 * x); });
    const std::vector<double> psi2 = sample(grid, [](double x) {
        return 0.5 * std::cos(1.3 * x) + 0.1 * x * x / (1.0 + std::fabs(x));
    });
    std::vector<double> joint = psi1;
    for (std::size_t j = 0; j < joint.size(); ++j) {
        joint[j] += psi2[j];
    }
    const ValueField s1 = solve_nonlinear(spec, grid, psi1);
    const ValueField s2 = solve_nonlinear(spec, grid, psi2);
    const ValueField sj = solve_nonlinear(spec, grid, joint);
    for (std::size_t i = 0; i < sj.values.size(); ++i) {
        for (std::size_t j = 0; j < sj.values[i].size(); ++j) {
            CHECK(sj.values[i][j] <= s1.values[i][j] + s2.values[i][j] + 1e-9);
        }
    }

    // Positive homogeneity.
    for (double lambda : {0.0, 0.6, 3.0}) {
        std::vector<double> scaled = psi1;
        for (double& v : scaled) {
            v *= lambda;
        }
        const ValueField s_scaled = solve_nonlinear(spec, grid, scaled);
        for (std::size_t j = 0; j < scaled.size(); ++j) {
            CHECK(s_scaled.values.front()[j] ==
                  doctest::Approx(lambda * s1.values.front()[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("singleton control set reproduces solve_linear bit for bit") {
    const ControlSpec spec =
        ControlSpec::from_values({2.0}, Expr::parse("0.1*f*x"), Expr::parse("1 + f"));
    const GridSpec grid = test_grid(101);
    const std::vector<double> terminal = sample(grid, [](double x) {
        return std::tanh(x) + 0.2 * x;
    });
    const ValueField nonlinear = solve_nonlinear(spec, grid, terminal);
    const ValueField linear = solve_linear([&spec](double x) { return spec.b(2.0, x); },
                                           [&spec](double x) { return spec.a(2.0, x); }, grid,
                                           terminal);
    REQUIRE(nonlinear.times == linear.times);
    for (std::size_t i = 0; i < nonlinear.values.size(); ++i) {
        CHECK(nonlinear.values[i] == linear.values[i]);
    }
}

TEST_CASE("joint grid refinement reduces the kink-terminal error") {
    const ControlSpec spec = gheat_spec();
    // E|X_1| under the extremal diffusion: sigma sqrt(2/pi) with sigma = 2.
    const double exact = 2.0 * std::sqrt(2.0 / M_PI);
    double errors[2];
    const int resolutions[2] = {101, 201};
    for (int r = 0; r < 2; ++r) {
        const GridSpec grid = test_grid(resolutions[r]);
        const ValueField field = solve_nonlinear(spec, grid, sample(grid, [](double x) {
            return std::fabs(x);
        }));
        errors[r] = std::fabs(field.values.front()[center_node(field.xs)] - exact);
    }
    CHECK(errors[1] < errors[0]);
}

TEST_CASE("extract_policy recovers the bang-bang selection") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);

    const ValueField convex_field = solve_nonlinear(spec, grid, sample(grid, [](double x) {
        return x * x;
    }));
    const PolicyField convex_policy = extract_policy(spec, grid, convex_field);
    const auto [lo, hi] = interior_band(convex_policy.xs.size());
    for (const std::vector<double>& row : convex_policy.f_star) {
        for (std::size_t j = lo; j <= hi; ++j) {
            CHECK(row[j] == doctest::Approx(4.0));
        }
    }

    const ValueField concave_field = solve_nonlinear(spec, grid, sample(grid, [](double x) {
        return -x * x;
    }));
    const PolicyField concave_policy = extract_policy(spec, grid, concave_field);
    for (const std::vector<double>& row : concave_policy.f_star) {
        for (std::size_t j = lo; j <= hi; ++j) {
            CHECK(row[j] == doctest::Approx(1.0));
        }
    }

    // Constant terminal: every candidate ties, the lowest index wins.
    const ValueField flat_field = solve_nonlinear(spec, grid, sample(grid, [](double) {
        return 3.0;
    }));
    const PolicyField flat_policy = extract_policy(spec, grid, flat_field);
    for (const std::vector<double>& row : flat_policy.f_star) {
        for (double f : row) {
            CHECK(f == doctest::Approx(spec.f_values().front()));
        }
    }

    GridSpec other = grid;
    other.nx = 51;
    CHECK_THROWS_AS(extract_policy(spec, other, convex_field), GridMismatch);
}

TEST_CASE("dirichlet_frozen pins the boundary rows to the terminal") {
    const ControlSpec spec = gheat_spec();
    GridSpec grid = test_grid(101);
    grid.boundary = BoundaryMode::dirichlet_frozen;
    const std::vector<double> terminal = sample(grid, [](double x) { return x * x; });
    const ValueField field = solve_nonlinear(spec, grid, terminal);
    for (const std::vector<double>& row : field.values) {
        CHECK(row.front() == terminal.front());
        CHECK(row.back() == terminal.back());
    }
}

TEST_CASE("invalid inputs are rejected") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);
    CHECK_THROWS_AS(solve_nonlinear(spec, grid, std::vector<double>(7, 0.0)), InvalidArgument);

    GridSpec bad = grid;
    bad.nx = 2;
    CHECK_THROWS_AS(solve_nonlinear(spec, bad, std::vector<double>(2, 0.0)), InvalidArgument);

    GridSpec flipped = grid;
    flipped.x_min = 10.0;
    flipped.x_max = -10.0;
    CHECK_THROWS_AS(flipped.validate(), InvalidArgument);

    // A negative diffusion coefficient is a model error at table build time.
    const ControlSpec negative =
        ControlSpec::from_values({1.0}, Expr::parse("0"), Expr::parse("x"));
    CHECK_THROWS_AS(solve_nonlinear(negative, grid, std::vector<double>(101, 0.0)), EvalError);

    // Declared ellipticity is validated on the grid: a = max(0, x) vanishes.
    ConditionFlags elliptic;
    elliptic.ellipticity = true;
    const ControlSpec degenerate =
        ControlSpec::from_values({1.0}, Expr::parse("0"), Expr::parse("max(0, x)"), elliptic);
    CHECK_THROWS_AS(solve_nonlinear(degenerate, grid, std::vector<double>(101, 0.0)), EvalError);

    // Coefficient evaluation errors propagate: 1/x blows up at the x = 0 node.
    const ControlSpec singular =
        ControlSpec::from_values({1.0}, Expr::parse("1/x"), Expr::parse("1"));
    CHECK_THROWS_AS(solve_nonlinear(singular, grid, std::vector<double>(101, 0.0)), EvalError);
}

TEST_CASE("overflowing updates raise NonFinite") {
    const ControlSpec spec = gheat_spec();
    const GridSpec grid = test_grid(101);
    std::vector<double> terminal(101);
    for (std::size_t j = 0; j < terminal.size(); ++j) {
        terminal[j] = (j % 2 == 0) ? 1e307 : -1e307;
    }
    CHECK_THROWS_AS(solve_nonlinear(spec, grid, terminal), NonFinite);
}
