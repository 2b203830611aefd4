#pragma once

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

#include "nldiff/control_model.hpp"
#include "nldiff/hjb_solver.hpp"

namespace nldiff {

/// A fixed control value; must be a member of the spec's f_values.
struct ConstantPolicy {
    double f;
};

/// Nearest-node lookup of a PolicyField in (t, x). No interpolation, so
/// resolved controls stay inside f_values.
struct FeedbackPolicy {
    PolicyField field;
};

/// Drift 0, diffusion a*(x) = sup over F of a(., x): the extremal diffusion
/// matching the worst case for convex payoffs under zero drift.
struct ExtremalAStarPolicy {};

/// Drift b*(x) = sup over F of b(., x), diffusion a*(x): the comparison
/// diffusion for increasing payoffs under volatility certainty.
struct ExtremalBStarPolicy {};

using Policy = std::variant<ConstantPolicy, FeedbackPolicy, ExtremalAStarPolicy,
                            ExtremalBStarPolicy>;

struct SimOptions {
    /// Step indices (in [0, n_steps]) at which path values are recorded, in
    /// addition to the terminal values.
    std::vector<int> snapshot_steps;
    /// Record max_k |Y_k| per path.
    bool track_running_max = false;
    /// Worker threads; paths are independent, results are identical for any
    /// count.
    int threads = 1;
};

/// Terminal values (and optional snapshots) of an Euler-Maruyama ensemble.
/// Reproducible: identical (spec, policy, x0, T, n_steps, n_paths, seed)
/// gives an identical ensemble.
struct PathEnsemble {
    double x0 = 0.0;
    double T = 0.0;
    int n_steps = 0;
    int n_paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> terminal;                 // size n_paths
    std::vector<int> snapshot_steps;              // as requested
    std::vector<std::vector<double>> snapshots;   // [snapshot][path]
    std::vector<double> running_max_abs;          // per path, if tracked
};

/// Euler-Maruyama simulation of the controlled SDE
///
///     Y_{k+1} = Y_k + b_k dt + sqrt(a_k dt) xi_k,
///
/// with (b_k, a_k) resolved per step from the policy and xi_k standard
/// normals from the counter-based per-path streams (see rng.hpp).
/// Throws NegativeVariance when a < 0 is encountered along a path.
PathEnsemble simulate(const ControlSpec& spec, const Policy& policy, double x0, double T,
                      int n_steps, int n_paths, std::uint64_t seed, const SimOptions& opts = {});

struct Estimate {
    double mean = 0.0;
    double stderr_mean = 0.0; // sample std / sqrt(n_paths)
};

/// Sample mean and standard error of psi over the ensemble's terminal
/// values. Throws EvalError when psi produces a non-finite value.
Estimate estimate(const PathEnsemble& ensemble, const std::function<double(double)>& psi);

struct ConvexOrderRecord {
    Estimate lhs; // under the candidate policy
    Estimate rhs; // under the extremal a* diffusion, common random numbers
    bool pass = false;
};

/// Empirical convex-order comparison: expectation of a convex psi under
/// `policy` against the extremal a* diffusion, coupled by common random
/// numbers (identical seed streams). Passes when
/// lhs.mean <= rhs.mean + 3 (lhs.stderr + rhs.stderr). Requires the
/// zero_drift condition to be declared; psi's convexity is the caller's
/// responsibility.
ConvexOrderRecord convex_order_check(const ControlSpec& spec, const Policy& policy,
                                     const std::function<double(double)>& psi, double x0,
                                     double T, int n_steps, int n_paths, std::uint64_t seed,
                                     const SimOptions& opts = {});

} // namespace nldiff
