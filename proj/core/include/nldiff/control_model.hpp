#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nldiff/expr.hpp"

namespace nldiff {

/// Structural conditions a model may declare. Declared conditions gate the
/// theorem-level checks; check_conditions() probes all of them regardless.
struct ConditionFlags {
    bool convexity = false;
    bool linear_growth = false;
    bool lipschitz = false;
    bool local_holder = false;
    bool ellipticity = false;
    bool continuity_in_control = false;
    bool certain_volatility = false;
    bool zero_drift = false;
};

/// Known condition names, in report order.
std::vector<std::string> condition_names();

struct ThetaPoint {
    double b;
    double a;
};

/// Compact control set F (as a finite ascending grid), the coefficient maps
/// b(f,x) and a(f,x), and the declared structural conditions.
///
/// Immutable after construction; all member functions are reentrant.
class ControlSpec {
public:
    /// F given as an explicit list of control values (kept as a discrete
    /// set: no segments are interpolated between neighbours).
    static ControlSpec from_values(std::vector<double> f_values, Expr b, Expr a,
                                   ConditionFlags declared = {});

    /// F given as an interval [f_lo, f_hi] discretized to n_f equispaced
    /// nodes. The sup over F becomes an exact max over the grid.
    static ControlSpec from_interval(double f_lo, double f_hi, int n_f, Expr b, Expr a,
                                     ConditionFlags declared = {});

    static constexpr int kDefaultIntervalNodes = 33;

    const std::vector<double>& f_values() const noexcept { return f_values_; }
    bool interval_grid() const noexcept { return interval_grid_; }
    const Expr& b_expr() const noexcept { return b_; }
    const Expr& a_expr() const noexcept { return a_; }
    const ConditionFlags& declared() const noexcept { return declared_; }

    double b(double f, double x) const { return b_.eval(f, x); }
    double a(double f, double x) const { return a_.eval(f, x); }

    /// sup over F of a(., x), exact over the control grid. Nonnegative
    /// whenever a is.
    double a_star(double x) const;

    /// sup over F of b(., x), exact over the control grid.
    double b_star(double x) const;

    /// The admissible drift/variance set Theta(x) = {(b(f,x), a(f,x))},
    /// one entry per control value, in f_values order.
    std::vector<ThetaPoint> theta_set(double x) const;

private:
    ControlSpec(std::vector<double> f_values, bool interval_grid, Expr b, Expr a,
                ConditionFlags declared);

    std::vector<double> f_values_;
    bool interval_grid_;
    Expr b_;
    Expr a_;
    ConditionFlags declared_;
};

struct ConditionWitness {
    double f = 0.0;
    double x = 0.0;
    std::optional<double> y; // second space point, for modulus conditions
};

/// Outcome of probing one condition on a sample set. `witness` is present
/// iff the condition failed.
struct ConditionReport {
    std::string name;
    bool declared = false;
    bool pass = false;
    std::optional<ConditionWitness> witness;
    double estimated_constant = 0.0;
    std::string note;
};

struct CheckOptions {
    /// Midpoint tolerance for the convexity probe, relative to the diameter
    /// of the sampled Theta(x).
    double eps_cvx_rel = 1e-6;
    /// Ratio above which a scale-dependent fitted constant is flagged as
    /// inconsistent with the condition's growth form.
    double scale_slack = 1.5;
};

/// Samples the conditions on an equispaced f x x lattice (plus all x-pairs
/// on a coarser subgrid for the modulus conditions) and reports, per
/// condition, either the smallest constant consistent with the samples or a
/// violating witness. Deterministic given (spec, domain, n_samples).
///
/// These are finite-sample certificates, not proofs.
std::vector<ConditionReport> check_conditions(const ControlSpec& spec, double x_lo, double x_hi,
                                              int n_samples, const CheckOptions& opts = {});

} // namespace nldiff
