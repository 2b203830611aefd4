#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nldiff/control_model.hpp"

namespace nldiff {

enum class BoundaryMode {
    /// Ghost nodes by linear extrapolation: the second difference vanishes
    /// at the edge and both one-sided first differences agree. Exact for
    /// affine profiles, so boundary reflection stays small.
    linear_extrapolation,
    /// Boundary rows held at the terminal values.
    dirichlet_frozen,
};

struct DtPolicy {
    enum class Kind { auto_cfl, fixed };
    Kind kind = Kind::auto_cfl;
    double safety = 0.9; // in (0, 1], used by auto_cfl
    double dt = 0.0;     // used by fixed

    static DtPolicy auto_cfl(double safety = 0.9) { return {Kind::auto_cfl, safety, 0.0}; }
    static DtPolicy fixed(double dt) { return {Kind::fixed, 1.0, dt}; }
};

/// Truncated space-time lattice for the PDE sweeps.
struct GridSpec {
    double x_min = -10.0;
    double x_max = 10.0;
    int nx = 401;
    double T = 1.0;
    DtPolicy dt_policy{};
    BoundaryMode boundary = BoundaryMode::linear_extrapolation;

    double dx() const { return (x_max - x_min) / static_cast<double>(nx - 1); }
    std::vector<double> xs() const;
    void validate() const; // throws InvalidArgument
};

/// Sampled value surface v(t_i, x_j) with v(T, .) the terminal condition.
/// Row i approximates the semigroup at remaining time T - t_i.
struct ValueField {
    std::vector<double> times; // ascending, times.front() == 0, times.back() == T
    std::vector<double> xs;
    std::vector<std::vector<double>> values; // values[i][j] = v(times[i], xs[j])
    std::string scheme;
    double dt = 0.0;
    BoundaryMode boundary = BoundaryMode::linear_extrapolation;
};

/// Per-node maximizing control on the same lattice: the discrete Markov
/// selection. Every entry is a member of the spec's f_values.
struct PolicyField {
    std::vector<double> times;
    std::vector<double> xs;
    std::vector<std::vector<double>> f_star;
};

inline constexpr const char* kSchemeId = "explicit-upwind-bellman-1";

/// Stability bound of the explicit monotone scheme:
///
///     dt = safety * dx^2 / (A_max + dx * B_max)
///
/// with A_max / B_max the extremes of a / |b| over grid x F. With a fixed-dt
/// policy, validates the given dt against the safety=1 bound and returns it.
/// Throws UnstableStep when a fixed dt violates the bound.
double cfl_dt(const ControlSpec& spec, const GridSpec& grid);

/// Backward sweep for the terminal-value problem
///
///     d_t v + max_f [ b(f,x) d_x v + (1/2) a(f,x) d_xx v ] = 0,  v(T,.) = terminal,
///
/// using explicit Euler steps with per-control upwind first differences
/// (forward when b(f,x) >= 0, backward otherwise) and central second
/// differences; the node update takes the max over controls of the
/// one-step operators. Monotone under the cfl_dt bound, so values converge
/// to the viscosity solution as the lattice is refined.
///
/// Preserves constants to machine precision and is monotone and sublinear
/// in the terminal data. With a single control value it coincides bit for
/// bit with solve_linear on that coefficient pair.
ValueField solve_nonlinear(const ControlSpec& spec, const GridSpec& grid,
                           std::span<const double> terminal);

/// The same sweep with a single (drift, diffusion) coefficient pair and no
/// max over controls. diffusion must be >= 0 on the grid.
ValueField solve_linear(const std::function<double(double)>& drift,
                        const std::function<double(double)>& diffusion, const GridSpec& grid,
                        std::span<const double> terminal);

struct SemigroupSlice {
    std::vector<double> xs;
    std::vector<double> values; // T_t(terminal) sampled on xs
    double t_requested = 0.0;
    double t_snapped = 0.0;
    double snap_distance = 0.0;
};

/// Numerical semigroup action: row v(T - t, .) of solve_nonlinear, with t
/// snapped to the nearest lattice time (snap distance reported).
SemigroupSlice semigroup_apply(const ControlSpec& spec, const GridSpec& grid,
                               std::span<const double> terminal, double t);

/// Recovers the per-node argmax control using the same discrete derivatives
/// the sweep used, row by row. The terminal row's selection is computed from
/// the terminal data itself. Throws GridMismatch when the field does not
/// live on the lattice implied by (spec, grid).
PolicyField extract_policy(const ControlSpec& spec, const GridSpec& grid,
                           const ValueField& field);

/// Index range [lo, hi] of the middle half of a grid's nodes; the band used
/// for interior error metrics.
std::pair<std::size_t, std::size_t> interior_band(std::size_t nx);

} // namespace nldiff
