#include "nldiff/hjb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nldiff/errors.hpp"
#include "nldiff/g_operator.hpp"

namespace nldiff {

std::vector<double> GridSpec::xs() const {
    std::vector<double> out(static_cast<std::size_t>(nx));
    const double step = dx();
    for (int j = 0; j < nx; ++j) {
        out[static_cast<std::size_t>(j)] = x_min + step * static_cast<double>(j);
    }
    out.back() = x_max;
    return out;
}

void GridSpec::validate() const {
    if (!(x_min < x_max)) {
        throw InvalidArgument("grid needs x_min < x_max");
    }
    if (nx < 3) {
        throw InvalidArgument("grid needs nx >= 3");
    }
    if (!(T >= 0.0) || !std::isfinite(T)) {
        throw InvalidArgument("grid needs a finite horizon T >= 0");
    }
    if (dt_policy.kind == DtPolicy::Kind::auto_cfl) {
        if (!(dt_policy.safety > 0.0) || dt_policy.safety > 1.0) {
            throw InvalidArgument("auto_cfl safety must lie in (0, 1]");
        }
    } else if (!(dt_policy.dt > 0.0)) {
        throw InvalidArgument("fixed dt must be positive");
    }
}

std::pair<std::size_t, std::size_t> interior_band(std::size_t nx) {
    const std::size_t margin = nx / 4;
    return {margin, nx - 1 - margin};
}

namespace {

// Per-node coefficient candidates, row-major (node-major) so a node's
// controls are contiguous in the sweep.
struct CoeffTable {
    std::size_t nx = 0;
    std::size_t n_controls = 0;
    std::vector<double> b;
    std::vector<double> a;
    double a_max = 0.0;
    double b_abs_max = 0.0;

    std::span<const double> b_row(std::size_t j) const {
        return {b.data() + j * n_controls, n_controls};
    }
    std::span<const double> a_row(std::size_t j) const {
        return {a.data() + j * n_controls, n_controls};
    }
};

void note_extremes(CoeffTable& tab, double b, double a, double x) {
    if (a < 0.0) {
        std::ostringstream msg;
        msg << "diffusion coefficient a = " << a << " < 0 at x = " << x;
        throw EvalError(msg.str());
    }
    tab.a_max = std::max(tab.a_max, a);
    tab.b_abs_max = std::max(tab.b_abs_max, std::fabs(b));
}

CoeffTable build_table(const ControlSpec& spec, const std::vector<double>& xs) {
    CoeffTable tab;
    tab.nx = xs.size();
    tab.n_controls = spec.f_values().size();
    tab.b.resize(tab.nx * tab.n_controls);
    tab.a.resize(tab.nx * tab.n_controls);
    const auto& b_prog = spec.b_expr().program();
    const auto& a_prog = spec.a_expr().program();
    const std::size_t b_depth = spec.b_expr().stack_depth();
    const std::size_t a_depth = spec.a_expr().stack_depth();
    std::size_t idx = 0;
    for (double x : xs) {
        for (double f : spec.f_values()) {
            const double b = run_expr_program(b_prog, b_depth, f, x);
            const double a = run_expr_program(a_prog, a_depth, f, x);
            note_extremes(tab, b, a, x);
            tab.b[idx] = b;
            tab.a[idx] = a;
            ++idx;
        }
    }
    if (spec.declared().ellipticity) {
        for (std::size_t i = 0; i < tab.a.size(); ++i) {
            if (!(tab.a[i] > 0.0)) {
                throw EvalError("spec declares ellipticity but a <= 0 on the grid");
            }
        }
    }
    return tab;
}

CoeffTable build_table(const std::function<double(double)>& drift,
                       const std::function<double(double)>& diffusion,
                       const std::vector<double>& xs) {
    CoeffTable tab;
    tab.nx = xs.size();
    tab.n_controls = 1;
    tab.b.resize(tab.nx);
    tab.a.resize(tab.nx);
    for (std::size_t j = 0; j < xs.size(); ++j) {
        const double b = drift(xs[j]);
        const double a = diffusion(xs[j]);
        if (!std::isfinite(b) || !std::isfinite(a)) {
            std::ostringstream msg;
            msg << "non-finite coefficient at x = " << xs[j];
            throw EvalError(msg.str());
        }
        note_extremes(tab, b, a, xs[j]);
        tab.b[j] = b;
        tab.a[j] = a;
    }
    return tab;
}

double stability_bound(const CoeffTable& tab, double dx) {
    const double denom = tab.a_max + dx * tab.b_abs_max;
    if (denom == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return dx * dx / denom;
}

struct TimeLattice {
    std::size_t n_steps = 0; // M
    double dt = 0.0;
    std::vector<double> times;
};

TimeLattice make_lattice(const CoeffTable& tab, const GridSpec& grid) {
    const double bound = stability_bound(tab, grid.dx());
    double dt_target;
    if (grid.dt_policy.kind == DtPolicy::Kind::auto_cfl) {
        dt_target = grid.dt_policy.safety * bound;
    } else {
        dt_target = grid.dt_policy.dt;
        if (dt_target > bound * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "fixed dt " << dt_target << " exceeds the stability bound " << bound;
            throw UnstableStep(msg.str());
        }
    }
    TimeLattice lat;
    if (grid.T == 0.0) {
        lat.times = {0.0};
        return lat;
    }
    double steps;
    if (std::isinf(dt_target) || dt_target >= grid.T) {
        steps = 1.0;
    } else {
        steps = std::ceil(grid.T / dt_target - 1e-9);
    }
    lat.n_steps = static_cast<std::size_t>(std::max(1.0, steps));
    lat.dt = grid.T / static_cast<double>(lat.n_steps);
    lat.times.resize(lat.n_steps + 1);
    for (std::size_t i = 0; i <= lat.n_steps; ++i) {
        lat.times[i] = lat.dt * static_cast<double>(i);
    }
    lat.times.back() = grid.T;
    return lat;
}

// One backward step of the monotone Bellman discretization. prev is the row
// at the later time; next receives the earlier row.
void step_row(const CoeffTable& tab, BoundaryMode boundary, std::span<const double> terminal,
              double inv_dx, double inv_dx2, double dt, const double* prev, double* next) {
    const std::size_t nx = tab.nx;
    const std::size_t n_controls = tab.n_controls;
    for (std::size_t j = 0; j < nx; ++j) {
        double fwd, bwd, d2;
        if (j == 0) {
            if (boundary == BoundaryMode::dirichlet_frozen) {
                next[0] = terminal[0];
                continue;
            }
            fwd = bwd = (prev[1] - prev[0]) * inv_dx;
            d2 = 0.0;
        } else if (j == nx - 1) {
            if (boundary == BoundaryMode::dirichlet_frozen) {
                next[j] = terminal[j];
                continue;
            }
            fwd = bwd = (prev[j] - prev[j - 1]) * inv_dx;
            d2 = 0.0;
        } else {
            fwd = (prev[j + 1] - prev[j]) * inv_dx;
            bwd = (prev[j] - prev[j - 1]) * inv_dx;
            d2 = (prev[j + 1] - 2.0 * prev[j] + prev[j - 1]) * inv_dx2;
        }
        const double* b_row = tab.b.data() + j * n_controls;
        const double* a_row = tab.a.data() + j * n_controls;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n_controls; ++k) {
            const double b = b_row[k];
            const double d1 = (b >= 0.0) ? fwd : bwd;
            const double cand = b * d1 + 0.5 * a_row[k] * d2;
            if (cand > best) {
                best = cand;
            }
        }
        next[j] = prev[j] + dt * best;
    }
}

ValueField run_sweep(const CoeffTable& tab, const GridSpec& grid,
                     std::span<const double> terminal) {
    grid.validate();
    if (terminal.size() != static_cast<std::size_t>(grid.nx)) {
        throw InvalidArgument("terminal data size does not match grid.nx");
    }
    for (double v : terminal) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("terminal data must be finite");
        }
    }

    const TimeLattice lat = make_lattice(tab, grid);
    ValueField field;
    field.times = lat.times;
    field.xs = grid.xs();
    field.scheme = kSchemeId;
    field.dt = lat.dt;
    field.boundary = grid.boundary;
    field.values.assign(lat.times.size(), std::vector<double>(terminal.size()));
    std::copy(terminal.begin(), terminal.end(), field.values.back().begin());

    const double inv_dx = 1.0 / grid.dx();
    const double inv_dx2 = inv_dx * inv_dx;
    for (std::size_t i = lat.times.size() - 1; i-- > 0;) {
        step_row(tab, grid.boundary, terminal, inv_dx, inv_dx2, lat.dt,
                 field.values[i + 1].data(), field.values[i].data());
        for (std::size_t j = 0; j < field.values[i].size(); ++j) {
            if (!std::isfinite(field.values[i][j])) {
                std::ostringstream msg;
                msg << "sweep produced a non-finite value at t = " << field.times[i]
                    << ", x = " << field.xs[j];
                throw NonFinite(msg.str());
            }
        }
    }
    return field;
}

} // namespace

double cfl_dt(const ControlSpec& spec, const GridSpec& grid) {
    grid.validate();
    const CoeffTable tab = build_table(spec, grid.xs());
    const double bound = stability_bound(tab, grid.dx());
    if (grid.dt_policy.kind == DtPolicy::Kind::auto_cfl) {
        return grid.dt_policy.safety * bound;
    }
    const double dt = grid.dt_policy.dt;
    if (dt > bound * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "fixed dt " << dt << " exceeds the stability bound " << bound;
        throw UnstableStep(msg.str());
    }
    return dt;
}

ValueField solve_nonlinear(const ControlSpec& spec, const GridSpec& grid,
                           std::span<const double> terminal) {
    grid.validate();
    return run_sweep(build_table(spec, grid.xs()), grid, terminal);
}

ValueField solve_linear(const std::function<double(double)>& drift,
                        const std::function<double(double)>& diffusion, const GridSpec& grid,
                        std::span<const double> terminal) {
    grid.validate();
    return run_sweep(build_table(drift, diffusion, grid.xs()), grid, terminal);
}

SemigroupSlice semigroup_apply(const ControlSpec& spec, const GridSpec& grid,
                               std::span<const double> terminal, double t) {
    if (!(t >= 0.0) || t > grid.T * (1.0 + 1e-12)) {
        throw InvalidArgument("semigroup time t must lie in [0, T]");
    }
    const ValueField field = solve_nonlinear(spec, grid, terminal);
    const double remaining = grid.T - t;
    std::size_t idx;
    if (field.dt == 0.0) {
        idx = 0;
    } else {
        const double raw = std::round(remaining / field.dt);
        idx = static_cast<std::size_t>(
            std::clamp(raw, 0.0, static_cast<double>(field.times.size() - 1)));
    }
    SemigroupSlice slice;
    slice.xs = field.xs;
    slice.values = field.values[idx];
    slice.t_requested = t;
    slice.t_snapped = grid.T - field.times[idx];
    slice.snap_distance = std::fabs(slice.t_snapped - t);
    return slice;
}

PolicyField extract_policy(const ControlSpec& spec, const GridSpec& grid,
                           const ValueField& field) {
    grid.validate();
    const CoeffTable tab = build_table(spec, grid.xs());
    const TimeLattice lat = make_lattice(tab, grid);
    if (field.xs != grid.xs() || field.times != lat.times) {
        throw GridMismatch("value field does not live on the lattice implied by (spec, grid)");
    }
    if (field.values.size() != field.times.size()) {
        throw GridMismatch("value field row count does not match its time lattice");
    }
    if (field.boundary != grid.boundary) {
        throw GridMismatch("value field boundary mode does not match the grid");
    }

    const std::size_t nx = tab.nx;
    const double inv_dx = 1.0 / grid.dx();
    const double inv_dx2 = inv_dx * inv_dx;
    const std::vector<double>& fs = spec.f_values();

    PolicyField policy;
    policy.times = field.times;
    policy.xs = field.xs;
    policy.f_star.assign(field.times.size(), std::vector<double>(nx));

    for (std::size_t i = 0; i < field.times.size(); ++i) {
        // Row i of the sweep was computed from row i+1; the terminal row's
        // selection is taken from the terminal data itself.
        const std::vector<double>& src =
            (i + 1 < field.times.size()) ? field.values[i + 1] : field.values[i];
        for (std::size_t j = 0; j < nx; ++j) {
            double fwd, bwd, d2;
            if (j == 0) {
                fwd = bwd = (src[1] - src[0]) * inv_dx;
                d2 = 0.0;
            } else if (j == nx - 1) {
                fwd = bwd = (src[j] - src[j - 1]) * inv_dx;
                d2 = 0.0;
            } else {
                fwd = (src[j + 1] - src[j]) * inv_dx;
                bwd = (src[j] - src[j - 1]) * inv_dx;
                d2 = (src[j + 1] - 2.0 * src[j] + src[j - 1]) * inv_dx2;
            }
            const std::span<const double> b_row = tab.b_row(j);
            const std::span<const double> a_row = tab.a_row(j);
            // Match the sweep's candidate arithmetic: same upwind choice per
            // control, same strict-improvement tie rule.
            std::size_t best = 0;
            double best_value = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < b_row.size(); ++k) {
                const double b = b_row[k];
                const double d1 = (b >= 0.0) ? fwd : bwd;
                const double cand = b * d1 + 0.5 * a_row[k] * d2;
                if (cand > best_value) {
                    best_value = cand;
                    best = k;
                }
            }
            policy.f_star[i][j] = fs[best];
        }
    }
    return policy;
}

} // namespace nldiff
