#include "nldiff/sde_lab.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include "nldiff/errors.hpp"
#include "nldiff/rng.hpp"

namespace nldiff {

namespace {

struct Coeff {
    double b;
    double a;
    double f; // control in effect, for diagnostics
};

struct ExprRef {
    const std::vector<ExprInstr>* program;
    std::size_t depth;

    explicit ExprRef(const Expr& e) : program(&e.program()), depth(e.stack_depth()) {}
    double operator()(double f, double x) const {
        return run_expr_program(*program, depth, f, x);
    }
};

struct ConstantResolver {
    ExprRef b;
    ExprRef a;
    double f;

    Coeff operator()(double, double y) const { return {b(f, y), a(f, y), f}; }
};

struct FeedbackResolver {
    ExprRef b;
    ExprRef a;
    const PolicyField* field;
    double dt_field;
    double x0_field;
    double dx_field;

    Coeff operator()(double t, double y) const {
        std::size_t it = 0;
        if (dt_field > 0.0) {
            const double raw = std::round(t / dt_field);
            it = static_cast<std::size_t>(
                std::clamp(raw, 0.0, static_cast<double>(field->times.size() - 1)));
        }
        const double raw_j = std::round((y - x0_field) / dx_field);
        const std::size_t j = static_cast<std::size_t>(
            std::clamp(raw_j, 0.0, static_cast<double>(field->xs.size() - 1)));
        const double f = field->f_star[it][j];
        return {b(f, y), a(f, y), f};
    }
};

// State-independent coefficients resolved once up front.
struct FixedResolver {
    double b;
    double a;
    double f;

    Coeff operator()(double, double) const { return {b, a, f}; }
};

struct AStarResolver {
    ExprRef a;
    const std::vector<double>* fs;

    Coeff operator()(double, double y) const {
        double best = -std::numeric_limits<double>::infinity();
        double f_at = (*fs)[0];
        for (double f : *fs) {
            const double v = a(f, y);
            if (v > best) {
                best = v;
                f_at = f;
            }
        }
        return {0.0, best, f_at};
    }
};

struct BStarResolver {
    ExprRef b;
    ExprRef a;
    const std::vector<double>* fs;

    Coeff operator()(double, double y) const {
        double best_b = -std::numeric_limits<double>::infinity();
        double best_a = -std::numeric_limits<double>::infinity();
        double f_at = (*fs)[0];
        for (double f : *fs) {
            best_b = std::max(best_b, b(f, y));
            const double v = a(f, y);
            if (v > best_a) {
                best_a = v;
                f_at = f;
            }
        }
        return {best_b, best_a, f_at};
    }
};

struct SnapshotPlan {
    // (step, output slot) sorted by step; a path walks this with a cursor.
    std::vector<std::pair<int, std::size_t>> entries;
};

template <class Resolver>
void run_path_block(const Resolver& resolve, PathEnsemble& ens, const SnapshotPlan& plan,
                    double dt, bool track_max, int p_begin, int p_end) {
    const double sqrt_dt = std::sqrt(dt);
    for (int p = p_begin; p < p_end; ++p) {
        const std::uint64_t key = rng::stream_key(ens.seed, static_cast<std::uint64_t>(p));
        double y = ens.x0;
        double max_abs = std::fabs(y);
        std::size_t cursor = 0;
        while (cursor < plan.entries.size() && plan.entries[cursor].first == 0) {
            ens.snapshots[plan.entries[cursor].second][static_cast<std::size_t>(p)] = y;
            ++cursor;
        }
        for (int k = 0; k < ens.n_steps; ++k) {
            const double t = dt * static_cast<double>(k);
            const Coeff c = resolve(t, y);
            if (c.a < 0.0) {
                std::ostringstream msg;
                msg << "a(f, x) = " << c.a << " < 0 along a path at x = " << y
                    << " (f = " << c.f << ")";
                throw NegativeVariance(c.f, y, msg.str());
            }
            const double xi = rng::normal_draw(key, static_cast<std::uint64_t>(k));
            y = y + c.b * dt + std::sqrt(c.a) * sqrt_dt * xi;
            while (cursor < plan.entries.size() && plan.entries[cursor].first == k + 1) {
                ens.snapshots[plan.entries[cursor].second][static_cast<std::size_t>(p)] = y;
                ++cursor;
            }
            if (track_max) {
                max_abs = std::max(max_abs, std::fabs(y));
            }
        }
        ens.terminal[static_cast<std::size_t>(p)] = y;
        if (track_max) {
            ens.running_max_abs[static_cast<std::size_t>(p)] = max_abs;
        }
    }
}

template <class Resolver>
void run_all_paths(const Resolver& resolve, PathEnsemble& ens, const SnapshotPlan& plan,
                   double dt, bool track_max, int threads) {
    const int n_workers = std::max(1, std::min(threads, ens.n_paths));
    if (n_workers == 1) {
        run_path_block(resolve, ens, plan, dt, track_max, 0, ens.n_paths);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
    const int chunk = (ens.n_paths + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(ens.n_paths, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                run_path_block(resolve, ens, plan, dt, track_max, begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

double resolve_constant_control(const ControlSpec& spec, double f) {
    const std::vector<double>& fs = spec.f_values();
    double best = fs[0];
    double best_gap = std::fabs(f - fs[0]);
    for (double candidate : fs) {
        const double gap = std::fabs(f - candidate);
        if (gap < best_gap) {
            best_gap = gap;
            best = candidate;
        }
    }
    if (best_gap > 1e-9 * std::max(1.0, std::fabs(f))) {
        std::ostringstream msg;
        msg << "constant policy control " << f << " is not a member of f_values";
        throw InvalidArgument(msg.str());
    }
    return best;
}

} // namespace

PathEnsemble simulate(const ControlSpec& spec, const Policy& policy, double x0, double T,
                      int n_steps, int n_paths, std::uint64_t seed, const SimOptions& opts) {
    if (n_steps < 1) {
        throw InvalidArgument("simulate needs n_steps >= 1");
    }
    if (n_paths < 1) {
        throw InvalidArgument("simulate needs n_paths >= 1");
    }
    if (!(T >= 0.0) || !std::isfinite(T) || !std::isfinite(x0)) {
        throw InvalidArgument("simulate needs finite x0 and T >= 0");
    }

    PathEnsemble ens;
    ens.x0 = x0;
    ens.T = T;
    ens.n_steps = n_steps;
    ens.n_paths = n_paths;
    ens.seed = seed;
    ens.terminal.resize(static_cast<std::size_t>(n_paths));
    ens.snapshot_steps = opts.snapshot_steps;
    ens.snapshots.assign(opts.snapshot_steps.size(),
                         std::vector<double>(static_cast<std::size_t>(n_paths)));
    if (opts.track_running_max) {
        ens.running_max_abs.resize(static_cast<std::size_t>(n_paths));
    }

    SnapshotPlan plan;
    for (std::size_t i = 0; i < opts.snapshot_steps.size(); ++i) {
        const int s = opts.snapshot_steps[i];
        if (s < 0 || s > n_steps) {
            throw InvalidArgument("snapshot step outside [0, n_steps]");
        }
        plan.entries.emplace_back(s, i);
    }
    std::stable_sort(plan.entries.begin(), plan.entries.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });

    const double dt = T / static_cast<double>(n_steps);
    const ExprRef b_ref(spec.b_expr());
    const ExprRef a_ref(spec.a_expr());

    if (const auto* constant = std::get_if<ConstantPolicy>(&policy)) {
        const ConstantResolver resolver{b_ref, a_ref,
                                        resolve_constant_control(spec, constant->f)};
        run_all_paths(resolver, ens, plan, dt, opts.track_running_max, opts.threads);
    } else if (const auto* feedback = std::get_if<FeedbackPolicy>(&policy)) {
        const PolicyField& field = feedback->field;
        if (field.times.empty() || field.xs.size() < 2 || field.f_star.empty()) {
            throw InvalidArgument("feedback policy field is empty");
        }
        FeedbackResolver resolver{b_ref,
                                  a_ref,
                                  &field,
                                  field.times.size() > 1 ? field.times[1] - field.times[0] : 0.0,
                                  field.xs.front(),
                                  field.xs[1] - field.xs[0]};
        run_all_paths(resolver, ens, plan, dt, opts.track_running_max, opts.threads);
    } else if (std::holds_alternative<ExtremalAStarPolicy>(policy)) {
        if (!spec.a_expr().depends_on_x()) {
            const AStarResolver slow{a_ref, &spec.f_values()};
            const Coeff c = slow(0.0, 0.0);
            run_all_paths(FixedResolver{0.0, c.a, c.f}, ens, plan, dt, opts.track_running_max,
                          opts.threads);
        } else {
            const AStarResolver resolver{a_ref, &spec.f_values()};
            run_all_paths(resolver, ens, plan, dt, opts.track_running_max, opts.threads);
        }
    } else {
        if (!spec.a_expr().depends_on_x() && !spec.b_expr().depends_on_x()) {
            const BStarResolver slow{b_ref, a_ref, &spec.f_values()};
            const Coeff c = slow(0.0, 0.0);
            run_all_paths(FixedResolver{c.b, c.a, c.f}, ens, plan, dt, opts.track_running_max,
                          opts.threads);
        } else {
            const BStarResolver resolver{b_ref, a_ref, &spec.f_values()};
            run_all_paths(resolver, ens, plan, dt, opts.track_running_max, opts.threads);
        }
    }
    return ens;
}

Estimate estimate(const PathEnsemble& ensemble, const std::function<double(double)>& psi) {
    if (ensemble.terminal.empty()) {
        throw InvalidArgument("estimate needs a non-empty ensemble");
    }
    const std::size_t n = ensemble.terminal.size();
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = psi(ensemble.terminal[i]);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "psi produced a non-finite value at y = " << ensemble.terminal[i];
            throw EvalError(msg.str());
        }
        values[i] = v;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);
    Estimate est{mean, 0.0};
    if (n > 1) {
        double ss = 0.0;
        for (double v : values) {
            const double d = v - mean;
            ss += d * d;
        }
        const double sample_var = ss / static_cast<double>(n - 1);
        est.stderr_mean = std::sqrt(sample_var / static_cast<double>(n));
    }
    return est;
}

ConvexOrderRecord convex_order_check(const ControlSpec& spec, const Policy& policy,
                                     const std::function<double(double)>& psi, double x0,
                                     double T, int n_steps, int n_paths, std::uint64_t seed,
                                     const SimOptions& opts) {
    if (!spec.declared().zero_drift) {
        throw HypothesisViolated("convex_order_check requires the zero_drift condition");
    }
    SimOptions sim_opts = opts;
    sim_opts.snapshot_steps.clear();
    sim_opts.track_running_max = false;
    // Common random numbers: both laws consume identical seed streams.
    const PathEnsemble lhs_ens = simulate(spec, policy, x0, T, n_steps, n_paths, seed, sim_opts);
    const PathEnsemble rhs_ens =
        simulate(spec, ExtremalAStarPolicy{}, x0, T, n_steps, n_paths, seed, sim_opts);
    ConvexOrderRecord rec;
    rec.lhs = estimate(lhs_ens, psi);
    rec.rhs = estimate(rhs_ens, psi);
    rec.pass = rec.lhs.mean <= rec.rhs.mean + 3.0 * (rec.lhs.stderr_mean + rec.rhs.stderr_mean);
    return rec;
}

} // namespace nldiff
