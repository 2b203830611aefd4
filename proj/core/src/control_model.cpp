#include "nldiff/control_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nldiff/errors.hpp"

namespace nldiff {

namespace {

std::vector<double> equispaced(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = lo + step * static_cast<double>(i);
    }
    out.back() = hi;
    return out;
}

double point_distance(const ThetaPoint& p, const ThetaPoint& q) {
    return std::hypot(p.b - q.b, p.a - q.a);
}

double point_segment_distance(const ThetaPoint& p, const ThetaPoint& s0, const ThetaPoint& s1) {
    const double vx = s1.b - s0.b;
    const double vy = s1.a - s0.a;
    const double wx = p.b - s0.b;
    const double wy = p.a - s0.a;
    const double vv = vx * vx + vy * vy;
    if (vv == 0.0) {
        return std::hypot(wx, wy);
    }
    const double t = std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0);
    return std::hypot(wx - t * vx, wy - t * vy);
}

} // namespace

std::vector<std::string> condition_names() {
    return {"convexity",   "linear_growth",         "lipschitz",
            "local_holder", "ellipticity",           "continuity_in_control",
            "certain_volatility", "zero_drift"};
}

ControlSpec::ControlSpec(std::vector<double> f_values, bool interval_grid, Expr b, Expr a,
                         ConditionFlags declared)
    : f_values_(std::move(f_values)),
      interval_grid_(interval_grid),
      b_(std::move(b)),
      a_(std::move(a)),
      declared_(declared) {}

ControlSpec ControlSpec::from_values(std::vector<double> f_values, Expr b, Expr a,
                                     ConditionFlags declared) {
    if (f_values.empty()) {
        throw InvalidArgument("control set F must contain at least one value");
    }
    for (std::size_t i = 0; i + 1 < f_values.size(); ++i) {
        if (!(f_values[i] < f_values[i + 1])) {
            throw InvalidArgument("control values must be strictly ascending");
        }
    }
    for (double f : f_values) {
        if (!std::isfinite(f)) {
            throw InvalidArgument("control values must be finite");
        }
    }
    return ControlSpec(std::move(f_values), /*interval_grid=*/false, std::move(b), std::move(a),
                       declared);
}

ControlSpec ControlSpec::from_interval(double f_lo, double f_hi, int n_f, Expr b, Expr a,
                                       ConditionFlags declared) {
    if (!std::isfinite(f_lo) || !std::isfinite(f_hi) || f_lo > f_hi) {
        throw InvalidArgument("control interval must satisfy f_lo <= f_hi and be finite");
    }
    if (f_lo == f_hi) {
        return ControlSpec({f_lo}, /*interval_grid=*/true, std::move(b), std::move(a), declared);
    }
    if (n_f < 2) {
        throw InvalidArgument("control interval needs at least 2 grid nodes");
    }
    return ControlSpec(equispaced(f_lo, f_hi, n_f), /*interval_grid=*/true, std::move(b),
                       std::move(a), declared);
}

double ControlSpec::a_star(double x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (double f : f_values_) {
        best = std::max(best, a_.eval(f, x));
    }
    return best;
}

double ControlSpec::b_star(double x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (double f : f_values_) {
        best = std::max(best, b_.eval(f, x));
    }
    return best;
}

std::vector<ThetaPoint> ControlSpec::theta_set(double x) const {
    std::vector<ThetaPoint> out;
    out.reserve(f_values_.size());
    for (double f : f_values_) {
        out.push_back({b_.eval(f, x), a_.eval(f, x)});
    }
    return out;
}

namespace {

// Convexity probe: every midpoint of two sampled Theta(x) points must lie
// within eps of the sampled set. An interval-based F is read as the polyline
// through consecutive samples; an explicit list is read as a discrete set.
ConditionReport probe_convexity(const ControlSpec& spec, const std::vector<double>& xs,
                                double eps_rel) {
    ConditionReport rep;
    rep.name = "convexity";
    rep.pass = true;
    double worst = 0.0;
    for (double x : xs) {
        const std::vector<ThetaPoint> theta = spec.theta_set(x);
        const std::size_t k = theta.size();
        if (k < 2) continue;
        double diameter = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                diameter = std::max(diameter, point_distance(theta[i], theta[j]));
            }
        }
        const double eps = eps_rel * diameter;
        for (std::size_t i = 0; i < k && rep.pass; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                const ThetaPoint mid{0.5 * (theta[i].b + theta[j].b),
                                     0.5 * (theta[i].a + theta[j].a)};
                double dist = std::numeric_limits<double>::infinity();
                if (spec.interval_grid()) {
                    for (std::size_t s = 0; s + 1 < k; ++s) {
                        dist = std::min(dist, point_segment_distance(mid, theta[s], theta[s + 1]));
                    }
                } else {
                    for (const ThetaPoint& p : theta) {
                        dist = std::min(dist, point_distance(mid, p));
                    }
                }
                worst = std::max(worst, dist);
                if (dist > eps) {
                    rep.pass = false;
                    rep.witness = ConditionWitness{spec.f_values()[i], x, spec.f_values()[j]};
                    std::ostringstream note;
                    note << "midpoint (" << mid.b << ", " << mid.a << ") lies " << dist
                         << " away from the sampled set";
                    rep.note = note.str();
                    break;
                }
            }
        }
    }
    rep.estimated_constant = worst;
    return rep;
}

ConditionReport probe_linear_growth(const ControlSpec& spec, const std::vector<double>& xs,
                                    double scale_slack) {
    ConditionReport rep;
    rep.name = "linear_growth";
    rep.pass = true;

    double abs_lo = std::numeric_limits<double>::infinity();
    double abs_hi = 0.0;
    for (double x : xs) {
        abs_lo = std::min(abs_lo, std::fabs(x));
        abs_hi = std::max(abs_hi, std::fabs(x));
    }
    const double inner_cut = 0.5 * (abs_lo + abs_hi);

    double c_all = 0.0;
    double c_inner = 0.0;
    double worst_ratio = 0.0;
    ConditionWitness worst_at{};
    for (double x : xs) {
        for (double f : spec.f_values()) {
            const double b = spec.b(f, x);
            const double a = spec.a(f, x);
            const double ratio = (b * b + std::fabs(a)) / (1.0 + x * x);
            c_all = std::max(c_all, ratio);
            if (std::fabs(x) <= inner_cut) {
                c_inner = std::max(c_inner, ratio);
            }
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                worst_at = ConditionWitness{f, x, std::nullopt};
            }
        }
    }
    rep.estimated_constant = c_all;
    // The fitted constant must be scale-stable: if the outer samples need a
    // materially larger constant than the inner ones, the growth is
    // super-linear on this domain.
    if (worst_ratio > scale_slack * c_inner) {
        rep.pass = false;
        rep.witness = worst_at;
        std::ostringstream note;
        note << "constant fitted on |x| <= " << inner_cut << " is " << c_inner
             << " but the sample needs " << worst_ratio;
        rep.note = note.str();
    }
    return rep;
}

struct ModulusScan {
    double c_fit = 0.0;
    double c_small = 0.0;
    double c_large = 0.0;
    ConditionWitness small_at{};
    bool negative_a = false;
    ConditionWitness negative_at{};
};

// Measures difference quotients of x -> (b, sqrt(a)) at gaps h and scale*h
// from every anchor point.
ModulusScan scan_modulus(const ControlSpec& spec, const std::vector<double>& xs, double x_hi,
                         double h, int scale, bool include_drift, double holder_exponent) {
    ModulusScan scan;
    const double h_large = h * static_cast<double>(scale);
    for (double x : xs) {
        if (x + h_large > x_hi) continue;
        for (double f : spec.f_values()) {
            const double a0 = spec.a(f, x);
            if (a0 < 0.0 && !scan.negative_a) {
                scan.negative_a = true;
                scan.negative_at = ConditionWitness{f, x, std::nullopt};
            }
            for (int pass = 0; pass < 2; ++pass) {
                const double gap = (pass == 0) ? h : h_large;
                const double y = x + gap;
                const double a1 = spec.a(f, y);
                if (a1 < 0.0 && !scan.negative_a) {
                    scan.negative_a = true;
                    scan.negative_at = ConditionWitness{f, y, std::nullopt};
                }
                double diff = std::fabs(std::sqrt(std::max(a0, 0.0)) -
                                        std::sqrt(std::max(a1, 0.0)));
                if (include_drift) {
                    diff += std::fabs(spec.b(f, x) - spec.b(f, y));
                }
                const double q = diff / std::pow(gap, holder_exponent);
                scan.c_fit = std::max(scan.c_fit, q);
                if (pass == 0 && q > scan.c_small) {
                    scan.c_small = q;
                    scan.small_at = ConditionWitness{f, x, y};
                } else if (pass == 1) {
                    scan.c_large = std::max(scan.c_large, q);
                }
            }
        }
    }
    return scan;
}

ConditionReport report_from_modulus(const char* name, const ModulusScan& scan,
                                    double scale_slack) {
    ConditionReport rep;
    rep.name = name;
    rep.pass = true;
    rep.estimated_constant = scan.c_fit;
    if (scan.negative_a) {
        rep.pass = false;
        rep.witness = scan.negative_at;
        rep.note = "a < 0 at the witness sample; sqrt(a) undefined";
        return rep;
    }
    // Quotients of a function with the postulated modulus are stable across
    // gap scales; divergence at the smaller gap flags a rougher function.
    if (scan.c_small > scale_slack * scan.c_large) {
        rep.pass = false;
        rep.witness = scan.small_at;
        std::ostringstream note;
        note << "difference quotient " << scan.c_small << " at the fine gap exceeds "
             << scale_slack << " x " << scan.c_large << " at the coarse gap";
        rep.note = note.str();
    }
    return rep;
}

ConditionReport probe_ellipticity(const ControlSpec& spec, const std::vector<double>& xs) {
    ConditionReport rep;
    rep.name = "ellipticity";
    rep.pass = true;
    double a_min = std::numeric_limits<double>::infinity();
    ConditionWitness at{};
    for (double x : xs) {
        for (double f : spec.f_values()) {
            const double a = spec.a(f, x);
            if (a < a_min) {
                a_min = a;
                at = ConditionWitness{f, x, std::nullopt};
            }
        }
    }
    rep.estimated_constant = a_min;
    if (!(a_min > 0.0)) {
        rep.pass = false;
        rep.witness = at;
        rep.note = "a <= 0 at the witness sample";
    }
    return rep;
}

ConditionReport probe_continuity_in_control(const ControlSpec& spec,
                                            const std::vector<double>& xs) {
    ConditionReport rep;
    rep.name = "continuity_in_control";
    rep.pass = true;
    rep.note = "finite-sample modulus certificate";
    const std::vector<double>& fs = spec.f_values();
    double c = 0.0;
    for (double x : xs) {
        for (std::size_t k = 0; k + 1 < fs.size(); ++k) {
            const double df = fs[k + 1] - fs[k];
            if (df <= 0.0) continue;
            c = std::max(c, std::fabs(spec.a(fs[k + 1], x) - spec.a(fs[k], x)) / df);
        }
    }
    rep.estimated_constant = c;
    return rep;
}

ConditionReport probe_certain_volatility(const ControlSpec& spec, const std::vector<double>& xs) {
    ConditionReport rep;
    rep.name = "certain_volatility";
    rep.pass = true;
    double worst_spread = 0.0;
    for (double x : xs) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double f_hi = spec.f_values().front();
        double scale = 1.0;
        for (double f : spec.f_values()) {
            const double a = spec.a(f, x);
            lo = std::min(lo, a);
            if (a > hi) {
                hi = a;
                f_hi = f;
            }
            scale = std::max(scale, std::fabs(a));
        }
        const double spread = hi - lo;
        worst_spread = std::max(worst_spread, spread);
        if (rep.pass && spread > 1e-12 * scale) {
            rep.pass = false;
            rep.witness = ConditionWitness{f_hi, x, std::nullopt};
            rep.note = "a varies with f at the witness sample";
        }
    }
    rep.estimated_constant = worst_spread;
    return rep;
}

ConditionReport probe_zero_drift(const ControlSpec& spec, const std::vector<double>& xs) {
    ConditionReport rep;
    rep.name = "zero_drift";
    rep.pass = true;
    double worst = 0.0;
    for (double x : xs) {
        for (double f : spec.f_values()) {
            const double b = spec.b(f, x);
            worst = std::max(worst, std::fabs(b));
            if (rep.pass && b != 0.0) {
                rep.pass = false;
                rep.witness = ConditionWitness{f, x, std::nullopt};
                rep.note = "b != 0 at the witness sample";
            }
        }
    }
    rep.estimated_constant = worst;
    return rep;
}

} // namespace

std::vector<ConditionReport> check_conditions(const ControlSpec& spec, double x_lo, double x_hi,
                                              int n_samples, const CheckOptions& opts) {
    if (n_samples < 2) {
        throw InvalidArgument("check_conditions needs n_samples >= 2");
    }
    if (!(x_lo < x_hi)) {
        throw InvalidArgument("check_conditions needs x_lo < x_hi");
    }
    const std::vector<double> xs = equispaced(x_lo, x_hi, n_samples);
    const double h0 = (x_hi - x_lo) / (8.0 * static_cast<double>(n_samples));

    std::vector<ConditionReport> reports;
    reports.push_back(probe_convexity(spec, xs, opts.eps_cvx_rel));
    reports.push_back(probe_linear_growth(spec, xs, opts.scale_slack));
    reports.push_back(report_from_modulus(
        "lipschitz", scan_modulus(spec, xs, x_hi, h0, 4, /*include_drift=*/true, 1.0),
        opts.scale_slack));
    reports.push_back(report_from_modulus(
        "local_holder", scan_modulus(spec, xs, x_hi, h0, 16, /*include_drift=*/false, 0.5),
        opts.scale_slack));
    reports.push_back(probe_ellipticity(spec, xs));
    reports.push_back(probe_continuity_in_control(spec, xs));
    reports.push_back(probe_certain_volatility(spec, xs));
    reports.push_back(probe_zero_drift(spec, xs));

    const ConditionFlags& d = spec.declared();
    const bool flags[] = {d.convexity,   d.linear_growth,         d.lipschitz,
                          d.local_holder, d.ellipticity,           d.continuity_in_control,
                          d.certain_volatility, d.zero_drift};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        reports[i].declared = flags[i];
    }
    return reports;
}

} // namespace nldiff
