#include "nldiff/g_operator.hpp"

#include <vector>

namespace nldiff {

std::size_t argmax_candidate_index(std::span<const double> b, std::span<const double> a, double p,
                                   double q) {
    std::size_t best = 0;
    double best_value = b[0] * p + 0.5 * a[0] * q;
    for (std::size_t k = 1; k < b.size(); ++k) {
        const double value = b[k] * p + 0.5 * a[k] * q;
        if (value > best_value) {
            best_value = value;
            best = k;
        }
    }
    return best;
}

namespace {

struct Candidates {
    std::vector<double> b;
    std::vector<double> a;
};

Candidates eval_candidates(const ControlSpec& spec, double x) {
    Candidates c;
    c.b.reserve(spec.f_values().size());
    c.a.reserve(spec.f_values().size());
    for (double f : spec.f_values()) {
        c.b.push_back(spec.b(f, x));
        c.a.push_back(spec.a(f, x));
    }
    return c;
}

} // namespace

double evaluate_G(const ControlSpec& spec, double x, double p, double q) {
    const Candidates c = eval_candidates(spec, x);
    const std::size_t k = argmax_candidate_index(c.b, c.a, p, q);
    return c.b[k] * p + 0.5 * c.a[k] * q;
}

double argmax_control(const ControlSpec& spec, double x, double p, double q) {
    const Candidates c = eval_candidates(spec, x);
    return spec.f_values()[argmax_candidate_index(c.b, c.a, p, q)];
}

} // namespace nldiff
