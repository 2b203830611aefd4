#pragma once

#include <cstddef>
#include <span>

#include "nldiff/control_model.hpp"

namespace nldiff {

/// Nonlinear generator value at state x for derivative pair (p, q):
///
///     G(x, p, q) = max over f in F of  b(f,x) p + (1/2) a(f,x) q.
///
/// Sublinear in (p, q): positively homogeneous and subadditive; monotone in
/// q whenever a >= 0.
double evaluate_G(const ControlSpec& spec, double x, double p, double q);

/// The control attaining evaluate_G. Ties are broken by the smallest index
/// in f_values, so selections are deterministic and reproducible.
double argmax_control(const ControlSpec& spec, double x, double p, double q);

/// Shared kernel: index of the maximizing candidate among per-control
/// coefficient pairs, strict-improvement scan (lowest index wins ties).
std::size_t argmax_candidate_index(std::span<const double> b, std::span<const double> a, double p,
                                   double q);

} // namespace nldiff
