#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nldiff {

/// Base class for all library errors. `kind()` is a stable snake_case
/// identifier suitable for machine-parsable diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed expression text. Carries the byte offset of the failure and the
/// set of tokens that would have been accepted there.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, std::string expected, const std::string& message)
        : Error("syntax_error", message), offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

/// Identifier that is neither a known variable (f, x) nor a known function.
class UnknownIdentifier : public Error {
public:
    UnknownIdentifier(std::size_t offset, std::string name, const std::string& message)
        : Error("unknown_identifier", message), offset_(offset), name_(std::move(name)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& name() const noexcept { return name_; }

private:
    std::size_t offset_;
    std::string name_;
};

/// Expression evaluation produced NaN or +-inf.
class EvalError : public Error {
public:
    explicit EvalError(const std::string& message) : Error("eval_error", message) {}
};

/// A fixed time step violates the monotonicity bound of the explicit scheme.
class UnstableStep : public Error {
public:
    explicit UnstableStep(const std::string& message) : Error("unstable_step", message) {}
};

/// A sweep update produced NaN or +-inf.
class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& message) : Error("non_finite", message) {}
};

/// The diffusion coefficient went negative along a simulated path.
class NegativeVariance : public Error {
public:
    NegativeVariance(double f, double x, const std::string& message)
        : Error("negative_variance", message), f_(f), x_(x) {}

    double control() const noexcept { return f_; }
    double state() const noexcept { return x_; }

private:
    double f_;
    double x_;
};

/// A field does not live on the lattice implied by the given grid.
class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& message) : Error("grid_mismatch", message) {}
};

/// A theorem check was requested outside its declared hypotheses.
class HypothesisViolated : public Error {
public:
    explicit HypothesisViolated(const std::string& message)
        : Error("hypothesis_violated", message) {}
};

/// Bad configuration file (schema violation, unknown key, missing field).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

/// Violated call precondition (e.g. zero paths, too few samples).
class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& message) : Error("invalid_argument", message) {}
};

} // namespace nldiff
