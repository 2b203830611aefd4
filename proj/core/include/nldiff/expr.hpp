#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace nldiff {

/// Instruction set of the flat evaluator a parsed expression compiles to.
enum class ExprOp : std::uint8_t {
    push_const,
    push_f,
    push_x,
    neg,
    add,
    sub,
    mul,
    div,
    pow,
    sin,
    cos,
    exp,
    sqrt,
    abs,
    min,
    max,
};

struct ExprInstr {
    ExprOp op;
    double value = 0.0; // payload of push_const
};

/// Immutable arithmetic expression in the variables `f` (control) and `x`
/// (state).
///
/// Grammar: numbers, `f`, `x`, unary `-`, binary `+ - * / ^`, and calls of
/// sin, cos, exp, sqrt, abs (one argument) and min, max (one or two
/// arguments). `^` is right-associative and binds tighter than unary minus;
/// then unary minus, then `*` `/`, then `+` `-`.
///
/// Evaluation is plain IEEE-754 double arithmetic; any intermediate NaN or
/// infinity raises EvalError. Expressions are immutable after parse and safe
/// to evaluate concurrently from many threads.
class Expr {
public:
    struct Node;

    /// Parses `text`. Throws SyntaxError (with byte offset and expected-token
    /// set) or UnknownIdentifier.
    static Expr parse(std::string_view text);

    /// Evaluates at (f, x). Pure: identical inputs give bit-identical
    /// results. Throws EvalError on a non-finite intermediate or result.
    double eval(double f, double x) const;

    /// Round-trippable text form: `parse(str())` yields a structurally
    /// identical tree.
    std::string str() const;

    bool same_structure(const Expr& other) const;

    bool depends_on_f() const noexcept { return uses_f_; }
    bool depends_on_x() const noexcept { return uses_x_; }

    /// Flat program, for hot loops that want to skip the shared_ptr hop.
    const std::vector<ExprInstr>& program() const noexcept { return program_; }
    std::size_t stack_depth() const noexcept { return stack_depth_; }

private:
    explicit Expr(std::shared_ptr<const Node> root);

    std::shared_ptr<const Node> root_;
    std::vector<ExprInstr> program_;
    std::size_t stack_depth_ = 0;
    bool uses_f_ = false;
    bool uses_x_ = false;
};

/// Runs a compiled expression program. Exposed separately so callers can
/// evaluate tables without constructing Expr values in inner loops.
double run_expr_program(const std::vector<ExprInstr>& program, std::size_t stack_depth,
                        double f, double x);

} // namespace nldiff
