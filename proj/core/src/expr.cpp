#include "nldiff/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "nldiff/errors.hpp"

namespace nldiff {

namespace {

enum class NodeKind : std::uint8_t { number, var_f, var_x, neg, add, sub, mul, div, pow, call };

enum class Func : std::uint8_t { sin, cos, exp, sqrt, abs, min, max };

const char* func_name(Func fn) {
    switch (fn) {
        case Func::sin: return "sin";
        case Func::cos: return "cos";
        case Func::exp: return "exp";
        case Func::sqrt: return "sqrt";
        case Func::abs: return "abs";
        case Func::min: return "min";
        case Func::max: return "max";
    }
    return "?";
}

} // namespace

struct Expr::Node {
    NodeKind kind;
    double number = 0.0;
    Func func = Func::sin;
    std::shared_ptr<const Node> lhs; // unary operand / first argument
    std::shared_ptr<const Node> rhs; // second operand, may be null
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_number(double v) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = NodeKind::number;
    n->number = v;
    return n;
}

NodePtr make_var(bool is_f) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = is_f ? NodeKind::var_f : NodeKind::var_x;
    return n;
}

NodePtr make_unary(NodeKind k, NodePtr child) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->lhs = std::move(child);
    return n;
}

NodePtr make_binary(NodeKind k, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = k;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

NodePtr make_call(Func fn, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Expr::Node>();
    n->kind = NodeKind::call;
    n->func = fn;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

struct Token {
    enum class Kind : std::uint8_t {
        number,
        ident,
        plus,
        minus,
        star,
        slash,
        caret,
        lparen,
        rparen,
        comma,
        end,
    };
    Kind kind = Kind::end;
    double number = 0.0;
    std::string ident;
    std::size_t offset = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    const Token& peek() const { return current_; }

    Token take() {
        Token t = current_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
        current_ = Token{};
        current_.offset = pos_;
        if (pos_ >= text_.size()) {
            current_.kind = Token::Kind::end;
            return;
        }
        const char c = text_[pos_];
        switch (c) {
            case '+': current_.kind = Token::Kind::plus; ++pos_; return;
            case '-': current_.kind = Token::Kind::minus; ++pos_; return;
            case '*': current_.kind = Token::Kind::star; ++pos_; return;
            case '/': current_.kind = Token::Kind::slash; ++pos_; return;
            case '^': current_.kind = Token::Kind::caret; ++pos_; return;
            case '(': current_.kind = Token::Kind::lparen; ++pos_; return;
            case ')': current_.kind = Token::Kind::rparen; ++pos_; return;
            case ',': current_.kind = Token::Kind::comma; ++pos_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            current_.kind = Token::Kind::ident;
            current_.ident = std::string(text_.substr(start, pos_ - start));
            return;
        }
        throw SyntaxError(pos_, "number, identifier, '(', or operator",
                          "syntax error at offset " + std::to_string(pos_) +
                              ": unexpected character '" + std::string(1, c) + "'");
    }

    void lex_number() {
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{} || ptr == begin) {
            throw SyntaxError(pos_, "number",
                              "syntax error at offset " + std::to_string(pos_) +
                                  ": malformed number literal");
        }
        current_.kind = Token::Kind::number;
        current_.number = value;
        pos_ += static_cast<std::size_t>(ptr - begin);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    Token current_;
};

// ---------------------------------------------------------------------------
// Parser (precedence climbing; '^' right-associative above unary minus)
// ---------------------------------------------------------------------------

class Parser {
public:
    explicit Parser(std::string_view text) : lexer_(text) {}

    NodePtr parse() {
        NodePtr e = parse_sum();
        const Token& t = lexer_.peek();
        if (t.kind != Token::Kind::end) {
            fail(t, "operator or end of input");
        }
        return e;
    }

private:
    static constexpr int kMaxDepth = 256;

    [[noreturn]] static void fail(const Token& t, const std::string& expected) {
        throw SyntaxError(t.offset, expected,
                          "syntax error at offset " + std::to_string(t.offset) + ": expected " +
                              expected);
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& parser) : parser_(parser) {
            if (++parser_.depth_ > kMaxDepth) {
                throw SyntaxError(parser_.lexer_.peek().offset, "shallower nesting",
                                  "expression nests deeper than " +
                                      std::to_string(kMaxDepth) + " levels");
            }
        }
        ~DepthGuard() { --parser_.depth_; }
        Parser& parser_;
    };

    NodePtr parse_sum() {
        DepthGuard guard(*this);
        NodePtr lhs = parse_product();
        for (;;) {
            const Token::Kind k = lexer_.peek().kind;
            if (k == Token::Kind::plus || k == Token::Kind::minus) {
                lexer_.take();
                NodePtr rhs = parse_product();
                lhs = make_binary(k == Token::Kind::plus ? NodeKind::add : NodeKind::sub,
                                  std::move(lhs), std::move(rhs));
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            const Token::Kind k = lexer_.peek().kind;
            if (k == Token::Kind::star || k == Token::Kind::slash) {
                lexer_.take();
                NodePtr rhs = parse_unary();
                lhs = make_binary(k == Token::Kind::star ? NodeKind::mul : NodeKind::div,
                                  std::move(lhs), std::move(rhs));
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        DepthGuard guard(*this);
        if (lexer_.peek().kind == Token::Kind::minus) {
            lexer_.take();
            return make_unary(NodeKind::neg, parse_unary());
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (lexer_.peek().kind == Token::Kind::caret) {
            lexer_.take();
            // The exponent re-enters at unary level, giving right
            // associativity and allowing f^-2.
            NodePtr exponent = parse_unary();
            return make_binary(NodeKind::pow, std::move(base), std::move(exponent));
        }
        return base;
    }

    NodePtr parse_primary() {
        Token t = lexer_.take();
        switch (t.kind) {
            case Token::Kind::number:
                return make_number(t.number);
            case Token::Kind::lparen: {
                NodePtr inner = parse_sum();
                expect(Token::Kind::rparen, "')'");
                return inner;
            }
            case Token::Kind::ident:
                return parse_ident(t);
            default:
                fail(t, "number, identifier or '('");
        }
    }

    NodePtr parse_ident(const Token& t) {
        if (lexer_.peek().kind == Token::Kind::lparen) {
            Func fn;
            if (t.ident == "sin") fn = Func::sin;
            else if (t.ident == "cos") fn = Func::cos;
            else if (t.ident == "exp") fn = Func::exp;
            else if (t.ident == "sqrt") fn = Func::sqrt;
            else if (t.ident == "abs") fn = Func::abs;
            else if (t.ident == "min") fn = Func::min;
            else if (t.ident == "max") fn = Func::max;
            else {
                throw UnknownIdentifier(t.offset, t.ident,
                                        "unknown function '" + t.ident + "' at offset " +
                                            std::to_string(t.offset));
            }
            lexer_.take(); // '('
            NodePtr first = parse_sum();
            NodePtr second;
            if (lexer_.peek().kind == Token::Kind::comma) {
                lexer_.take();
                second = parse_sum();
            }
            expect(Token::Kind::rparen, "')' or ','");
            const bool two_arg_allowed = (fn == Func::min || fn == Func::max);
            if (second && !two_arg_allowed) {
                throw SyntaxError(t.offset, "single argument",
                                  "function '" + std::string(func_name(fn)) +
                                      "' takes exactly one argument (offset " +
                                      std::to_string(t.offset) + ")");
            }
            return make_call(fn, std::move(first), std::move(second));
        }
        if (t.ident == "f") return make_var(true);
        if (t.ident == "x") return make_var(false);
        throw UnknownIdentifier(t.offset, t.ident,
                                "unknown identifier '" + t.ident + "' at offset " +
                                    std::to_string(t.offset) + " (variables are f and x)");
    }

    void expect(Token::Kind kind, const std::string& what) {
        const Token& t = lexer_.peek();
        if (t.kind != kind) {
            fail(t, what);
        }
        lexer_.take();
    }

    Lexer lexer_;
    int depth_ = 0;
};

// ---------------------------------------------------------------------------
// Compilation to a flat postfix program
// ---------------------------------------------------------------------------

void compile_node(const Expr::Node& node, std::vector<ExprInstr>& out) {
    switch (node.kind) {
        case NodeKind::number:
            out.push_back({ExprOp::push_const, node.number});
            return;
        case NodeKind::var_f:
            out.push_back({ExprOp::push_f});
            return;
        case NodeKind::var_x:
            out.push_back({ExprOp::push_x});
            return;
        case NodeKind::neg:
            compile_node(*node.lhs, out);
            out.push_back({ExprOp::neg});
            return;
        case NodeKind::add:
        case NodeKind::sub:
        case NodeKind::mul:
        case NodeKind::div:
        case NodeKind::pow: {
            compile_node(*node.lhs, out);
            compile_node(*node.rhs, out);
            ExprOp op = ExprOp::add;
            if (node.kind == NodeKind::sub) op = ExprOp::sub;
            else if (node.kind == NodeKind::mul) op = ExprOp::mul;
            else if (node.kind == NodeKind::div) op = ExprOp::div;
            else if (node.kind == NodeKind::pow) op = ExprOp::pow;
            out.push_back({op});
            return;
        }
        case NodeKind::call: {
            compile_node(*node.lhs, out);
            if (node.rhs) compile_node(*node.rhs, out);
            switch (node.func) {
                case Func::sin: out.push_back({ExprOp::sin}); break;
                case Func::cos: out.push_back({ExprOp::cos}); break;
                case Func::exp: out.push_back({ExprOp::exp}); break;
                case Func::sqrt: out.push_back({ExprOp::sqrt}); break;
                case Func::abs: out.push_back({ExprOp::abs}); break;
                case Func::min:
                    if (node.rhs) out.push_back({ExprOp::min});
                    break;
                case Func::max:
                    if (node.rhs) out.push_back({ExprOp::max});
                    break;
            }
            return;
        }
    }
}

std::size_t program_stack_depth(const std::vector<ExprInstr>& program) {
    std::size_t depth = 0, max_depth = 0;
    for (const ExprInstr& ins : program) {
        switch (ins.op) {
            case ExprOp::push_const:
            case ExprOp::push_f:
            case ExprOp::push_x:
                ++depth;
                max_depth = std::max(max_depth, depth);
                break;
            case ExprOp::add:
            case ExprOp::sub:
            case ExprOp::mul:
            case ExprOp::div:
            case ExprOp::pow:
            case ExprOp::min:
            case ExprOp::max:
                --depth;
                break;
            default:
                break; // unary ops keep depth
        }
    }
    return max_depth;
}

void scan_vars(const Expr::Node& node, bool& uses_f, bool& uses_x) {
    switch (node.kind) {
        case NodeKind::var_f: uses_f = true; return;
        case NodeKind::var_x: uses_x = true; return;
        default: break;
    }
    if (node.lhs) scan_vars(*node.lhs, uses_f, uses_x);
    if (node.rhs) scan_vars(*node.rhs, uses_f, uses_x);
}

const char* op_label(ExprOp op) {
    switch (op) {
        case ExprOp::add: return "+";
        case ExprOp::sub: return "-";
        case ExprOp::mul: return "*";
        case ExprOp::div: return "/";
        case ExprOp::pow: return "^";
        case ExprOp::neg: return "negation";
        case ExprOp::sin: return "sin";
        case ExprOp::cos: return "cos";
        case ExprOp::exp: return "exp";
        case ExprOp::sqrt: return "sqrt";
        case ExprOp::abs: return "abs";
        case ExprOp::min: return "min";
        case ExprOp::max: return "max";
        default: return "push";
    }
}

[[noreturn]] void throw_eval_error(ExprOp op, double f, double x) {
    std::ostringstream msg;
    msg << "expression produced a non-finite value in '" << op_label(op) << "' at f=" << f
        << ", x=" << x;
    throw EvalError(msg.str());
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

std::string format_number(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

// Precedence levels used by the printer: sum 1, product 2, unary 3, power 4,
// atom 5. A child is parenthesized when its level is below the level its
// position requires.
int node_level(const Expr::Node& n) {
    switch (n.kind) {
        case NodeKind::add:
        case NodeKind::sub: return 1;
        case NodeKind::mul:
        case NodeKind::div: return 2;
        case NodeKind::neg: return 3;
        case NodeKind::pow: return 4;
        default: return 5;
    }
}

void print_node(const Expr::Node& n, int min_level, std::string& out) {
    const int level = node_level(n);
    const bool parens = level < min_level;
    if (parens) out += '(';
    switch (n.kind) {
        case NodeKind::number:
            out += format_number(n.number);
            break;
        case NodeKind::var_f:
            out += 'f';
            break;
        case NodeKind::var_x:
            out += 'x';
            break;
        case NodeKind::add:
        case NodeKind::sub:
            print_node(*n.lhs, 1, out);
            out += (n.kind == NodeKind::add) ? " + " : " - ";
            print_node(*n.rhs, 2, out);
            break;
        case NodeKind::mul:
        case NodeKind::div:
            print_node(*n.lhs, 2, out);
            out += (n.kind == NodeKind::mul) ? "*" : "/";
            print_node(*n.rhs, 3, out);
            break;
        case NodeKind::neg:
            out += '-';
            print_node(*n.lhs, 3, out);
            break;
        case NodeKind::pow:
            print_node(*n.lhs, 5, out);
            out += '^';
            print_node(*n.rhs, 3, out);
            break;
        case NodeKind::call:
            out += func_name(n.func);
            out += '(';
            print_node(*n.lhs, 0, out);
            if (n.rhs) {
                out += ", ";
                print_node(*n.rhs, 0, out);
            }
            out += ')';
            break;
    }
    if (parens) out += ')';
}

bool nodes_equal(const Expr::Node& a, const Expr::Node& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == NodeKind::number) return a.number == b.number;
    if (a.kind == NodeKind::call && a.func != b.func) return false;
    if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
    if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
    if (a.lhs && !nodes_equal(*a.lhs, *b.lhs)) return false;
    if (a.rhs && !nodes_equal(*a.rhs, *b.rhs)) return false;
    return true;
}

} // namespace

Expr::Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {
    compile_node(*root_, program_);
    stack_depth_ = program_stack_depth(program_);
    scan_vars(*root_, uses_f_, uses_x_);
}

Expr Expr::parse(std::string_view text) {
    Parser parser(text);
    return Expr(parser.parse());
}

namespace {

double run_program_on(const std::vector<ExprInstr>& program, double* st, double f, double x) {
    std::size_t sp = 0;
    for (const ExprInstr& ins : program) {
        switch (ins.op) {
            case ExprOp::push_const: st[sp++] = ins.value; break;
            case ExprOp::push_f: st[sp++] = f; break;
            case ExprOp::push_x: st[sp++] = x; break;
            case ExprOp::neg: st[sp - 1] = -st[sp - 1]; break;
            case ExprOp::add:
                --sp;
                st[sp - 1] += st[sp];
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::sub:
                --sp;
                st[sp - 1] -= st[sp];
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::mul:
                --sp;
                st[sp - 1] *= st[sp];
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::div:
                --sp;
                st[sp - 1] /= st[sp];
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::pow:
                --sp;
                st[sp - 1] = std::pow(st[sp - 1], st[sp]);
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
            case ExprOp::cos: st[sp - 1] = std::cos(st[sp - 1]); break;
            case ExprOp::exp:
                st[sp - 1] = std::exp(st[sp - 1]);
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::sqrt:
                st[sp - 1] = std::sqrt(st[sp - 1]);
                if (!std::isfinite(st[sp - 1])) throw_eval_error(ins.op, f, x);
                break;
            case ExprOp::abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
            case ExprOp::min:
                --sp;
                st[sp - 1] = std::min(st[sp - 1], st[sp]);
                break;
            case ExprOp::max:
                --sp;
                st[sp - 1] = std::max(st[sp - 1], st[sp]);
                break;
        }
    }
    return st[0];
}

} // namespace

double run_expr_program(const std::vector<ExprInstr>& program, std::size_t stack_depth,
                        double f, double x) {
    constexpr std::size_t kInlineDepth = 32;
    if (stack_depth > kInlineDepth) {
        std::vector<double> heap_stack(stack_depth);
        return run_program_on(program, heap_stack.data(), f, x);
    }
    double stack[kInlineDepth];
    return run_program_on(program, stack, f, x);
}

double Expr::eval(double f, double x) const {
    return run_expr_program(program_, stack_depth_, f, x);
}

std::string Expr::str() const {
    std::string out;
    print_node(*root_, 0, out);
    return out;
}

bool Expr::same_structure(const Expr& other) const {
    return nodes_equal(*root_, *other.root_);
}

} // namespace nldiff
