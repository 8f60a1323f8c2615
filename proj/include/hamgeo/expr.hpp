#pragma once

// Infix expression language for Hamiltonians and field functions.
//
//   expression = term { ("+" | "-") term } ;
//   term       = unary { ("*" | "/") unary } ;
//   unary      = "-" unary | power ;
//   power      = atom { "^" exponent } ;          (left-associative)
//   exponent   = ["-"] integer | "(" exponent ")" ;
//   atom       = number | identifier | function "(" expression ")"
//              | "(" expression ")" ;
//   function   = "sin" | "cos" | "exp" | "log" | "sqrt" ;
//
// Precedence, tightest first: ^  unary-  * /  + -.  All binary operators
// associate to the left.  Identifiers are the phase variables q1..qn and
// p1..pn plus any declared parameter names.  Exponents must be integer
// literals.

#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hamgeo/errors.hpp"
#include "hamgeo/jet.hpp"

namespace hamgeo {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Number, Var, Param, Add, Sub, Mul, Div, Neg, Pow, Call };

    Kind kind;
    double number = 0.0;   // Number
    int var = -1;          // Var: 0..n-1 -> q1..qn, n..2n-1 -> p1..pn
    std::string name;      // Param or Call
    int exponent = 0;      // Pow
    ExprPtr a, b;
};

inline bool operator==(const Expr& x, const Expr& y) {
    if (x.kind != y.kind) return false;
    switch (x.kind) {
        case Expr::Kind::Number: return x.number == y.number;
        case Expr::Kind::Var: return x.var == y.var;
        case Expr::Kind::Param: return x.name == y.name;
        case Expr::Kind::Neg: return *x.a == *y.a;
        case Expr::Kind::Pow: return x.exponent == y.exponent && *x.a == *y.a;
        case Expr::Kind::Call: return x.name == y.name && *x.a == *y.a;
        default: return *x.a == *y.a && *x.b == *y.b;
    }
}

namespace detail {

struct Token {
    enum class Type { Number, Ident, Op, End };
    Type type;
    double number = 0.0;
    std::string text;
    char op = 0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= src_.size()) {
            tok_.type = Token::Type::End;
            return;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t end = pos_;
            while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
            if (end < src_.size() && src_[end] == '.') {
                ++end;
                while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
            }
            if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
                size_t e = end + 1;
                if (e < src_.size() && (src_[e] == '+' || src_[e] == '-')) ++e;
                if (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) {
                    while (e < src_.size() && std::isdigit(static_cast<unsigned char>(src_[e]))) ++e;
                    end = e;
                }
            }
            tok_.type = Token::Type::Number;
            tok_.text = std::string(src_.substr(pos_, end - pos_));
            tok_.number = std::strtod(tok_.text.c_str(), nullptr);
            col_ += static_cast<int>(end - pos_);
            pos_ = end;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t end = pos_;
            while (end < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
                ++end;
            tok_.type = Token::Type::Ident;
            tok_.text = std::string(src_.substr(pos_, end - pos_));
            col_ += static_cast<int>(end - pos_);
            pos_ = end;
            return;
        }
        if (std::string_view("+-*/^()").find(c) != std::string_view::npos) {
            tok_.type = Token::Type::Op;
            tok_.op = c;
            ++col_;
            ++pos_;
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }

    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

inline bool is_function_name(const std::string& s) {
    return s == "sin" || s == "cos" || s == "exp" || s == "log" || s == "sqrt";
}

/// q<k> / p<k> identifiers; returns variable slot or nullopt.
inline std::optional<int> phase_var_slot(const std::string& s, int n) {
    if (s.size() < 2 || (s[0] != 'q' && s[0] != 'p')) return std::nullopt;
    int k = 0;
    auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), k);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    if (k < 1 || k > n) return std::nullopt;
    return (s[0] == 'q') ? (k - 1) : (n + k - 1);
}

inline bool looks_like_phase_var(const std::string& s) {
    if (s.size() < 2 || (s[0] != 'q' && s[0] != 'p')) return false;
    for (size_t i = 1; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

class Parser {
public:
    Parser(std::string_view src, int n, const std::vector<std::string>& params)
        : lex_(src), n_(n), params_(params) {}

    ExprPtr parse() {
        ExprPtr e = expression();
        const auto& t = lex_.peek();
        if (t.type != Token::Type::End)
            throw ParseError("unexpected trailing input", t.line, t.col);
        return e;
    }

private:
    static ExprPtr node(Expr e) { return std::make_shared<Expr>(std::move(e)); }

    ExprPtr expression() {
        ExprPtr e = term();
        while (lex_.peek().type == Token::Type::Op &&
               (lex_.peek().op == '+' || lex_.peek().op == '-')) {
            const char op = lex_.take().op;
            ExprPtr rhs = term();
            Expr out;
            out.kind = (op == '+') ? Expr::Kind::Add : Expr::Kind::Sub;
            out.a = e;
            out.b = rhs;
            e = node(std::move(out));
        }
        return e;
    }

    ExprPtr term() {
        ExprPtr e = unary();
        while (lex_.peek().type == Token::Type::Op &&
               (lex_.peek().op == '*' || lex_.peek().op == '/')) {
            const char op = lex_.take().op;
            ExprPtr rhs = unary();
            Expr out;
            out.kind = (op == '*') ? Expr::Kind::Mul : Expr::Kind::Div;
            out.a = e;
            out.b = rhs;
            e = node(std::move(out));
        }
        return e;
    }

    ExprPtr unary() {
        if (lex_.peek().type == Token::Type::Op && lex_.peek().op == '-') {
            lex_.take();
            Expr out;
            out.kind = Expr::Kind::Neg;
            out.a = unary();
            return node(std::move(out));
        }
        return power();
    }

    ExprPtr power() {
        ExprPtr e = atom();
        while (lex_.peek().type == Token::Type::Op && lex_.peek().op == '^') {
            lex_.take();
            const int exp = exponent();
            Expr out;
            out.kind = Expr::Kind::Pow;
            out.a = e;
            out.exponent = exp;
            e = node(std::move(out));
        }
        return e;
    }

    int exponent() {
        const Token& t = lex_.peek();
        if (t.type == Token::Type::Op && t.op == '(') {
            lex_.take();
            const int v = exponent();
            expect_close();
            return v;
        }
        if (t.type == Token::Type::Op && t.op == '-') {
            lex_.take();
            return -exponent_literal();
        }
        return exponent_literal();
    }

    int exponent_literal() {
        const Token t = lex_.take();
        if (t.type != Token::Type::Number)
            throw ParseError("exponent must be an integer literal", t.line, t.col);
        const double v = t.number;
        const int iv = static_cast<int>(v);
        if (static_cast<double>(iv) != v)
            throw ParseError("non-integer exponent '" + t.text + "'", t.line, t.col);
        return iv;
    }

    void expect_close() {
        const Token t = lex_.take();
        if (t.type != Token::Type::Op || t.op != ')')
            throw ParseError("expected ')'", t.line, t.col);
    }

    ExprPtr atom() {
        const Token t = lex_.take();
        if (t.type == Token::Type::Number) {
            Expr out;
            out.kind = Expr::Kind::Number;
            out.number = t.number;
            return node(std::move(out));
        }
        if (t.type == Token::Type::Ident) {
            if (is_function_name(t.text)) {
                const Token open = lex_.take();
                if (open.type != Token::Type::Op || open.op != '(')
                    throw ParseError("expected '(' after function '" + t.text + "'", open.line, open.col);
                Expr out;
                out.kind = Expr::Kind::Call;
                out.name = t.text;
                out.a = expression();
                expect_close();
                return node(std::move(out));
            }
            if (auto slot = phase_var_slot(t.text, n_)) {
                Expr out;
                out.kind = Expr::Kind::Var;
                out.var = *slot;
                out.name = t.text;
                return node(std::move(out));
            }
            if (looks_like_phase_var(t.text))
                throw ParseError("phase variable '" + t.text + "' out of range for n=" +
                                     std::to_string(n_),
                                 t.line, t.col);
            for (const auto& p : params_)
                if (p == t.text) {
                    Expr out;
                    out.kind = Expr::Kind::Param;
                    out.name = t.text;
                    return node(std::move(out));
                }
            throw ParseError("unknown identifier '" + t.text + "'", t.line, t.col);
        }
        if (t.type == Token::Type::Op && t.op == '(') {
            ExprPtr e = expression();
            expect_close();
            return e;
        }
        throw ParseError("expected a value", t.line, t.col);
    }

    Lexer lex_;
    int n_;
    std::vector<std::string> params_;
};

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace detail

/// Parse an expression over q1..qn, p1..pn and the given parameter names.
inline ExprPtr parse_expression(std::string_view source, int n,
                                const std::vector<std::string>& params = {}) {
    return detail::Parser(source, n, params).parse();
}

/// Evaluate over arbitrary jets; vars[k] supplies q_{k+1} for k<n and
/// p_{k-n+1} for k>=n.  Parameter values are looked up by name.
inline Jet eval_expression(const ExprPtr& e, std::span<const Jet> vars,
                           const std::map<std::string, double>& params) {
    switch (e->kind) {
        case Expr::Kind::Number:
            return Jet::constant(vars[0].nvars(), vars[0].order(), e->number);
        case Expr::Kind::Var:
            if (e->var < 0 || e->var >= static_cast<int>(vars.size()))
                throw InvalidArgument("expression variable slot out of range");
            return vars[e->var];
        case Expr::Kind::Param: {
            auto it = params.find(e->name);
            if (it == params.end())
                throw InvalidArgument("unbound parameter '" + e->name + "'");
            return Jet::constant(vars[0].nvars(), vars[0].order(), it->second);
        }
        case Expr::Kind::Add:
            return eval_expression(e->a, vars, params) + eval_expression(e->b, vars, params);
        case Expr::Kind::Sub:
            return eval_expression(e->a, vars, params) - eval_expression(e->b, vars, params);
        case Expr::Kind::Mul:
            return eval_expression(e->a, vars, params) * eval_expression(e->b, vars, params);
        case Expr::Kind::Div:
            return eval_expression(e->a, vars, params) / eval_expression(e->b, vars, params);
        case Expr::Kind::Neg:
            return -eval_expression(e->a, vars, params);
        case Expr::Kind::Pow:
            return pow_int(eval_expression(e->a, vars, params), e->exponent);
        case Expr::Kind::Call: {
            Jet arg = eval_expression(e->a, vars, params);
            if (e->name == "sin") return sin(arg);
            if (e->name == "cos") return cos(arg);
            if (e->name == "exp") return exp(arg);
            if (e->name == "log") return log(arg);
            if (e->name == "sqrt") return sqrt(arg);
            throw InvalidArgument("unknown function '" + e->name + "'");
        }
    }
    throw InvalidArgument("corrupt expression node");
}

namespace detail {

inline int precedence_of(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::Add:
        case Expr::Kind::Sub: return 1;
        case Expr::Kind::Mul:
        case Expr::Kind::Div: return 2;
        case Expr::Kind::Neg: return 3;
        case Expr::Kind::Pow: return 4;
        default: return 5;
    }
}

inline void unparse_rec(const Expr& e, int n, std::string& out) {
    auto wrapped = [&](const Expr& child, bool parens) {
        if (parens) out += '(';
        unparse_rec(child, n, out);
        if (parens) out += ')';
    };
    const int prec = precedence_of(e);
    switch (e.kind) {
        case Expr::Kind::Number:
            out += format_double(e.number);
            return;
        case Expr::Kind::Var:
            out += (e.var < n) ? 'q' : 'p';
            out += std::to_string(e.var < n ? e.var + 1 : e.var - n + 1);
            return;
        case Expr::Kind::Param:
            out += e.name;
            return;
        case Expr::Kind::Add:
        case Expr::Kind::Sub:
            wrapped(*e.a, precedence_of(*e.a) < prec);
            out += (e.kind == Expr::Kind::Add) ? " + " : " - ";
            wrapped(*e.b, precedence_of(*e.b) <= prec); // right side of - needs parens at equal level
            return;
        case Expr::Kind::Mul:
        case Expr::Kind::Div:
            wrapped(*e.a, precedence_of(*e.a) < prec);
            out += (e.kind == Expr::Kind::Mul) ? "*" : "/";
            wrapped(*e.b, precedence_of(*e.b) <= prec);
            return;
        case Expr::Kind::Neg:
            out += '-';
            wrapped(*e.a, precedence_of(*e.a) < prec);
            return;
        case Expr::Kind::Pow:
            wrapped(*e.a, precedence_of(*e.a) <= 4); // base must be an atom or parenthesized
            out += '^';
            if (e.exponent < 0) {
                out += '-';
                out += std::to_string(-e.exponent);
            } else {
                out += std::to_string(e.exponent);
            }
            return;
        case Expr::Kind::Call:
            out += e.name;
            out += '(';
            unparse_rec(*e.a, n, out);
            out += ')';
            return;
    }
}

} // namespace detail

/// Render to canonical source text; parsing the result reproduces the tree.
inline std::string unparse_expression(const ExprPtr& e, int n) {
    std::string out;
    detail::unparse_rec(*e, n, out);
    return out;
}

} // namespace hamgeo
