#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hamgeo/expr.hpp"

using namespace hamgeo;

namespace {

Jet jet_const(double v) { return Jet::constant(2, 2, v); }

double eval_value(const std::string& src, int n, std::vector<double> qp,
                  std::map<std::string, double> params = {}) {
    std::vector<std::string> names;
    for (const auto& [k, v] : params) names.push_back(k);
    ExprPtr e = parse_expression(src, n, names);
    std::vector<Jet> vars;
    for (double v : qp) vars.push_back(Jet::constant(1, 0, v));
    return eval_expression(e, vars, params).value();
}

// random parser-producible AST for round-trip checks
ExprPtr random_expr(std::mt19937& rng, int n, int depth) {
    std::uniform_int_distribution<int> kind(0, depth <= 0 ? 2 : 9);
    std::uniform_real_distribution<double> num(0.0, 9.5);
    std::uniform_int_distribution<int> var(0, 2 * n - 1);
    std::uniform_int_distribution<int> expo(-3, 3);
    std::uniform_int_distribution<int> fn(0, 4);
    static const char* fns[] = {"sin", "cos", "exp", "log", "sqrt"};
    auto mk = [](Expr e) { return std::make_shared<Expr>(std::move(e)); };
    Expr e;
    switch (kind(rng)) {
        case 0: e.kind = Expr::Kind::Number; e.number = num(rng); return mk(std::move(e));
        case 1: e.kind = Expr::Kind::Var; e.var = var(rng); return mk(std::move(e));
        case 2: e.kind = Expr::Kind::Param; e.name = "w"; return mk(std::move(e));
        case 3: e.kind = Expr::Kind::Add; break;
        case 4: e.kind = Expr::Kind::Sub; break;
        case 5: e.kind = Expr::Kind::Mul; break;
        case 6: e.kind = Expr::Kind::Div; break;
        case 7: e.kind = Expr::Kind::Neg;
            e.a = random_expr(rng, n, depth - 1);
            return mk(std::move(e));
        case 8:
            e.kind = Expr::Kind::Pow;
            e.a = random_expr(rng, n, depth - 1);
            e.exponent = expo(rng);
            return mk(std::move(e));
        case 9:
            e.kind = Expr::Kind::Call;
            e.name = fns[fn(rng)];
            e.a = random_expr(rng, n, depth - 1);
            return mk(std::move(e));
    }
    e.a = random_expr(rng, n, depth - 1);
    e.b = random_expr(rng, n, depth - 1);
    return mk(std::move(e));
}

} // namespace

TEST_CASE("operator precedence") {
    CHECK(eval_value("q1 + p1*q1^2", 1, {2.0, 3.0}) == Catch::Approx(14.0));
    CHECK(eval_value("-q1^2", 1, {2.0, 0.0}) == Catch::Approx(-4.0));
    CHECK(eval_value("2^3^2", 1, {0.0, 0.0}) == Catch::Approx(64.0)); // left-assoc
    CHECK(eval_value("12/4/3", 1, {0.0, 0.0}) == Catch::Approx(1.0));
    CHECK(eval_value("10 - 4 - 3", 1, {0.0, 0.0}) == Catch::Approx(3.0));
    CHECK(eval_value("2*-q1", 1, {3.0, 0.0}) == Catch::Approx(-6.0));
    CHECK(eval_value("q1^-2", 1, {2.0, 0.0}) == Catch::Approx(0.25));
    CHECK(eval_value("sin(q1)^2 + cos(q1)^2", 1, {0.37, 0.0}) == Catch::Approx(1.0));
    CHECK(eval_value("exp(log(q1))", 1, {1.7, 0.0}) == Catch::Approx(1.7));
    CHECK(eval_value("sqrt(q1^2)", 1, {1.4, 0.0}) == Catch::Approx(1.4));
}

TEST_CASE("parameters resolve by name") {
    CHECK(eval_value("(p1^2 + w^2*q1^2)/2", 1, {0.5, 2.0}, {{"w", 3.0}}) ==
          Catch::Approx(0.5 * (4.0 + 9.0 * 0.25)));
}

TEST_CASE("sho expression produces the expected jet partials") {
    ExprPtr e = parse_expression("(p1^2 + w^2*q1^2)/2", 1, {"w"});
    std::map<std::string, double> params{{"w", 2.0}};
    std::vector<Jet> vars{Jet::variable(2, 2, 0, 0.7), Jet::variable(2, 2, 1, -0.3)};
    Jet h = eval_expression(e, vars, params);
    const int dq[] = {1, 0}, dp[] = {0, 1}, dqq[] = {2, 0}, dpp[] = {0, 2};
    CHECK(extract_partial(h, dq) == Catch::Approx(4.0 * 0.7));  // w^2 q
    CHECK(extract_partial(h, dp) == Catch::Approx(-0.3));       // p
    CHECK(extract_partial(h, dqq) == Catch::Approx(4.0));
    CHECK(extract_partial(h, dpp) == Catch::Approx(1.0));
}

TEST_CASE("parse errors carry positions") {
    using Catch::Matchers::ContainsSubstring;
    CHECK_THROWS_MATCHES(parse_expression("p3", 2, {}), ParseError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("p3")));
    CHECK_THROWS_MATCHES(parse_expression("q1 + vorpal", 1, {}), ParseError,
                         Catch::Matchers::MessageMatches(ContainsSubstring("vorpal")));
    CHECK_THROWS_AS(parse_expression("q1^q1", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("q1^2.5", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("(q1", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("q1 +", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("q0", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("sin q1", 1, {}), ParseError);
    CHECK_THROWS_AS(parse_expression("q1 $ q1", 1, {}), ParseError);

    try {
        parse_expression("q1 +\n  zz", 1, {});
        FAIL("expected ParseError");
    } catch (const ParseError& pe) {
        CHECK(pe.line() == 2);
        CHECK(pe.column() == 3);
    }
}

TEST_CASE("unparse round-trips structurally and as a fixpoint") {
    std::mt19937 rng(4242);
    for (int rep = 0; rep < 300; ++rep) {
        ExprPtr e = random_expr(rng, 2, 4);
        std::string s = unparse_expression(e, 2);
        ExprPtr e2 = parse_expression(s, 2, {"w"});
        REQUIRE(*e2 == *e);
        CHECK(unparse_expression(e2, 2) == s);
    }
}

TEST_CASE("unparse of specific shapes") {
    ExprPtr e = parse_expression("-(q1 + p1)*q1^2 - sin(q1)/(2 + p1)", 1, {});
    std::string s = unparse_expression(e, 1);
    ExprPtr e2 = parse_expression(s, 1, {});
    CHECK(*e2 == *e);
    CHECK(unparse_expression(e2, 1) == s);
}

TEST_CASE("evaluation matches a scalar reference") {
    auto ref = [](double q1, double p1) {
        return std::sin(q1) * std::exp(p1 / 3.0) - (q1 * q1 * q1) / (2.0 + std::cos(p1));
    };
    const std::string src = "sin(q1)*exp(p1/3) - q1^3/(2 + cos(p1))";
    for (double q1 : {-1.2, 0.0, 0.8}) {
        for (double p1 : {-0.5, 0.4, 2.0}) {
            CHECK(eval_value(src, 1, {q1, p1}) == Catch::Approx(ref(q1, p1)).epsilon(1e-12));
        }
    }
    (void)jet_const;
}
