// Expression parser: precedence, associativity, the integer-exponent
// fast path, error offsets, and the parse -> print -> parse round trip.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "driftfit/errors.hpp"
#include "driftfit/expression.hpp"

using namespace driftfit;
using harness::Expression;

namespace {

double eval1(const std::string& text, double x) {
    Vector state(1);
    state << x;
    return Expression::parse(text, 1).eval(state);
}

} // namespace

TEST_CASE("expressions evaluate with the usual precedence and associativity") {
    CHECK(eval1("1 + 2.5", 0.0) == 3.5);
    CHECK(eval1("7/2", 0.0) == 3.5);
    CHECK(eval1("1 - 2 * 3", 0.0) == -5.0);
    CHECK(eval1("(1 - 2) * 3", 0.0) == -3.0);
    CHECK(eval1("10 - 2 - 3", 0.0) == 5.0);   // left associative
    CHECK(eval1("12 / 4 / 3", 0.0) == 1.0);   // left associative
    CHECK(eval1("2 * -3", 0.0) == -6.0);
    CHECK(eval1("2^3^2", 0.0) == 512.0);      // right associative
    CHECK(eval1("(2^3)^2", 0.0) == 64.0);
    CHECK(eval1("-2^2", 0.0) == -4.0);        // unary minus binds looser than ^
    CHECK(eval1("-(3^2)", 0.0) == -9.0);
    CHECK(eval1("2^10", 0.0) == 1024.0);
    CHECK(eval1("x1 + 1", 2.0) == 3.0);
}

TEST_CASE("powers use repeated squaring for integer exponents and pow otherwise") {
    CHECK(eval1("2^-2", 0.0) == 0.25);
    CHECK(eval1("x1^0.5", 4.0) == 2.0);
    CHECK(eval1("x1^3", -2.0) == -8.0);
    CHECK(eval1("x1^-1", 4.0) == 0.25);
    CHECK(eval1("x1^0", 123.0) == 1.0);
}

TEST_CASE("number literals accept scientific and bare-dot forms") {
    CHECK(eval1("1e3", 0.0) == 1000.0);
    CHECK(eval1(".5", 0.0) == 0.5);
    CHECK(eval1("2.", 0.0) == 2.0);
    CHECK(eval1("  1   +   2  ", 0.0) == 3.0);
}

TEST_CASE("functions evaluate through the standard library") {
    CHECK(eval1("sin(x1)", 0.7) == std::sin(0.7));
    CHECK(eval1("cos(x1)", 0.7) == std::cos(0.7));
    CHECK(eval1("exp(x1)", 1.0) == std::exp(1.0));
    // The first preset formula at x1 = 0: 2 + 0 - 0 + 0.02 * 1 = 2.02.
    CHECK(eval1("2 + 0.08*x1 - 0.05*sin(x1) + 0.02*cos(x1)^2", 0.0) == 2.0 + 0.02);
}

TEST_CASE("parse errors carry exact messages and byte offsets") {
    CHECK_THROWS_WITH_AS(Expression::parse("x0", 1),
                         "unknown identifier 'x0' (at offset 0)", UnknownIdentifierError);
    CHECK_THROWS_WITH_AS(Expression::parse("x01", 1),
                         "unknown identifier 'x01' (at offset 0)", UnknownIdentifierError);
    CHECK_THROWS_WITH_AS(Expression::parse("x3", 2),
                         "variable 'x3' exceeds dimension 2 (at offset 0)",
                         UnknownIdentifierError);
    CHECK_THROWS_WITH_AS(Expression::parse("x1e2", 1),
                         "unknown identifier 'x1e2' (at offset 0)", UnknownIdentifierError);
    CHECK_THROWS_WITH_AS(Expression::parse("sin x1", 1),
                         "function 'sin' needs a parenthesized argument (at offset 0)",
                         ArityError);
    CHECK_THROWS_WITH_AS(Expression::parse("sin(x1, x2)", 2),
                         "function 'sin' takes exactly one argument (at offset 6)", ArityError);
    CHECK_THROWS_WITH_AS(Expression::parse("(x1", 1), "expected ')' (at offset 3)", ParseError);
    CHECK_THROWS_WITH_AS(Expression::parse("1 + ", 1),
                         "unexpected end of expression (at offset 4)", ParseError);
    CHECK_THROWS_WITH_AS(Expression::parse("1 + @", 1),
                         "unexpected character '@' (at offset 4)", ParseError);
    CHECK_THROWS_WITH_AS(Expression::parse("1 2", 1),
                         "unexpected trailing input (at offset 2)", ParseError);
    CHECK_THROWS_WITH_AS(Expression::parse(".", 1), "malformed number (at offset 0)", ParseError);
    CHECK_THROWS_WITH_AS(Expression::parse("x1", 0), "expression dimension must be positive",
                         Error);

    try {
        Expression::parse("sin(x1, x2)", 2);
        FAIL("expected an ArityError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 6);
    }
}

TEST_CASE("printing is fully parenthesized and parses back to an equal tree") {
    CHECK(Expression::parse("1+2*x1", 1).str() == "(1+(2*x1))");
    CHECK(Expression::parse("-x1", 1).str() == "(-x1)");

    const std::vector<std::pair<std::string, int>> formulas = {
        {"2 + 0.08*x1 - 0.05*sin(x1) + 0.02*cos(x1)^2", 1},
        {"0.08*x1", 1},
        {"2 + 0.08*x1 - 0.01*x1^2", 1},
        {"0.4*x1 - 0.1*x1*x2", 2},
        {"-0.8*x2 + 0.2*x1^2", 2},
        {"2*sin(0.2*x1) + 1.5*cos(0.1*x2)", 2},
        {"3*sin(0.3*x1)*cos(0.1*x2)", 2},
        {"-(x1 - 2)^3 / (1 + exp(-x2)) + .25e1", 2},
    };
    for (const auto& [text, dim] : formulas) {
        const Expression original = Expression::parse(text, dim);
        const Expression reparsed = Expression::parse(original.str(), dim);
        CHECK(original.equals(reparsed));
        // Equal trees evaluate bitwise equal everywhere.
        for (int i = 0; i < 20; ++i) {
            Vector x(dim);
            for (int k = 0; k < dim; ++k)
                x(k) = -4.0 + 0.7 * static_cast<double>(i) + 0.3 * static_cast<double>(k);
            const double a = original.eval(x);
            const double b = reparsed.eval(x);
            CHECK(a == b);
        }
    }
}

TEST_CASE("structural equality distinguishes operand order") {
    const Expression a = Expression::parse("x1 + 1", 1);
    const Expression b = Expression::parse("x1+1", 1);
    const Expression c = Expression::parse("1 + x1", 1);
    CHECK(a.equals(b));
    CHECK_FALSE(a.equals(c));
}

TEST_CASE("expression drifts wire one component per dimension") {
    const auto drift = harness::expression_drift({"2*x1", "x1 - x2"});
    CHECK(drift->dim() == 2);
    Vector x(2), out(2);
    x << 3.0, 1.0;
    drift->eval(x, out);
    CHECK(out(0) == 6.0);
    CHECK(out(1) == 2.0);
    CHECK_THROWS_WITH_AS(harness::expression_drift({}),
                         "a drift needs at least one component expression", Error);
    // Components see the full state dimension.
    CHECK_THROWS_AS(harness::expression_drift({"x2"}), UnknownIdentifierError);
}
