#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "isocausal/expr.hpp"

using namespace isocausal;

namespace {
double at(const std::string& text, std::vector<std::string> vars, std::vector<double> vals) {
    CompiledExpr c(ScalarExpr::parse(text), vars);
    return c(vals);
}
}  // namespace

TEST_CASE("parse reports free variables and calls") {
    ScalarExpr e = ScalarExpr::parse("cosh(t)");
    CHECK(e.free_variables() == std::vector<std::string>{"t"});
    CHECK(e.to_string() == "cosh(t)");
}

TEST_CASE("arithmetic precedence and associativity") {
    CHECK(at("1+2*3", {}, {}) == 7.0);
    CHECK(at("2^3^2", {}, {}) == 512.0);
    CHECK(at("-2^2", {}, {}) == -4.0);
    CHECK(at("2^-1", {}, {}) == 0.5);
    CHECK(at("8/4/2", {}, {}) == 1.0);
    CHECK(at("2**3", {}, {}) == 8.0);
    CHECK(at("(1+v)/u", {"u", "v"}, {1.0, 2.0}) == 3.0);
    CHECK(at("cosh(t)", {"t"}, {0.0}) == 1.0);
    CHECK(at("max(1, 5, 3) + min(2, -1)", {}, {}) == 4.0);
    CHECK(at("pi", {}, {}) == doctest::Approx(M_PI));
    CHECK(at("floor(x) + ceil(x)", {"x"}, {2.5}) == 5.0);
    CHECK(at("ceil(-0.5)", {}, {}) == 0.0);
}

TEST_CASE("malformed input carries a byte offset") {
    try {
        ScalarExpr::parse("2*d u");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(ScalarExpr::parse(""), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse("(1+2"), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse("foo(1)"), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse("sin(1, 2)"), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse("x < 1"), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse_condition("x + 1"), ParseError);
    CHECK_THROWS_AS(ScalarExpr::parse("(x < 1) + 2"), ParseError);
}

TEST_CASE("domain errors name the offending sub-expression") {
    CompiledExpr c(ScalarExpr::parse("1 + log(x)"), {"x"});
    std::vector<double> v{-1.0};
    try {
        c(v);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("log(x)") != std::string::npos);
    }
    CHECK_THROWS_AS(at("sqrt(x)", {"x"}, {-1.0}), DomainError);
    CHECK_THROWS_AS(at("1/x", {"x"}, {0.0}), DomainError);
    CHECK_THROWS_AS(at("x^0.5", {"x"}, {-2.0}), DomainError);
    CHECK_THROWS_AS(at("exp(x)", {"x"}, {1000.0}), DomainError);
}

TEST_CASE("unbound variables are rejected at bind time") {
    CHECK_THROWS_AS(CompiledExpr(ScalarExpr::parse("x + y"), {"x"}), InputError);
}

TEST_CASE("piecewise takes the first matching branch") {
    const char* f = "piecewise(u <= 0 or v <= 0, 1, v >= u and u > 0, (1+v)/u, 7)";
    CHECK(at(f, {"u", "v"}, {-1.0, 3.0}) == 1.0);
    CHECK(at(f, {"u", "v"}, {1.0, 2.0}) == 3.0);
    CHECK(at(f, {"u", "v"}, {2.0, 1.0}) == 7.0);
    // boundary u = v: second branch wins over the default
    CHECK(at(f, {"u", "v"}, {1.0, 1.0}) == 2.0);
    CHECK_THROWS_AS(at("piecewise(x > 0, 1)", {"x"}, {-1.0}), DomainError);
    CHECK(at("piecewise(x ≥ 0, 1, -1)", {"x"}, {0.0}) == 1.0);
}

TEST_CASE("conditions") {
    CompiledExpr m(ScalarExpr::parse_condition("u <= 0 and v >= -u"), {"u", "v"});
    std::vector<double> in{-1.0, 2.0}, out{1.0, 2.0};
    CHECK(m.test(in));
    CHECK_FALSE(m.test(out));
    CompiledExpr n(ScalarExpr::parse_condition("not (x > 1) || x == 5"), {"x"});
    std::vector<double> a{0.0}, b{5.0}, c{3.0};
    CHECK(n.test(a));
    CHECK(n.test(b));
    CHECK_FALSE(n.test(c));
}

TEST_CASE("printing round-trips") {
    for (const char* s : {"1 + 2*x^2", "-(x - y)/(2*z)", "piecewise(x < 0 and y > 1, -x, sin(x))",
                          "2^-1 - (-3)", "a - (b - c)", "a/(b*c)", "(-x)^2"}) {
        ScalarExpr e = ScalarExpr::parse(s);
        ScalarExpr back = ScalarExpr::parse(e.to_string());
        CHECK(back.to_string() == e.to_string());
        std::vector<std::string> vars = e.free_variables();
        std::vector<double> vals;
        for (std::size_t i = 0; i < vars.size(); ++i) vals.push_back(0.3 + 0.7 * static_cast<double>(i));
        CHECK(CompiledExpr(e, vars)(vals) == CompiledExpr(back, vars)(vals));
    }
}

TEST_CASE("substitution composes expressions") {
    ScalarExpr e = ScalarExpr::parse("x^2 + y");
    ScalarExpr s = e.substitute({{"x", ScalarExpr::parse("2*t")}, {"y", ScalarExpr::constant(1.0)}});
    CHECK(at(s.to_string(), {"t"}, {1.5}) == 10.0);
}

TEST_CASE("finite differences") {
    CompiledExpr c(ScalarExpr::parse("cosh(t)"), {"t"});
    std::vector<double> t0{0.0};
    CHECK(std::fabs(c.diff_fd(t0, 0).value) < 1e-8);
    CompiledExpr sq(ScalarExpr::parse("x^2"), {"x"});
    std::vector<double> x3{3.0};
    CHECK(sq.diff_fd(x3, 0).value == doctest::Approx(6.0).epsilon(1e-6));
    CHECK_FALSE(sq.diff_fd(x3, 0).nonsmooth);

    CompiledExpr kink(ScalarExpr::parse("piecewise(u < 0, 0, u)"), {"u"});
    std::vector<double> u0{0.0};
    CHECK(kink.diff_fd(u0, 0).nonsmooth);
}

TEST_CASE("cubic polynomials differentiate to 1e-6 relative") {
    CompiledExpr p(ScalarExpr::parse("2*x^3 - 3*x^2 + 5*x - 7"), {"x"});
    for (double x : {-3.0, -0.5, 0.25, 1.0, 4.0, 40.0}) {
        std::vector<double> v{x};
        double exact = 6 * x * x - 6 * x + 5;
        CHECK(p.diff_fd(v, 0, 1e-5).value == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("evaluation is bit-reproducible") {
    CompiledExpr c(ScalarExpr::parse("sin(x)*exp(-x^2)/(1+x^4)"), {"x"});
    std::vector<double> v{0.7321};
    double a = c(v), b = c(v);
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("external functions") {
    FunctionTable ft;
    ft["twice"] = ExternalFunction{1, [](const double* a) { return 2.0 * a[0]; }};
    ScalarExpr e = ScalarExpr::parse("twice(x) + 1", &ft);
    CHECK(CompiledExpr(e, {"x"})(std::vector<double>{3.0}) == 7.0);
    CHECK_THROWS_AS(ScalarExpr::parse("twice(x)"), ParseError);
}
