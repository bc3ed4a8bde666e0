#include <cmath>

#include "doctest.h"
#include "oracle.hpp"
#include "stla/error.hpp"
#include "stla/jet.hpp"

using namespace stla;
using namespace stla::jet;

namespace {
MultiIndex mi(std::initializer_list<int> e) {
    MultiIndex a;
    std::size_t i = 0;
    for (int v : e) a[i++] = static_cast<std::uint8_t>(v);
    return a;
}

// Taylor coefficient d^alpha e(x0) / alpha!, by nested symbolic derivatives.
double taylor_coefficient(const expr::Expr& e, const MultiIndex& alpha, std::size_t n, const std::vector<double>& x0) {
    expr::Expr d = e;
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < alpha[i]; ++k) d = expr::symbolic_partial(d, i);
    return expr::eval_point(d, x0) / alpha.factorial();
}
}  // namespace

TEST_CASE("lift of z^2 at the origin is xi_3^2") {
    const std::vector<std::string> xyz{"x", "y", "z"};
    const auto g = lift(expr::parse("z^2", xyz), std::vector<double>{0, 0, 0}, 3);
    CHECK(g.poly.terms().size() == 1);
    CHECK(g.poly.coefficient(mi({0, 0, 2})) == 1.0);
}

TEST_CASE("lift coefficients match symbolic Taylor coefficients") {
    const std::vector<std::string> xy{"x", "y"};
    const char* exprs[] = {"sin(x)*exp(y)", "1/(2 + x - y)", "sqrt(3 + x*y) + ln(2 + x^2)", "cos(x + 2*y)^2",
                           "(x^2 + y^2 - 1)/2"};
    const std::vector<double> x0{0.3, -0.2};
    for (const char* text : exprs) {
        const auto e = expr::parse(text, xy);
        const auto g = lift(e, x0, 4);
        for (int a = 0; a <= 4; ++a)
            for (int b = 0; a + b <= 4; ++b) {
                CAPTURE(text);
                CAPTURE(a);
                CAPTURE(b);
                const auto alpha = mi({a, b});
                CHECK(g.poly.coefficient(alpha) ==
                      doctest::Approx(taylor_coefficient(e, alpha, 2, x0)).epsilon(1e-10).scale(1.0));
            }
    }
}

TEST_CASE("polynomial lifts are exact") {
    testing::Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const auto e = testing::random_poly(rng, 3, 3);
        const auto x0 = testing::random_point(rng, 3);
        const auto g = lift(e, x0, 3);
        // Evaluate the germ at a displaced point and compare with the function.
        const auto dx = testing::random_point(rng, 3, 0.3);
        double v = 0.0;
        for (const auto& [alpha, c] : g.poly.terms()) {
            double m = c;
            for (std::size_t i = 0; i < 3; ++i) m *= std::pow(dx[i], alpha[i]);
            v += m;
        }
        std::vector<double> x(3);
        for (int i = 0; i < 3; ++i) x[i] = x0[i] + dx[i];
        CHECK(v == doctest::Approx(expr::eval_point(e, x)).epsilon(1e-12));
    }
}

TEST_CASE("partial lowers the cap and fails at cap 0") {
    auto p = TruncatedPoly::coordinate(2, 2, 0, 1.0);
    p = p * p;  // (1 + xi)^2
    const auto d = p.partial(0);
    CHECK(d.degree_cap() == 1);
    CHECK(d.coefficient(MultiIndex()) == 2.0);
    CHECK(d.coefficient(MultiIndex::unit(0)) == 2.0);
    const auto c = TruncatedPoly::constant(2, 0, 1.0);
    CHECK_THROWS_AS((void)c.partial(0), Error);
}

TEST_CASE("products truncate to the smaller cap") {
    const auto a = TruncatedPoly::coordinate(1, 3, 0, 0.0);
    const auto b = TruncatedPoly::coordinate(1, 1, 0, 0.0);
    const auto ab = a * b;
    CHECK(ab.degree_cap() == 1);
    CHECK(ab.terms().empty());
    CHECK_THROWS_AS((void)(TruncatedPoly(1, 2) * TruncatedPoly(2, 2)), Error);
}

TEST_CASE("domain errors in lift") {
    const std::vector<std::string> x{"x"};
    CHECK_THROWS_AS((void)lift(expr::parse("ln(x)", x), std::vector<double>{0.0}, 2), Error);
    CHECK_THROWS_AS((void)lift(expr::parse("sqrt(x)", x), std::vector<double>{0.0}, 2), Error);
}

TEST_CASE("identity germ") {
    const auto id = identity_germ(std::vector<double>{1.0, 2.0}, 2);
    CHECK(id.value() == std::vector<double>{1.0, 2.0});
    CHECK(id.components[1].coefficient(MultiIndex::unit(1)) == 1.0);
    CHECK(id.components[1].coefficient(MultiIndex::unit(0)) == 0.0);
}
