#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <thread>

#include "contlab/expr.hpp"
#include "support/random_expr.hpp"

using contlab::Expression;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("precedence and associativity") {
  CHECK(Expression::parse("2^3^2", {})() == 512.0);
  CHECK(Expression::parse("-2^2", {})() == -4.0);
  CHECK(Expression::parse("1-2-3", {})() == -4.0);
  CHECK(Expression::parse("8/4/2", {})() == 1.0);
  CHECK(Expression::parse("2*3+4*5", {})() == 26.0);
  CHECK(Expression::parse("(2+3)*4", {})() == 20.0);
  CHECK(Expression::parse("--3", {})() == 3.0);
  CHECK(Expression::parse("2^-1", {})() == 0.5);
  CHECK(Expression::parse("-x^2", {"x"})(3.0) == -9.0);
}

TEST_CASE("numbers, constants and functions") {
  CHECK(Expression::parse("1.5e-3", {})() == 1.5e-3);
  CHECK(Expression::parse("2E2", {})() == 200.0);
  CHECK(Expression::parse(".25", {})() == 0.25);
  CHECK(Expression::parse("pi", {})() == std::acos(-1.0));
  CHECK(Expression::parse("e", {})() == std::exp(1.0));
  CHECK(Expression::parse("exp(0)", {})() == 1.0);
  CHECK(Expression::parse("ln(e)", {})() == 1.0);
  CHECK(Expression::parse("sqrt(16)", {})() == 4.0);
  CHECK(Expression::parse("abs(-2.5)", {})() == 2.5);
  CHECK(Expression::parse("min(3, -1)", {})() == -1.0);
  CHECK(Expression::parse("max(3, -1)", {})() == 3.0);
  CHECK_THAT(Expression::parse("sin(pi/2) + cos(0)", {})(), WithinAbs(2.0, 1e-15));
}

TEST_CASE("worked examples evaluate") {
  const auto v1 = Expression::parse("1 + (0.5 - 1)*x", {"x"});
  CHECK(v1(1.0) == 0.5);
  CHECK(v1(0.0) == 1.0);

  const auto zero = Expression::parse("0", {"t"});
  CHECK(zero.is_constant());
  CHECK(zero(123.0) == 0.0);

  const auto lam = Expression::parse("1/(1+W)", {"W"});
  CHECK_THAT(lam(2.0), WithinRel(1.0 / 3.0, 1e-15));
  CHECK(lam.free_variables() == std::vector<std::string>{"W"});
}

TEST_CASE("bindings by name and by slot") {
  const auto e = Expression::parse("t + 10*x", {"t", "x"});
  CHECK(e(1.0, 2.0) == 21.0);
  CHECK(contlab::evaluate(e, {{"t", 1.0}, {"x", 2.0}}) == 21.0);
  CHECK_THROWS_AS(contlab::evaluate(e, {{"t", 1.0}}), std::invalid_argument);
  // Unused declared variables need no binding.
  const auto only_x = Expression::parse("2*x", {"t", "x"});
  CHECK(contlab::evaluate(only_x, {{"x", 4.0}}) == 8.0);
}

TEST_CASE("syntax errors carry a position") {
  try {
    Expression::parse("1 + * 2", {});
    FAIL("expected a syntax error");
  } catch (const contlab::ExprSyntaxError& err) {
    CHECK(err.position() == 4);
  }
  CHECK_THROWS_AS(Expression::parse("", {}), contlab::ExprSyntaxError);
  CHECK_THROWS_AS(Expression::parse("(1 + 2", {}), contlab::ExprSyntaxError);
  CHECK_THROWS_AS(Expression::parse("1 2", {}), contlab::ExprSyntaxError);
  CHECK_THROWS_AS(Expression::parse("1e", {}), contlab::ExprSyntaxError);
}

TEST_CASE("unknown names and wrong arity are rejected") {
  CHECK_THROWS_AS(Expression::parse("y + 1", {"x"}), contlab::ExprError);
  CHECK_THROWS_AS(Expression::parse("x", {"t"}), contlab::ExprError);
  CHECK_THROWS_AS(Expression::parse("foo(1)", {}), contlab::ExprError);
  CHECK_THROWS_AS(Expression::parse("min(1)", {}), contlab::ExprError);
  CHECK_THROWS_AS(Expression::parse("sin(1, 2)", {}), contlab::ExprError);
}

TEST_CASE("domain errors are reported, not returned") {
  CHECK_THROWS_AS(Expression::parse("ln(0)", {})(), contlab::ExprDomainError);
  CHECK_THROWS_AS(Expression::parse("ln(x)", {"x"})(-1.0), contlab::ExprDomainError);
  CHECK_THROWS_AS(Expression::parse("sqrt(-1)", {})(), contlab::ExprDomainError);
  CHECK_THROWS_AS(Expression::parse("1/x", {"x"})(0.0), contlab::ExprDomainError);
  CHECK_THROWS_AS(Expression::parse("exp(1000)", {})(), contlab::ExprDomainError);
}

TEST_CASE("print then parse preserves evaluation on random expressions") {
  contlab::testing::RandomExpr gen(20240611);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto src = gen();
    INFO(src);
    const auto e = Expression::parse(src, {"t", "x"});
    const auto back = Expression::parse(e.print(), {"t", "x"});
    for (int k = 0; k < 100; ++k) {
      const double t = u(rng);
      const double x = u(rng);
      const double a = e(t, x);
      REQUIRE(std::isfinite(a));
      REQUIRE(std::fabs(back(t, x) - a) <= 1e-12);
    }
  }
}

TEST_CASE("finite differences") {
  const auto sq = [](double x) { return x * x * x; };
  CHECK_THAT(contlab::fd::central(sq, 0.5), WithinAbs(0.75, 1e-8));
  CHECK_THAT(contlab::fd::forward(sq, 0.0), WithinAbs(0.0, 1e-8));
  CHECK_THAT(contlab::fd::backward(sq, 1.0), WithinAbs(3.0, 1e-8));
  // Near the ends of [0,1] the stencil stays inside.
  auto guarded = [](double x) {
    if (x < 0.0 || x > 1.0) throw std::domain_error("sampled outside [0,1]");
    return std::exp(x);
  };
  CHECK_THAT(contlab::fd::within(guarded, 0.0, 0.0, 1.0), WithinAbs(1.0, 1e-8));
  CHECK_THAT(contlab::fd::within(guarded, 1.0, 0.0, 1.0), WithinAbs(std::exp(1.0), 1e-8));
}

TEST_CASE("concurrent evaluation is reentrant") {
  const auto e = Expression::parse("sin(3*x) + exp(-t)*cos(x)", {"t", "x"});
  std::vector<double> results(4, 0.0);
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w) {
    pool.emplace_back([&, w] {
      double s = 0.0;
      for (int i = 0; i < 20000; ++i) s += e(i * 1e-4, 1.0 - i * 1e-5);
      results[w] = s;
    });
  }
  for (auto& th : pool) th.join();
  for (double r : results) CHECK(r == results[0]);
}
