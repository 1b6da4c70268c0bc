#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "cavu/expr.hpp"
#include "cavu/rng.hpp"

using cavu::EvalError;
using cavu::Expr;
using cavu::ExprError;

TEST_CASE("precedence and arithmetic") {
  CHECK(Expr::parse("1+2*3").eval(0.0) == 7.0);
  CHECK(Expr::parse("(1+2)*3").eval(0.0) == 9.0);
  CHECK(Expr::parse("2-3-4").eval(0.0) == -5.0);  // left associative
  CHECK(Expr::parse("12/4/3").eval(0.0) == 1.0);
  CHECK(Expr::parse("5").eval(-17.0) == 5.0);
  CHECK(Expr::parse("y").eval(2.5) == 2.5);
  CHECK(Expr::parse("-y*y").eval(3.0) == -9.0);
}

TEST_CASE("functions") {
  CHECK(Expr::parse("tanh(y)").eval(0.0) == 0.0);
  // Independent scalar evaluation of e^{-1}.
  CHECK(Expr::parse("exp(-(y*y))").eval(1.0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(Expr::parse("min(1, max(-1, y))").eval(-3.0) == -1.0);
  CHECK(Expr::parse("min(1, max(-1, y))").eval(0.25) == 0.25);
  CHECK(Expr::parse("min(1, max(-1, y))").eval(7.0) == 1.0);
  CHECK(Expr::parse("abs(y)").eval(-2.0) == 2.0);
  CHECK(Expr::parse("sin(y)*sin(y)+cos(y)*cos(y)").eval(0.7) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("errors carry positions") {
  CHECK_THROWS_AS(Expr::parse(""), ExprError);
  CHECK_THROWS_AS(Expr::parse("1+"), ExprError);
  CHECK_THROWS_AS(Expr::parse("foo(y)"), ExprError);
  CHECK_THROWS_AS(Expr::parse("exp(1,2)"), ExprError);
  CHECK_THROWS_AS(Expr::parse("min(1)"), ExprError);
  CHECK_THROWS_AS(Expr::parse("1 + * 2"), ExprError);
  CHECK_THROWS_AS(Expr::parse("(1+2"), ExprError);
  try {
    Expr::parse("1 + foo");
  } catch (const ExprError& e) {
    CHECK(e.offset == 4);
  }
  CHECK_THROWS_AS(Expr::parse("1/(y-y)").eval(1.0), EvalError);
  CHECK_THROWS_AS(Expr::parse("exp(y)*exp(y)").eval(500.0), EvalError);
}

TEST_CASE("evaluation is bit deterministic") {
  const Expr e = Expr::parse("tanh(y)*exp(-y*y)+sin(y)/(2+cos(y))");
  for (double y : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
    const double a = e.eval(y);
    const double b = e.eval(y);
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  }
}

namespace {

// Random expression source for the round-trip property.
std::string random_expr(cavu::Rng& rng, int depth) {
  const double pick = rng.next_uniform();
  if (depth <= 0 || pick < 0.25) {
    if (rng.next_uniform() < 0.4) return "y";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", rng.next_uniform() * 20.0 - 10.0);
    return buf;
  }
  if (pick < 0.45)
    return "(" + random_expr(rng, depth - 1) + ")";
  if (pick < 0.55) return "-" + random_expr(rng, depth - 1);
  if (pick < 0.8) {
    const char* ops[] = {"+", "-", "*", "/"};
    return random_expr(rng, depth - 1) + ops[rng.next_u64() % 4] +
           random_expr(rng, depth - 1);
  }
  const char* unary[] = {"exp", "tanh", "sin", "cos", "abs"};
  if (pick < 0.93)
    return std::string(unary[rng.next_u64() % 5]) + "(" +
           random_expr(rng, depth - 1) + ")";
  const char* binary[] = {"min", "max"};
  return std::string(binary[rng.next_u64() % 2]) + "(" +
         random_expr(rng, depth - 1) + "," + random_expr(rng, depth - 1) + ")";
}

}  // namespace

TEST_CASE("pretty print round trip over a generated corpus") {
  cavu::Rng rng(20240817);
  for (int it = 0; it < 500; ++it) {
    const std::string src = random_expr(rng, 4);
    const Expr parsed = Expr::parse(src);
    const Expr reparsed = Expr::parse(parsed.pretty());
    CHECK(parsed.equals(reparsed));
    // And printing is a fixed point from the first round on.
    CHECK(parsed.pretty() == reparsed.pretty());
  }
}
