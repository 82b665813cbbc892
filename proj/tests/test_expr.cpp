#include <akcurv/expr.hpp>
#include <akcurv/jet.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "random_expr.hpp"

using namespace akcurv;
using expr::Op;

namespace {

double at(const expr::Expression& e, std::vector<double> x) { return e.eval(x); }

// Central difference oracle, step 1e-5.
double fd_derivative(const expr::Expression& e, std::vector<double> x, int var) {
  const double h = 1e-5;
  std::vector<double> xp = x, xm = x;
  xp[var] += h;
  xm[var] -= h;
  return (e.eval(xp) - e.eval(xm)) / (2 * h);
}

}  // namespace

TEST(Parse, ProductShapeIsForcedByGrammar) {
  const auto e = expr::parse("z1*(2-z1)", 1);
  ASSERT_EQ(e.root()->op, Op::Mul);
  EXPECT_EQ(e.root()->lhs->op, Op::Variable);
  EXPECT_EQ(e.root()->lhs->variable, 0);
  EXPECT_EQ(e.root()->rhs->op, Op::Sub);
}

TEST(Parse, Precedence) {
  EXPECT_EQ(at(expr::parse("1+2*3", 1), {0, 0}), 7.0);
  EXPECT_EQ(at(expr::parse("(1+2)*3", 1), {0, 0}), 9.0);
  EXPECT_EQ(at(expr::parse("-z1^2", 1), {3, 0}), -9.0);
  EXPECT_EQ(at(expr::parse("2*z1^-1", 1), {4, 0}), 0.5);
  EXPECT_EQ(at(expr::parse("8/2/2", 1), {0, 0}), 2.0);
  EXPECT_EQ(at(expr::parse("1-2-3", 1), {0, 0}), -4.0);
}

TEST(Parse, LiteralsAreExactRationals) {
  const auto e = expr::parse("0.25", 1);
  ASSERT_EQ(e.root()->op, Op::Constant);
  EXPECT_EQ(e.root()->value, Rational(1, 4));
  const auto f = expr::parse("1e-3", 1);
  ASSERT_EQ(f.root()->op, Op::Constant);
  EXPECT_EQ(f.root()->value, Rational(1, 1000));
  EXPECT_NEAR(at(expr::parse("pi", 1), {0, 0}), M_PI, 1e-15);
}

TEST(Parse, VariablesFollowTheChartLayout) {
  const auto e = expr::parse("t2", 2);
  ASSERT_EQ(e.root()->op, Op::Variable);
  EXPECT_EQ(e.root()->variable, 3);
  EXPECT_EQ(expr::variable_name(3, 2), "t2");
  EXPECT_EQ(at(expr::parse("z1+10*z2+100*t1+1000*t2", 2), {1, 2, 3, 4}), 4321.0);
}

TEST(Parse, IndexOutOfRangeIsRejected) { EXPECT_THROW(expr::parse("z3", 2), expr::ParseError); }

TEST(Parse, ErrorsCarryByteOffsets) {
  try {
    expr::parse("z1**2", 1);
    FAIL() << "expected a parse error";
  } catch (const expr::ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
    EXPECT_NE(std::string(e.what()).find("byte offset 3"), std::string::npos);
  }
  EXPECT_THROW(expr::parse("y1", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("sin z1", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("z1 z1", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("(z1", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("z1^1.5", 1), expr::ParseError);
  EXPECT_THROW(expr::parse("z0", 1), expr::ParseError);
}

TEST(Eval, Values) {
  EXPECT_EQ(at(expr::parse("z1^2", 1), {3, 0}), 9.0);
  for (double t : {-2.0, 0.3, 1.7, 10.0}) {
    EXPECT_NEAR(at(expr::parse("sin(t1)^2+cos(t1)^2", 1), {0, t}), 1.0, 1e-15);
  }
  EXPECT_NEAR(at(expr::parse("exp(ln(z1))", 1), {2.5, 0}), 2.5, 1e-15);
  EXPECT_NEAR(at(expr::parse("sqrt(z1)^2", 1), {2.5, 0}), 2.5, 1e-15);
}

TEST(Eval, DomainErrors) {
  EXPECT_THROW(at(expr::parse("ln(z1)", 1), {0, 0}), expr::DomainError);
  EXPECT_THROW(at(expr::parse("sqrt(z1)", 1), {-1, 0}), expr::DomainError);
  EXPECT_THROW(at(expr::parse("1/(z1-1)", 1), {1, 0}), expr::DomainError);
  EXPECT_THROW(at(expr::parse("z1^-1", 1), {0, 0}), expr::DomainError);
}

TEST(Eval, Predicates) {
  EXPECT_TRUE(expr::parse("0", 1).is_zero());
  EXPECT_FALSE(expr::parse("z1-z1", 1).is_zero());
  EXPECT_TRUE(expr::parse("z1*sin(z2)", 2).independent_of_t());
  EXPECT_FALSE(expr::parse("z1*sin(t2)", 2).independent_of_t());
}

TEST(Eval, ConcurrentEvaluationIsReentrant) {
  const auto e = expr::parse("sin(z1)*exp(t1)/(2+cos(z1*t1))", 1);
  std::vector<double> results(8);
  std::vector<std::thread> threads;
  for (int k = 0; k < 8; ++k) {
    threads.emplace_back([&, k] {
      double acc = 0.0;
      for (int i = 0; i < 2000; ++i) acc += e.eval(std::vector<double>{0.001 * i, 0.5});
      results[k] = acc;
    });
  }
  for (auto& t : threads) t.join();
  for (double r : results) EXPECT_EQ(r, results[0]);
}

TEST(Differentiate, Examples) {
  const auto sq = expr::differentiate(expr::parse("z1^2", 1), 0);
  EXPECT_EQ(at(sq, {5, 0}), 10.0);
  const auto p = expr::parse("z1*(2-z1)", 1);
  const auto pp = expr::differentiate(expr::differentiate(p, 0), 0);
  for (double z : {-3.0, 0.0, 0.7, 12.0}) EXPECT_EQ(at(pp, {z, 0}), -2.0);
  EXPECT_TRUE(expr::differentiate(expr::parse("z1^3", 1), 1).is_zero());
}

TEST(Differentiate, MatchesFiniteDifferenceOracle) {
  testkit::RandomExpressions gen(2, 11);
  const auto e = expr::parse("sin(z1*t2)/(2+cos(z2)) + ln(1+z1^2*t1^2) + sqrt(3+z2)*exp(-t1)", 2);
  for (int i = 0; i < 20; ++i) {
    const auto x = gen.point();
    for (int v = 0; v < 4; ++v) {
      const double d = at(expr::differentiate(e, v), x);
      EXPECT_NEAR(d, fd_derivative(e, x, v), 1e-6 * std::max(1.0, std::abs(d)));
    }
  }
}

TEST(Differentiate, LinearityAndMixedPartials) {
  testkit::RandomExpressions gen(2, 5);
  for (int i = 0; i < 50; ++i) {
    const auto e1 = gen.tree(4);
    const auto e2 = gen.tree(4);
    const auto a = expr::Expression::constant(Rational(7, 3), 2);
    const auto lhs = expr::differentiate(a * e1 + e2, 0);
    const auto rhs = a * expr::differentiate(e1, 0) + expr::differentiate(e2, 0);
    const auto m12 = expr::differentiate(expr::differentiate(e1, 0), 1);
    const auto m21 = expr::differentiate(expr::differentiate(e1, 1), 0);
    for (int k = 0; k < 5; ++k) {
      const auto x = gen.point();
      const double l = lhs.eval(x), r = rhs.eval(x);
      EXPECT_NEAR(l, r, 1e-12 * std::max(1.0, std::abs(l)));
      const double u = m12.eval(x), w = m21.eval(x);
      EXPECT_NEAR(u, w, 1e-12 * std::max(1.0, std::abs(u)));
    }
  }
}

TEST(Differentiate, JetEvaluationAgreesWithSymbolicDerivatives) {
  testkit::RandomExpressions gen(2, 9);
  for (int i = 0; i < 50; ++i) {
    const auto e = gen.tree(4);
    const auto x = gen.point();
    std::vector<Jet> xs;
    for (int a = 0; a < 4; ++a) xs.push_back(Jet::variable(4, a, x[a]));
    const Jet j = e.eval(std::span<const Jet>(xs));
    const double v = e.eval(x);
    EXPECT_NEAR(j.value(), v, 1e-13 * std::max(1.0, std::abs(v)));
    for (int a = 0; a < 4; ++a) {
      const auto da = expr::differentiate(e, a);
      const double g = da.eval(x);
      EXPECT_NEAR(j.dim() ? j.grad(a) : 0.0, g, 1e-11 * std::max(1.0, std::abs(g)));
      for (int b = 0; b < 4; ++b) {
        const double h = expr::differentiate(da, b).eval(x);
        EXPECT_NEAR(j.dim() ? j.hess(a, b) : 0.0, h, 1e-10 * std::max(1.0, std::abs(h)));
      }
    }
  }
}

TEST(RoundTrip, SerializeThenParseIsIdentityOnParsedTrees) {
  testkit::RandomExpressions gen(2, 3);
  for (int i = 0; i < 300; ++i) {
    const auto e = gen.tree(5);
    const auto tree = expr::parse(e.str(), 2);
    const auto again = expr::parse(tree.str(), 2);
    ASSERT_TRUE(expr::same_tree(tree, again)) << tree.str();
    EXPECT_EQ(tree.str(), again.str());
    const auto x = gen.point();
    EXPECT_NEAR(tree.eval(x), e.eval(x), 1e-13 * std::max(1.0, std::abs(e.eval(x))));
  }
  for (const char* s : {"z1*(2-z1)", "-(z1+1)^-2", "1/3*t1", "sin(-z1)", "2-(3-z1)", "(z1/z1)/z1", "0.125*pi"}) {
    const auto tree = expr::parse(s, 1);
    EXPECT_TRUE(expr::same_tree(tree, expr::parse(tree.str(), 1))) << s;
  }
}
