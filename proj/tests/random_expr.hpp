#pragma once

// Seeded random expression trees for round-trip and derivative checks.
// Leaves are variables or small rationals; ln and sqrt take 1 + u² style
// arguments and divisions take 2 + sin(..)-style denominators, so every tree
// is smooth at every real point.

#include <akcurv/expr.hpp>

#include <random>
#include <string>

namespace akcurv::testkit {

class RandomExpressions {
 public:
  RandomExpressions(int n, std::uint64_t seed) : n_(n), rng_(seed) {}

  expr::Expression tree(int depth) {
    using namespace expr;
    if (depth == 0 || pick(4) == 0) return leaf();
    const Expression a = tree(depth - 1);
    switch (pick(10)) {
      case 0:
        return a + tree(depth - 1);
      case 1:
        return a - tree(depth - 1);
      case 2:
        return a * tree(depth - 1);
      case 3:
        return a / (Expression::constant(2, n_) + sin(tree(depth - 1)));
      case 4: {
        const int k = pick(5) - 1;
        return k < 0 ? pow(Expression::constant(1, n_) + a * a, -2) : pow(a, k);
      }
      case 5:
        return sin(a);
      case 6:
        return cos(a);
      case 7:
        return exp(sin(a));
      case 8:
        return ln(Expression::constant(1, n_) + a * a);
      default:
        return sqrt(Expression::constant(1, n_) + a * a);
    }
  }

  // Point with coordinates in [0.5, 1.5].
  std::vector<double> point() {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::vector<double> x(2 * n_);
    for (double& v : x) v = u(rng_);
    return x;
  }

 private:
  int pick(int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng_); }

  expr::Expression leaf() {
    using namespace expr;
    if (pick(3) == 0) {
      const int num = pick(9) + 1;
      const int den = pick(4) + 1;
      return Expression::constant(Rational(num, den), n_);
    }
    return Expression::variable(pick(2 * n_), n_);
  }

  int n_;
  std::mt19937_64 rng_;
};

}  // namespace akcurv::testkit
