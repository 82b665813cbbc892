#include <akcurv/toric.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace akcurv;
using namespace akcurv::toric;

namespace {

Polynomial poly(const std::string& s, int n) { return Polynomial::from_expression(expr::parse(s, n)); }

Rational q(long a, long b = 1) { return Rational(a) / Rational(b); }

}  // namespace

TEST(Polynomial, ArithmeticAndConversion) {
  const auto p = poly("(z1 + 2*z2)^2 - 4*z1*z2 + 1/2", 2);
  EXPECT_EQ(p, poly("z1^2 + 4*z2^2 + 1/2", 2));
  EXPECT_EQ(p.degree(), 2);
  const double z[2] = {0.5, 0.25};
  EXPECT_DOUBLE_EQ(p.eval(z), 0.25 + 0.25 + 0.5);
  EXPECT_EQ(p.eval(std::vector<Rational>{q(1, 3), q(1)}), q(1, 9) + q(4) + q(1, 2));
  EXPECT_TRUE((p - p).is_zero());
  EXPECT_EQ(Polynomial::variable(2, 0) * Polynomial::variable(2, 1), poly("z2*z1", 2));
  EXPECT_THROW(poly("sin(z1)", 1), std::invalid_argument);
  EXPECT_THROW(poly("z1*t1", 1), std::invalid_argument);
  EXPECT_THROW(poly("z1^-1", 1), std::invalid_argument);
  EXPECT_THROW(poly("1/z1", 1), std::invalid_argument);
}

TEST(Polytope, VerticesEdgesAndVolume) {
  const auto simplex = Polytope::simplex(2, q(3));
  EXPECT_EQ(simplex.vertices().size(), 3u);
  EXPECT_EQ(simplex.volume(), q(9, 2));
  const auto edges = simplex.edges_at(0);
  ASSERT_EQ(edges.size(), 2u);
  const auto box = Polytope::box({q(0), q(-1)}, {q(2), q(1)});
  EXPECT_EQ(box.vertices().size(), 4u);
  EXPECT_EQ(box.volume(), q(4));
  EXPECT_EQ(Polytope::interval(q(1, 2), q(3)).volume(), q(5, 2));
  EXPECT_THROW(Polytope::interval(q(1), q(1)), std::invalid_argument);
  EXPECT_THROW(Polytope::simplex(2, q(0)), std::invalid_argument);
}

// Oracles: Fubini on boxes; the Dirichlet integral
// ∫_{Σz ≤ L} z^a dz = a1!…an! L^{n+|a|} / (n+|a|)! on simplices.
TEST(Integrate, ExactOnIntervalsBoxesAndSimplices) {
  EXPECT_EQ(integrate(poly("z1^2", 1), Polytope::interval(q(1), q(3))), q(26, 3));
  EXPECT_EQ(integrate(poly("z1^2*z2", 2), Polytope::box({q(0), q(0)}, {q(1), q(2)})), q(2, 3));
  EXPECT_EQ(integrate(poly("z1*z2^2", 2), Polytope::simplex(2, q(2))), q(8, 15));
  EXPECT_EQ(integrate(poly("1", 2), Polytope::simplex(2, q(1))), q(1, 2));
  EXPECT_EQ(integrate(poly("z1*z2*z3", 3), Polytope::simplex(3, q(1))), q(1, 720));
  EXPECT_EQ(integrate(poly("z1^3 - z2", 2), Polytope::box({q(-1), q(0)}, {q(1), q(1, 2)})), q(-1, 4));
}

TEST(Projection, AffineScalarIsReproduced) {
  const auto box = Polytope::box({q(0), q(0)}, {q(1), q(1)});
  const auto proj = project_affine(poly("3*z1 - z2 + 1/2", 2), box);
  EXPECT_EQ(proj.mean, q(3, 2));
  EXPECT_EQ(proj.z.c0, q(-1));
  EXPECT_EQ(proj.z.c, (std::vector<Rational>{q(3), q(-1)}));
  EXPECT_EQ(proj.residual_squared, q(0));
}

// z² on [0, 1]: z² − 1/3 = (z − ½) + (z² − z + 1/6), the last term being the
// shifted Legendre polynomial of degree 2 with ∫ = 1/180.
TEST(Projection, RemainderIsOrthogonalToAffineFunctions) {
  const auto interval = Polytope::interval(q(0), q(1));
  const auto proj = project_affine(poly("z1^2", 1), interval);
  EXPECT_EQ(proj.mean, q(1, 3));
  EXPECT_EQ(proj.z.c[0], q(1));
  EXPECT_EQ(proj.z.c0, q(-1, 2));
  EXPECT_EQ(proj.residual_squared, q(1, 180));
  EXPECT_NEAR(proj.residual(), std::sqrt(1.0 / 180.0), 1e-15);
}

TEST(Projection, IsIdempotent) {
  for (const auto& polytope : {Polytope::simplex(2, q(2)), Polytope::box({q(-1), q(0)}, {q(1), q(3)})}) {
    const auto s = poly("z1^3 - 2*z1*z2 + z2^2/5 + 7", 2);
    const auto once = project_affine(s, polytope);
    const auto twice = project_affine(once.z.polynomial() + Polynomial::constant(2, once.mean), polytope);
    EXPECT_EQ(twice.mean, once.mean);
    EXPECT_EQ(twice.z.c0, once.z.c0);
    EXPECT_EQ(twice.z.c, once.z.c);
    EXPECT_EQ(twice.residual_squared, q(0));
    // Zero mean of the affine part.
    EXPECT_EQ(integrate(once.z.polynomial(), polytope), q(0));
  }
}

TEST(Projection, SampledMatchesExactOnFineGrids) {
  const auto s_expr = expr::parse("z1^2 + z1*z2", 2);
  const auto exact = project_affine(Polynomial::from_expression(s_expr), Polytope::box({q(0), q(0)}, {q(1), q(1)}));
  double previous = 0.0;
  for (int level = 0; level < 3; ++level) {
    const auto chart = std::make_shared<const DarbouxChart>(
        DarbouxChart::uniform(2, 0.0, 1.0, 9, 0.0, 2 * M_PI, 8, true).refined(level));
    GridField s(chart, Shape::Scalar, true);
    std::vector<double> x(4);
    Region::full(*chart).for_each(
        [&](std::span<const int> idx) {
          chart->coordinates(idx, x);
          s.at(idx)[0] = s_expr.eval(x);
        },
        true, 2);
    s.set_valid(Region::full(*chart));
    const auto sampled = project_affine(s);
    double err = std::abs(sampled.mean - exact.mean.convert_to<double>());
    for (int i = 0; i < 2; ++i) err = std::max(err, std::abs(sampled.c[i] - exact.z.c[i].convert_to<double>()));
    EXPECT_LT(err, 1e-2);
    if (level > 0) EXPECT_GT(std::log2(previous / err), 1.9);
    previous = err;
  }
}

TEST(Futaki, IntervalValueIsOneTwelfth) {
  const auto value =
      futaki_mabuchi(AffineFunction::momentum({1}), AffineFunction::momentum({1}), Polytope::interval(q(0), q(1)));
  EXPECT_EQ(value.rational, q(1, 12));
  EXPECT_EQ(value.two_pi_power, -2);
  EXPECT_NEAR(value.value(), 1.0 / (12.0 * 4.0 * M_PI * M_PI), 1e-17);
}

// Unit simplex: n! ∫ (z1 − 1/3)² = 1/18, n! ∫ (z1 − 1/3)(z2 − 1/3) = −1/36.
TEST(Futaki, GramOnSimplexAndBox) {
  const auto simplex = futaki_gram(Polytope::simplex(2, q(1)));
  EXPECT_TRUE(simplex.symmetric);
  EXPECT_TRUE(simplex.positive_definite);
  EXPECT_EQ(simplex.entries[0].rational, q(1, 18));
  EXPECT_EQ(simplex.entries[1].rational, q(-1, 36));
  EXPECT_EQ(simplex.entries[2].rational, q(-1, 36));
  EXPECT_EQ(simplex.entries[3].rational, q(1, 18));
  const auto box = futaki_gram(Polytope::box({q(0), q(0)}, {q(1), q(2)}));
  EXPECT_TRUE(box.positive_definite);
  EXPECT_EQ(box.entries[1].rational, q(0));
  for (const auto& p : box.pivots) EXPECT_GT(p, q(0));
  // Bilinear in the momenta.
  const auto mixed = futaki_mabuchi(AffineFunction::momentum({2, -1}), AffineFunction::momentum({1, 1}),
                                    Polytope::simplex(2, q(1)));
  EXPECT_EQ(mixed.rational, q(2, 18) + q(-2, 36) + q(1, 36) - q(1, 18));
}

TEST(PotentialMetric, HessianOfThePotential) {
  const auto chart = std::make_shared<const DarbouxChart>(DarbouxChart::uniform(2, 0.2, 0.9, 8, 0, 2 * M_PI, 8, true));
  const auto m = std::make_shared<PotentialMetric>(quartic_potential(2));
  MetricJet jet;
  const std::vector<double> x{0.4, 0.7, 0.0, 0.0};
  m->jet(x, jet);
  // Oracle: u_11 = z1² + 1 + z2²/2, u_12 = z1 z2.
  EXPECT_NEAR(jet.g(0, 0), 0.16 + 1.0 + 0.245, 1e-14);
  EXPECT_NEAR(jet.g(0, 1), 0.28, 1e-14);
  AnalyticJets p(m, chart);
  EXPECT_TRUE(validate_compatibility(p).pass);
  EXPECT_LT(nijenhuis(p).norm.max_abs(), 1e-12);
  const auto flat = std::make_shared<PotentialMetric>(expr::parse("z1^2/2", 1));
  flat->values(std::vector<double>{0.3, 1.0}, jet);
  EXPECT_DOUBLE_EQ(jet.g(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(jet.g(1, 1), 1.0);
}
