#include <akcurv/curvature.hpp>
#include <akcurv/deformation.hpp>
#include <akcurv/toric.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace akcurv;

namespace {

ChartPtr chart4(double zlo, double zhi, int zp = 8, int tp = 8) {
  return std::make_shared<const DarbouxChart>(DarbouxChart::uniform(2, zlo, zhi, zp, 0.0, 2 * M_PI, tp, true));
}

// Connection coefficients A^b_ac of ∇ = D − ½ J (D J), from the analytic
// first derivatives of g at x; stored [b][a][c].
std::vector<double> canonical_connection(const MetricModel& m, const std::vector<double>& x) {
  const int d = static_cast<int>(x.size());
  MetricJet jet;
  m.jet(x, jet);
  std::vector<double> g(d * d), gi(d * d), J(d * d), dJ(d * d * d), gamma(d * d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) g[a * d + b] = jet.g(a, b);
  // Gauss-Jordan inverse of g.
  std::vector<double> w = g;
  for (int i = 0; i < d; ++i) gi[i * d + i] = 1.0;
  for (int c = 0; c < d; ++c) {
    const double p = w[c * d + c];
    for (int k = 0; k < d; ++k) {
      w[c * d + k] /= p;
      gi[c * d + k] /= p;
    }
    for (int r = 0; r < d; ++r) {
      if (r == c) continue;
      const double f = w[r * d + c];
      for (int k = 0; k < d; ++k) {
        w[r * d + k] -= f * w[c * d + k];
        gi[r * d + k] -= f * gi[c * d + k];
      }
    }
  }
  acs_point(jet, J.data());
  for (int a = 0; a < d; ++a) acs_partial(jet, a, dJ.data() + a * d * d);
  for (int b = 0; b < d; ++b)
    for (int a = 0; a < d; ++a)
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) s += gi[b * d + e] * (jet.dg(a, e, c) + jet.dg(c, e, a) - jet.dg(e, a, c));
        gamma[(b * d + a) * d + c] = 0.5 * s;
      }
  auto G = [&](int b, int a, int c) { return gamma[(b * d + a) * d + c]; };
  std::vector<double> A(d * d * d);
  for (int a = 0; a < d; ++a) {
    std::vector<double> DJ(d * d);  // (D_a J)^p_c
    for (int p = 0; p < d; ++p)
      for (int c = 0; c < d; ++c) {
        double s = dJ[a * d * d + p * d + c];
        for (int e = 0; e < d; ++e) s += G(p, a, e) * J[e * d + c] - G(e, a, c) * J[p * d + e];
        DJ[p * d + c] = s;
      }
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        double s = 0.0;
        for (int p = 0; p < d; ++p) s += J[b * d + p] * DJ[p * d + c];
        A[(b * d + a) * d + c] = G(b, a, c) - 0.5 * s;
      }
  }
  return A;
}

// ρ_ae = ½ Σ J^c_b R^b_{c;ae} for the curvature R(∂a, ∂e) of ∇; the
// derivatives of A are central differences with step 1e-4.
std::vector<double> rho_oracle(const MetricModel& m, const std::vector<double>& x) {
  const int d = static_cast<int>(x.size());
  const double h = 1e-4;
  const auto A = canonical_connection(m, x);
  std::vector<std::vector<double>> dA(d);
  for (int a = 0; a < d; ++a) {
    auto xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    const auto Ap = canonical_connection(m, xp), Am = canonical_connection(m, xm);
    dA[a].resize(A.size());
    for (std::size_t k = 0; k < A.size(); ++k) dA[a][k] = (Ap[k] - Am[k]) / (2 * h);
  }
  auto at = [&](const std::vector<double>& v, int b, int a, int c) { return v[(b * d + a) * d + c]; };
  MetricJet jet;
  m.values(x, jet);
  std::vector<double> J(d * d);
  acs_point(jet, J.data());
  std::vector<double> rho(d * d, 0.0);
  for (int a = 0; a < d; ++a)
    for (int e = 0; e < d; ++e) {
      double tr = 0.0;
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) {
          double R = at(dA[a], b, e, c) - at(dA[e], b, a, c);
          for (int p = 0; p < d; ++p) R += at(A, b, a, p) * at(A, p, e, c) - at(A, b, e, p) * at(A, p, a, c);
          tr += J[c * d + b] * R;
        }
      rho[a * d + e] = 0.5 * tr;
    }
  return rho;
}

double max_rho_minus(const HermitianCurvature& hc, double factor) {
  // max |ρ − factor·ω|
  const int n = hc.rho.chart().n(), d = 2 * n;
  std::vector<double> omega(d * d);
  omega_matrix(n, omega.data());
  double m = 0.0;
  hc.rho.valid().for_each(
      [&](std::span<const int> idx) {
        for (int k = 0; k < d * d; ++k) m = std::max(m, std::abs(hc.rho.at(idx)[k] - factor * omega[k]));
      },
      hc.rho.toric(), n);
  return m;
}

double max_s_minus(const HermitianCurvature& hc, double value) {
  double m = 0.0;
  const int n = hc.s.chart().n();
  hc.s.valid().for_each([&](std::span<const int> idx) { m = std::max(m, std::abs(hc.s.at(idx)[0] - value)); },
                        hc.s.toric(), n);
  return m;
}

}  // namespace

TEST(HermitianCurvature, FlatIsExactlyZero) {
  AnalyticJets p(flat_metric(2), chart4(0.5, 1.5));
  for (Formula f : {Formula::General, Formula::Toric}) {
    const auto hc = hermitian_curvature(p, f);
    EXPECT_EQ(hc.rho.max_abs(), 0.0);
    EXPECT_EQ(hc.s.max_abs(), 0.0);
  }
}

// Symbolic oracle: for H = diag(h1(z1), h2(z2)) the toric reduction gives
// s = −(h1″ + h2″) and ρ(∂z_k, ∂t_k) = −½ h_k″.
TEST(HermitianCurvature, HyperbolicProduct) {
  AnalyticJets p(hyperbolic_product_metric(2), chart4(1.2, 2.2, 16, 8));
  for (Formula f : {Formula::General, Formula::Toric}) {
    const auto hc = hermitian_curvature(p, f);
    EXPECT_LT(max_s_minus(hc, -4.0), 1e-10);
    EXPECT_LT(max_rho_minus(hc, -1.0), 1e-10);
  }
  const auto hc = hermitian_curvature(p, Formula::General);
  const auto he = hermitian_einstein_residual(p, hc);
  EXPECT_NEAR(he.mean_s, -4.0, 1e-12);
  EXPECT_LT(he.residual, 1e-10);
  EXPECT_LT(he.anti_invariant_norm, 1e-12);
  EXPECT_LT(he.s_variation, 1e-12);
}

TEST(HermitianCurvature, Cp1TypeIsEinsteinWithPositiveScalar) {
  // h = z(2 − z): h″ = −2, so s = 4 and ρ = ω.
  AnalyticJets p(cp1_type_metric(2), chart4(0.3, 1.7));
  const auto hc = hermitian_curvature(p, Formula::General);
  EXPECT_LT(max_s_minus(hc, 4.0), 1e-10);
  EXPECT_LT(max_rho_minus(hc, 1.0), 1e-10);
}

TEST(HermitianCurvature, GeneralFormulaMatchesConnectionOracle) {
  const auto chart = chart4(0.5, 1.5);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto m = random_compatible_metric({seed, 0.25, 2}, *chart);
    for (const auto& x : {std::vector<double>{0.8, 1.2, 0.5, 3.0}, std::vector<double>{1.3, 0.6, 5.5, 1.0}}) {
      MetricJet jet;
      m->jet(x, jet);
      double rho[16];
      hermitian_ricci_point(jet, rho);
      const auto oracle = rho_oracle(*m, x);
      double scale = 0.0;
      for (int k = 0; k < 16; ++k) {
        EXPECT_NEAR(rho[k], oracle[k], 1e-6) << "seed " << seed << " component " << k;
        scale = std::max(scale, std::abs(rho[k]));
      }
      EXPECT_GT(scale, 1e-2);
    }
  }
  // The same oracle pins the sign on the Kähler model.
  const auto oracle = rho_oracle(*hyperbolic_product_metric(2), {1.5, 1.7, 0.0, 0.0});
  EXPECT_NEAR(oracle[0 * 4 + 2], -1.0, 1e-6);
  EXPECT_NEAR(oracle[1 * 4 + 3], -1.0, 1e-6);
}

TEST(HermitianCurvature, ScalarIsTwiceTheOmegaTrace) {
  const auto chart = chart4(0.5, 1.5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AnalyticJets p(random_compatible_metric({seed, 0.2, 2}, *chart), chart);
    const auto hc = hermitian_curvature(p);
    const auto report = scalar_consistency(p, hc);
    EXPECT_LT(report.max_residual, 1e-10);
    EXPECT_GT(hc.s.max_abs(), 1e-3);
  }
}

TEST(HermitianCurvature, ToricFastPathsAgreeWithGeneralFormula) {
  auto spec = deformation::DeformationSpec::defaults();
  spec.epsilon = 0.05;
  const auto deformed_chart = chart4(1.2, 2.2, 16, 8);
  const std::vector<std::pair<MetricModelPtr, ChartPtr>> models{
      {std::make_shared<toric::PotentialMetric>(toric::quartic_potential(2)), chart4(0.2, 0.9)},
      {deformation::build_deformation(spec, *deformed_chart), deformed_chart}};
  for (const auto& [m, chart] : models) {
    ASSERT_TRUE(m->t_independent());
    AnalyticJets p(m, chart);
    ASSERT_TRUE(validate_compatibility(p).pass) << m->describe();
    const auto general = hermitian_curvature(p, Formula::General);
    const auto fast = hermitian_curvature(p, Formula::Toric);
    double drho = 0.0, ds = 0.0;
    general.rho.valid().for_each(
        [&](std::span<const int> idx) {
          for (int k = 0; k < 16; ++k) drho = std::max(drho, std::abs(general.rho.at(idx)[k] - fast.rho.at(idx)[k]));
          ds = std::max(ds, std::abs(general.s.at(idx)[0] - fast.s.at(idx)[0]));
        },
        true, 2);
    EXPECT_LT(drho, 1e-12) << m->describe();
    EXPECT_LT(ds, 1e-12) << m->describe();
    EXPECT_GT(general.s.max_abs(), 1e-3);
  }
}

TEST(HermitianCurvature, ToricFormulaRejectsTDependentJets) {
  const auto chart = chart4(0.5, 1.5);
  AnalyticJets p(random_compatible_metric({1, 0.2, 2}, *chart), chart);
  EXPECT_THROW(hermitian_curvature(p, Formula::Toric), std::invalid_argument);
}

TEST(HermitianCurvature, RegionOverloadEvaluatesASubset) {
  const auto chart = chart4(1.2, 2.2);
  AnalyticJets p(hyperbolic_product_metric(2), chart);
  const Region sub{{2, 2, 0, 0}, {6, 6, 0, 0}, 2};
  const auto hc = hermitian_curvature(p, Formula::General, sub);
  EXPECT_EQ(hc.s.valid().count(true, 2), 9u);
  EXPECT_LT(max_s_minus(hc, -4.0), 1e-12);
}

TEST(HermitianCurvature, FiniteDifferencePathConvergesOnHyperbolicModel) {
  double previous = 0.0;
  const auto base = chart4(1.2, 2.2, 9, 8);
  for (int level = 0; level < 3; ++level) {
    const auto chart = std::make_shared<const DarbouxChart>(base->refined(level));
    FiniteDifferenceJets p(SampledMetric::sample(*std::make_shared<toric::PotentialMetric>(
                                                     expr::parse("z1^4/12 + z2^4/12 + z1^2*z2^2/4", 2)),
                                                 chart));
    AnalyticJets exact(std::make_shared<toric::PotentialMetric>(expr::parse("z1^4/12 + z2^4/12 + z1^2*z2^2/4", 2)),
                       chart);
    const Region common = Region{{2, 2, 0, 0}, {6, 6, 0, 0}, 2}.refined(level);
    const auto a = hermitian_curvature(p, Formula::Toric, common);
    const auto b = hermitian_curvature(exact, Formula::Toric, common);
    double err = 0.0;
    common.for_each([&](std::span<const int> idx) { err = std::max(err, std::abs(a.s.at(idx)[0] - b.s.at(idx)[0])); },
                    true, 2);
    if (level > 0) EXPECT_GT(std::log2(previous / err), 1.9);
    previous = err;
  }
}

TEST(Trapezoid, MeansAreExactForAffineFields) {
  const auto chart = chart4(0.0, 1.0, 11, 8);
  GridField f(chart, Shape::Scalar, true);
  std::vector<double> x(4);
  Region::full(*chart).for_each(
      [&](std::span<const int> idx) {
        chart->coordinates(idx, x);
        f.at(idx)[0] = 3.0 + 2.0 * x[0] - x[1];
      },
      true, 2);
  f.set_valid(Region::full(*chart));
  EXPECT_NEAR(trapezoid_mean(f), 3.5, 1e-14);
  GridField c(chart, Shape::Scalar, true);
  std::fill(c.data().begin(), c.data().end(), -4.0);
  c.set_valid(Region::full(*chart));
  EXPECT_NEAR(trapezoid_mean(c), -4.0, 1e-15);
  EXPECT_NEAR(trapezoid_stddev(c), 0.0, 1e-15);
}

TEST(HermitianEinstein, RandomMetricsAreNotEinstein) {
  const auto chart = chart4(0.5, 1.5);
  AnalyticJets p(random_compatible_metric({4, 0.2, 2}, *chart), chart);
  const auto he = hermitian_einstein_residual(p, hermitian_curvature(p));
  EXPECT_GT(he.residual, 1e-3);
  EXPECT_GT(he.s_variation, 1e-3);
}
