#include <akcurv/dense.hpp>
#include <akcurv/jet.hpp>
#include <akcurv/riemannian.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace akcurv {

// ------------------------------------------------------------ point kernels

void PointGeometry::compute(const MetricJet& m) {
  d = m.dim;
  const int D = d;
  metric_point(m, g.data());
  if (!dense::invert(g.data(), gi.data(), D)) throw std::domain_error("singular metric");
  acs_point(m, J.data());
  for (int a = 0; a < D; ++a) acs_partial(m, a, dJ.data() + a * D * D);

  // Christoffel symbols of the first kind and their partials.
  std::array<double, kMaxDim * kMaxDim * kMaxDim> low{};  // [e][a][c]
  for (int e = 0; e < D; ++e) {
    for (int a = 0; a < D; ++a) {
      for (int c = 0; c < D; ++c) low[(e * D + a) * D + c] = 0.5 * (m.dg(a, e, c) + m.dg(c, e, a) - m.dg(e, a, c));
    }
  }
  for (int b = 0; b < D; ++b) {
    for (int a = 0; a < D; ++a) {
      for (int c = 0; c < D; ++c) {
        double s = 0.0;
        for (int e = 0; e < D; ++e) s += gi[b * D + e] * low[(e * D + a) * D + c];
        gamma[(b * D + a) * D + c] = s;
      }
    }
  }
  // ∂_f Γ^b_ac = −g^{bp} ∂_f g_pq Γ^q_ac + g^{be} ∂_f Γ_{e,ac}
  thread_local std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> dgamma;  // [f][b][a][c]
  for (int f = 0; f < D; ++f) {
    for (int b = 0; b < D; ++b) {
      for (int a = 0; a < D; ++a) {
        for (int c = a; c < D; ++c) {
          double s = 0.0;
          for (int p = 0; p < D; ++p) {
            const double gbp = gi[b * D + p];
            if (gbp == 0.0) continue;
            double inner = 0.0;
            for (int q = 0; q < D; ++q) inner += m.dg(f, p, q) * gamma[(q * D + a) * D + c];
            const double dlow = 0.5 * (m.ddg(f, a, p, c) + m.ddg(f, c, p, a) - m.ddg(f, p, a, c));
            s += gbp * (dlow - inner);
          }
          dgamma[((f * D + b) * D + a) * D + c] = s;
          dgamma[((f * D + b) * D + c) * D + a] = s;
        }
      }
    }
  }
  auto dG = [&](int f, int b, int a, int c) { return dgamma[((f * D + b) * D + a) * D + c]; };
  for (int b = 0; b < D; ++b) {
    for (int c = 0; c < D; ++c) {
      for (int a = 0; a < D; ++a) {
        for (int e = 0; e < D; ++e) {
          double s = dG(a, b, e, c) - dG(e, b, a, c);
          for (int q = 0; q < D; ++q) s += G(b, a, q) * G(q, e, c) - G(b, e, q) * G(q, a, c);
          Rup[((b * D + c) * D + a) * D + e] = s;
        }
      }
    }
  }
  for (int a = 0; a < D; ++a) {
    for (int c = 0; c < D; ++c) {
      for (int dd = 0; dd < D; ++dd) {
        for (int e = 0; e < D; ++e) {
          double s = 0.0;
          for (int b = 0; b < D; ++b) s += g[a * D + b] * R(b, c, dd, e);
          Rl[((a * D + c) * D + dd) * D + e] = s;
        }
      }
    }
  }
  scalar = 0.0;
  for (int c = 0; c < D; ++c) {
    for (int e = 0; e < D; ++e) {
      double s = 0.0;
      for (int b = 0; b < D; ++b) s += R(b, c, b, e);
      ric[c * D + e] = s;
      scalar += gi[c * D + e] * s;
    }
  }
  for (int a = 0; a < D; ++a) {
    for (int b = 0; b < D; ++b) {
      for (int c = 0; c < D; ++c) {
        double s = dJ[(a * D + b) * D + c];
        for (int q = 0; q < D; ++q) s += G(b, a, q) * J[q * D + c] - G(q, a, c) * J[b * D + q];
        DJ[(a * D + b) * D + c] = s;
      }
    }
  }
}

void PointGeometry::ricci_form(double* out) const {
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += J[c * d + a] * ric[c * d + b];
      out[a * d + b] = s;
    }
  }
}

void PointGeometry::star_ricci(double* out) const {
  for (int a = 0; a < d; ++a) {
    for (int e = 0; e < d; ++e) {
      double s = 0.0;
      for (int b = 0; b < d; ++b) {
        for (int c = 0; c < d; ++c) s += J[c * d + b] * R(b, c, a, e);
      }
      out[a * d + e] = 0.5 * s;
    }
  }
}

void PointGeometry::correction(double* out) const {
  std::array<double, kMaxDim * kMaxDim> JDa{};
  for (int a = 0; a < d; ++a) {
    const double* Da = DJ.data() + a * d * d;
    dense::multiply(J.data(), Da, JDa.data(), d, d, d);
    for (int b = 0; b < d; ++b) {
      const double* Db = DJ.data() + b * d * d;
      double s = 0.0;
      for (int p = 0; p < d; ++p) {
        for (int r = 0; r < d; ++r) s += JDa[p * d + r] * Db[r * d + p];
      }
      out[a * d + b] = s;
    }
  }
}

double PointGeometry::bianchi_residual() const {
  double worst = 0.0;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      for (int c = 0; c < d; ++c) {
        for (int e = 0; e < d; ++e) {
          worst = std::max(worst, std::abs(R(a, b, c, e) + R(a, c, e, b) + R(a, e, b, c)));
        }
      }
    }
  }
  return worst;
}

double PointGeometry::metric_compatibility_residual(const MetricJet& m) const {
  double worst = 0.0;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      for (int c = 0; c < d; ++c) {
        double s = m.dg(a, b, c);
        for (int e = 0; e < d; ++e) s -= G(e, a, b) * g[e * d + c] + G(e, a, c) * g[b * d + e];
        worst = std::max(worst, std::abs(s));
      }
    }
  }
  return worst;
}

double PointGeometry::dj_norm() const {
  double worst = 0.0;
  for (int k = 0; k < d * d * d; ++k) worst = std::max(worst, std::abs(DJ[k]));
  return worst;
}

SelfDual self_dual_weyl(const PointGeometry& geo) {
  if (geo.d != 4) throw std::invalid_argument("self-dual Weyl tensor needs a 4-dimensional chart");
  constexpr int D = 4;
  auto inner = [&](const double* x, const double* y) {
    double s = 0.0;
    for (int a = 0; a < D; ++a) {
      for (int b = 0; b < D; ++b) s += x[a] * geo.g[a * D + b] * y[b];
    }
    return s;
  };
  auto apply_J = [&](const double* x, double* y) {
    for (int a = 0; a < D; ++a) {
      y[a] = 0.0;
      for (int b = 0; b < D; ++b) y[a] += geo.J[a * D + b] * x[b];
    }
  };
  double E[4][4] = {};
  E[0][0] = 1.0;
  const double n0 = std::sqrt(inner(E[0], E[0]));
  for (double& v : E[0]) v /= n0;
  apply_J(E[0], E[1]);
  double e3[4] = {0.0, 1.0, 0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    const double c = inner(e3, E[k]);
    for (int a = 0; a < D; ++a) e3[a] -= c * E[k][a];
  }
  const double n2 = std::sqrt(inner(e3, e3));
  if (!(n2 > 1e-12)) throw std::domain_error("self-dual frame construction failed");
  for (int a = 0; a < D; ++a) E[2][a] = e3[a] / n2;
  apply_J(E[2], E[3]);

  // Rf[k][l][i][j] = ⟨R(e_i∧e_j), e_k∧e_l⟩ = Rl(e_k, e_l, e_i, e_j)
  double Rf[4][4][4][4];
  {
    double t1[4][4][4][4];  // contract last index
    for (int a = 0; a < D; ++a)
      for (int c = 0; c < D; ++c)
        for (int dd = 0; dd < D; ++dd)
          for (int j = 0; j < D; ++j) {
            double s = 0.0;
            for (int e = 0; e < D; ++e) s += geo.Rlow(a, c, dd, e) * E[j][e];
            t1[a][c][dd][j] = s;
          }
    double t2[4][4][4][4];
    for (int a = 0; a < D; ++a)
      for (int c = 0; c < D; ++c)
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) {
            double s = 0.0;
            for (int dd = 0; dd < D; ++dd) s += t1[a][c][dd][j] * E[i][dd];
            t2[a][c][i][j] = s;
          }
    for (int a = 0; a < D; ++a)
      for (int l = 0; l < D; ++l)
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) {
            double s = 0.0;
            for (int c = 0; c < D; ++c) s += t2[a][c][i][j] * E[l][c];
            t1[a][l][i][j] = s;
          }
    for (int k = 0; k < D; ++k)
      for (int l = 0; l < D; ++l)
        for (int i = 0; i < D; ++i)
          for (int j = 0; j < D; ++j) {
            double s = 0.0;
            for (int a = 0; a < D; ++a) s += t1[a][l][i][j] * E[k][a];
            Rf[k][l][i][j] = s;
          }
  }
  // σ1 = (e12 + e34)/√2, σ2 = (e13 − e24)/√2, σ3 = (e14 + e23)/√2
  struct Pair {
    int i, j;
    double c;
  };
  const double r = 1.0 / std::sqrt(2.0);
  const Pair sigma[3][2] = {{{0, 1, r}, {2, 3, r}}, {{0, 2, r}, {1, 3, -r}}, {{0, 3, r}, {1, 2, r}}};
  double s_val = geo.scalar;
  SelfDual out;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      double s = 0.0;
      for (const Pair& x : sigma[p]) {
        for (const Pair& y : sigma[q]) s += x.c * y.c * Rf[y.i][y.j][x.i][x.j];
      }
      out.W[p * 3 + q] = s - (p == q ? s_val / 12.0 : 0.0);
    }
  }
  out.trace = out.W[0] + out.W[4] + out.W[8];
  Eigen::Matrix3d M;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) M(p, q) = 0.5 * (out.W[p * 3 + q] + out.W[q * 3 + p]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  solver.computeDirect(M, Eigen::EigenvaluesOnly);
  for (int k = 0; k < 3; ++k) out.eigenvalues[k] = solver.eigenvalues()(k);
  const double e = out.eigenvalues[0];
  out.omega_residual = std::sqrt(2.0) * std::sqrt((M(0, 0) - e) * (M(0, 0) - e) + M(1, 0) * M(1, 0) + M(2, 0) * M(2, 0));
  out.lowest_degenerate = std::abs(out.eigenvalues[1] - out.eigenvalues[0]) < 1e-10;
  out.omega_lowest = out.lowest_degenerate || std::abs(M(0, 0) - e) <= std::abs(M(0, 0) - out.eigenvalues[1]);
  return out;
}

// ------------------------------------------------------------ pipeline

namespace {

GridField slice(const GridField& all, int offset, Shape shape) {
  GridField out(all.chart_ptr(), shape, all.toric());
  out.set_valid(all.valid());
  const int c = out.components();
  for (std::size_t node = 0; node < all.nodes(); ++node) {
    const double* src = all.at(node) + offset;
    std::copy(src, src + c, out.at(node));
  }
  return out;
}

double max_over(const GridField& all, int offset) {
  double worst = 0.0;
  all.valid().for_each([&](std::span<const int> idx) { worst = std::max(worst, std::abs(all.at(idx)[offset])); },
                       all.toric(), all.chart().n());
  return worst;
}

std::size_t count_over(const GridField& all, int offset) {
  std::size_t count = 0;
  all.valid().for_each([&](std::span<const int> idx) { count += all.at(idx)[offset] != 0.0 ? 1 : 0; }, all.toric(),
                       all.chart().n());
  return count;
}

// Presents a toric provider on the full grid, for t-dependent functions.
class FullGridJets : public JetProvider {
 public:
  explicit FullGridJets(const JetProvider& inner) : inner_(inner) {}
  const ChartPtr& chart() const override { return inner_.chart(); }
  bool toric() const override { return false; }
  Region region() const override { return inner_.region(); }
  void jet_at(std::span<const int> idx, MetricJet& out) const override { inner_.jet_at(idx, out); }
  void values_at(std::span<const int> idx, MetricJet& out) const override { inner_.values_at(idx, out); }
  const char* path() const override { return inner_.path(); }

 private:
  const JetProvider& inner_;
};

}  // namespace

CurvatureBundle riemann_pipeline(const JetProvider& provider, const CurvatureOptions& options) {
  return riemann_pipeline(provider, options, provider.region());
}

CurvatureBundle riemann_pipeline(const JetProvider& provider, const CurvatureOptions& options, const Region& region) {
  const int d = provider.chart()->dim();
  const int dd = d * d;
  const bool four = d == 4;
  // Layout: ric, r0, ricci form, star, correction, s, bianchi, ∇g,
  // [W(9), e, omega residual, trace, degenerate, not lowest], [Γ], [R].
  const int o_ric = 0, o_r0 = dd, o_rf = 2 * dd, o_star = 3 * dd, o_corr = 4 * dd, o_s = 5 * dd;
  const int o_bianchi = o_s + 1, o_nabla = o_s + 2;
  const int o_w = o_s + 3;
  const int o_gamma = o_w + (four ? 14 : 0);
  const int o_riem = o_gamma + (options.store_christoffel ? d * dd : 0);
  const int total = o_riem + (options.store_riemann ? dd * dd : 0);

  GridField all = evaluate_field(provider, Shape::Custom, total, region, true,
                                 [&](const MetricJet& m, std::span<const int>, double* v) {
                                   thread_local PointGeometry geo;
                                   geo.compute(m);
                                   std::copy(geo.ric.begin(), geo.ric.begin() + dd, v + o_ric);
                                   for (int a = 0; a < d; ++a) {
                                     for (int b = 0; b < d; ++b) {
                                       v[o_r0 + a * d + b] = geo.ric[a * d + b] - geo.scalar / d * geo.g[a * d + b];
                                     }
                                   }
                                   geo.ricci_form(v + o_rf);
                                   geo.star_ricci(v + o_star);
                                   geo.correction(v + o_corr);
                                   v[o_s] = geo.scalar;
                                   v[o_bianchi] = geo.bianchi_residual();
                                   v[o_nabla] = geo.metric_compatibility_residual(m);
                                   if (four) {
                                     const SelfDual w = self_dual_weyl(geo);
                                     std::copy(w.W.begin(), w.W.end(), v + o_w);
                                     v[o_w + 9] = w.eigenvalues[0];
                                     v[o_w + 10] = w.omega_residual;
                                     v[o_w + 11] = w.trace;
                                     v[o_w + 12] = w.lowest_degenerate ? 1.0 : 0.0;
                                     v[o_w + 13] = w.omega_lowest ? 0.0 : 1.0;
                                   }
                                   if (options.store_christoffel) {
                                     std::copy(geo.gamma.begin(), geo.gamma.begin() + d * dd, v + o_gamma);
                                   }
                                   if (options.store_riemann) std::copy(geo.Rl.begin(), geo.Rl.begin() + dd * dd, v + o_riem);
                                 });
  CurvatureBundle out;
  out.path = provider.path();
  out.ricci = slice(all, o_ric, Shape::Matrix);
  out.ricci0 = slice(all, o_r0, Shape::Matrix);
  out.ricci_form = slice(all, o_rf, Shape::TwoForm);
  out.star_ricci = slice(all, o_star, Shape::TwoForm);
  out.correction = slice(all, o_corr, Shape::TwoForm);
  out.scalar = slice(all, o_s, Shape::Scalar);
  out.bianchi = max_over(all, o_bianchi);
  out.nabla_g = max_over(all, o_nabla);
  if (four) {
    out.wplus = GridField(provider.chart(), Shape::Custom, provider.toric(), 9);
    out.wplus.set_valid(all.valid());
    for (std::size_t node = 0; node < all.nodes(); ++node) {
      std::copy(all.at(node) + o_w, all.at(node) + o_w + 9, out.wplus.at(node));
    }
    out.lowest = slice(all, o_w + 9, Shape::Scalar);
    out.omega_residual = slice(all, o_w + 10, Shape::Scalar);
    out.max_wplus_trace = max_over(all, o_w + 11);
    out.degenerate_nodes = count_over(all, o_w + 12);
    out.omega_not_lowest = count_over(all, o_w + 13);
  }
  if (options.store_christoffel) {
    out.christoffel = GridField(provider.chart(), Shape::Rank3, provider.toric());
    out.christoffel.set_valid(all.valid());
    for (std::size_t node = 0; node < all.nodes(); ++node) {
      std::copy(all.at(node) + o_gamma, all.at(node) + o_gamma + d * dd, out.christoffel.at(node));
    }
  }
  if (options.store_riemann) {
    out.riemann = GridField(provider.chart(), Shape::Rank4, provider.toric());
    out.riemann.set_valid(all.valid());
    for (std::size_t node = 0; node < all.nodes(); ++node) {
      std::copy(all.at(node) + o_riem, all.at(node) + o_riem + dd * dd, out.riemann.at(node));
    }
  }
  return out;
}

RicciRelationReport ricci_relation_residual(const CurvatureBundle& bundle, const HermitianCurvature& curvature) {
  const GridField& star = bundle.star_ricci;
  const GridField& corr = bundle.correction;
  if (star.toric() != curvature.rho.toric()) throw std::invalid_argument("ricci relation: toric flags differ");
  const int d = star.chart().dim();
  RicciRelationReport out;
  out.residual = GridField(star.chart_ptr(), Shape::TwoForm, star.toric());
  std::fill(out.residual.data().begin(), out.residual.data().end(), std::nan(""));
  const Region region = star.valid().intersect(curvature.rho.valid());
  out.residual.set_valid(region);
  region.for_each(
      [&](std::span<const int> idx) {
        const double* rs = star.at(idx);
        const double* rc = corr.at(idx);
        const double* rn = curvature.rho.at(idx);
        double* res = out.residual.at(idx);
        for (int c = 0; c < d * d; ++c) {
          res[c] = rn[c] - rs[c] + 0.25 * rc[c];
          out.max_residual = std::max(out.max_residual, std::abs(res[c]));
          out.max_correction = std::max(out.max_correction, std::abs(rc[c]));
          out.max_star_minus_nabla = std::max(out.max_star_minus_nabla, std::abs(rs[c] - rn[c]));
        }
      },
      star.toric(), star.chart().n());
  return out;
}

// ------------------------------------------------------------ scalars

ExpressionScalar::ExpressionScalar(expr::Expression e, ChartPtr chart) : e_(std::move(e)), chart_(std::move(chart)) {}

double ExpressionScalar::jet_at(std::span<const int> idx, double* grad, double* hess) const {
  const int d = chart_->dim();
  std::array<double, kMaxDim> x{};
  chart_->coordinates(idx, std::span<double>(x.data(), d));
  std::array<Jet, kMaxDim> xs;
  for (int a = 0; a < d; ++a) xs[a] = Jet::variable(d, a, x[a]);
  const Jet v = e_.eval(std::span<const Jet>(xs.data(), d));
  for (int a = 0; a < d; ++a) {
    grad[a] = v.dim() ? v.grad(a) : 0.0;
    for (int b = 0; b < d; ++b) hess[a * d + b] = v.dim() ? v.hess(a, b) : 0.0;
  }
  return v.value();
}

SampledScalar::SampledScalar(GridField f) : f_(std::move(f)) {
  if (f_.shape() != Shape::Scalar) throw std::invalid_argument("sampled scalar needs a scalar field");
}

Region SampledScalar::region() const { return f_.valid().shrunk(f_.chart(), 1); }

double SampledScalar::jet_at(std::span<const int> idx, double* grad, double* hess) const {
  const int d = f_.chart().dim();
  for (int a = 0; a < d; ++a) {
    grad[a] = fd_first(f_, idx, 0, a);
    for (int b = a; b < d; ++b) hess[a * d + b] = hess[b * d + a] = fd_second(f_, idx, 0, a, b);
  }
  return f_.at(idx)[0];
}

namespace {

// X = grad_ω f: X^{z_i} = −f_{t_i}, X^{t_i} = f_{z_i}.
void hamiltonian_field(int n, const double* grad, double* X) {
  for (int i = 0; i < n; ++i) {
    X[i] = -grad[n + i];
    X[n + i] = grad[i];
  }
}

// ∂_a X^c
void hamiltonian_field_partial(int n, const double* hess, double* dX) {
  const int d = 2 * n;
  for (int a = 0; a < d; ++a) {
    for (int i = 0; i < n; ++i) {
      dX[a * d + i] = -hess[a * d + n + i];
      dX[a * d + n + i] = hess[a * d + i];
    }
  }
}

template <class Kernel>
GridField scalar_kernel_field(const JetProvider& provider, const ScalarJets& f, Shape shape, Kernel&& kernel) {
  const bool toric = provider.toric() && f.toric();
  const Region region = provider.region().intersect(f.region());
  if (provider.toric() && !toric) {
    const FullGridJets full(provider);
    return evaluate_field(full, shape, 0, region, true, kernel);
  }
  return evaluate_field(provider, shape, 0, region, true, kernel);
}

}  // namespace

GridField laplacian(const JetProvider& provider, const ScalarJets& f) {
  const int d = provider.chart()->dim();
  return scalar_kernel_field(provider, f, Shape::Scalar, [&](const MetricJet& m, std::span<const int> idx, double* v) {
    std::array<double, kMaxDim> grad{};
    std::array<double, kMaxDim * kMaxDim> hess{}, g{}, gi{};
    f.jet_at(idx, grad.data(), hess.data());
    metric_point(m, g.data());
    if (!dense::invert(g.data(), gi.data(), d)) throw std::domain_error("singular metric");
    // g^{ab} Γ^c_ab = g^{ab} g^{ce} Γ_{e,ab}
    double lap = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        const double gab = gi[a * d + b];
        if (gab == 0.0) continue;
        double conn = 0.0;
        for (int c = 0; c < d; ++c) {
          for (int e = 0; e < d; ++e) {
            conn += grad[c] * gi[c * d + e] * 0.5 * (m.dg(a, e, b) + m.dg(b, e, a) - m.dg(e, a, b));
          }
        }
        lap -= gab * (hess[a * d + b] - conn);
      }
    }
    v[0] = lap;
  });
}

KillingReport killing_residual(const JetProvider& provider, const ScalarJets& f) {
  const int n = provider.chart()->n(), d = 2 * n;
  GridField both = scalar_kernel_field(provider, f, Shape::Vector, [&](const MetricJet& m, std::span<const int> idx,
                                                                        double* v) {
    std::array<double, kMaxDim> grad{}, X{};
    std::array<double, kMaxDim * kMaxDim> hess{}, dX{}, g{};
    f.jet_at(idx, grad.data(), hess.data());
    hamiltonian_field(n, grad.data(), X.data());
    hamiltonian_field_partial(n, hess.data(), dX.data());
    metric_point(m, g.data());
    double worst = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) {
          s += X[c] * m.dg(c, a, b) + g[c * d + b] * dX[a * d + c] + g[a * d + c] * dX[b * d + c];
        }
        worst = std::max(worst, std::abs(s));
      }
    }
    double size = 0.0;
    for (int a = 0; a < d; ++a) size = std::max(size, std::abs(X[a]));
    std::fill(v, v + d, 0.0);
    v[0] = worst;
    v[1] = size;
  });
  KillingReport out;
  out.residual = slice(both, 0, Shape::Scalar);
  out.max_residual = max_over(both, 0);
  out.max_field = max_over(both, 1);
  return out;
}

MomentumReport momentum_ricci_residual(const JetProvider& provider, const HermitianCurvature& curvature,
                                 const ScalarJets& f, double killing_tolerance) {
  const int n = provider.chart()->n(), d = 2 * n;
  MomentumReport out;
  const KillingReport killing = killing_residual(provider, f);
  out.killing = killing.max_residual;
  out.killing_ok = killing.max_residual <= killing_tolerance;

  const GridField lap = laplacian(provider, f);
  std::vector<GridField> dlap;
  dlap.reserve(d);
  for (int a = 0; a < d; ++a) dlap.push_back(fd_partial(lap, a));
  Region region = dlap[0].valid();
  for (int a = 1; a < d; ++a) region = region.intersect(dlap[a].valid());
  region = region.intersect(curvature.rho.valid()).intersect(f.region());

  const bool toric = lap.toric();
  if (!curvature.rho.toric() && toric) {
    throw std::invalid_argument("momentum identity: t-dependent curvature with a toric Laplacian");
  }
  out.residual = GridField(provider.chart(), Shape::Vector, toric);
  std::fill(out.residual.data().begin(), out.residual.data().end(), std::nan(""));
  out.residual.set_valid(region);
  region.for_each(
      [&](std::span<const int> idx) {
        std::array<double, kMaxDim> grad{}, X{};
        std::array<double, kMaxDim * kMaxDim> hess{};
        f.jet_at(idx, grad.data(), hess.data());
        hamiltonian_field(n, grad.data(), X.data());
        const double* rho = curvature.rho.at(idx);
        double* res = out.residual.at(idx);
        for (int e = 0; e < d; ++e) {
          double rx = 0.0;
          for (int a = 0; a < d; ++a) rx += X[a] * rho[a * d + e];
          res[e] = -0.5 * dlap[e].at(idx)[0] - rx;
          out.max_residual = std::max(out.max_residual, std::abs(res[e]));
        }
      },
      toric, n);
  return out;
}

LeBrunReport lebrun_saturation_report(const CurvatureBundle& bundle, const HermitianCurvature& curvature,
                                      double s_tolerance, double eigen_tolerance) {
  if (bundle.wplus.nodes() == 0) throw std::invalid_argument("LeBrun report needs a 4-dimensional chart");
  LeBrunReport out;
  out.s_mean = trapezoid_mean(curvature.s);
  out.s_stddev = trapezoid_stddev(curvature.s);
  out.s_variation = 0.0;
  double max_s = 0.0;
  curvature.s.valid().for_each(
      [&](std::span<const int> idx) {
        const double v = curvature.s.at(idx)[0];
        out.s_variation = std::max(out.s_variation, std::abs(v - out.s_mean));
        max_s = std::max(max_s, std::abs(v));
      },
      curvature.s.toric(), curvature.s.chart().n());
  out.s_negative = out.s_mean < 0.0;
  out.eigenform_residual = bundle.omega_residual.max_abs();
  out.degenerate_nodes = bundle.degenerate_nodes;
  out.omega_not_lowest = bundle.omega_not_lowest;
  out.degenerate_case = max_s < 1e-12 && bundle.wplus.max_abs() < 1e-12;
  out.pass = out.degenerate_case || (out.s_variation < s_tolerance && out.s_negative &&
                                     out.eigenform_residual < eigen_tolerance && out.omega_not_lowest == 0);
  return out;
}

}  // namespace akcurv
