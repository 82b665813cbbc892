#pragma once

// Levi-Civita data and curvature of g_full, pointwise from metric jets.
//
// Pinned conventions (docs/conventions.md):
//   Γ^a_bc = ½ g^{ad} (∂_b g_dc + ∂_c g_db − ∂_d g_bc)
//   R(X, Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y],  Rup[b][c][a][e] = (R(∂_a, ∂_e)∂_c)^b
//   Rl_{acde} = g(R(∂_d, ∂_e)∂_c, ∂_a),   Ric_ce = R^b_{cbe},  s = g^{ce} Ric_ce
//   curvature operator ⟨R(X∧Y), Z∧W⟩ = g(R(X, Y)W, Z)  (positive on round spheres)
//   ρ⋆(X, Y) = ⟨R(X∧Y), ω⟩ = ½ tr(J ∘ R(X, Y))
//   ρ_Ric(X, Y) = Ric(JX, Y)
//   (D_a J)^b_c = ∂_a J^b_c + Γ^b_ad J^d_c − Γ^d_ac J^b_d
//   corr(X, Y) = tr(J ∘ D_X J ∘ D_Y J),  relation residual = ρ^∇ − ρ⋆ + ¼ corr
//   Δf = −g^{ab}(∂_a∂_b f − Γ^c_ab ∂_c f)  (non-negative spectrum)
//   grad_ω f = Σ f_{z_i} ∂t_i − f_{t_i} ∂z_i, so ω(grad_ω f, ·) = −df

#include <akcurv/chart.hpp>
#include <akcurv/curvature.hpp>
#include <akcurv/expr.hpp>
#include <akcurv/metric.hpp>

#include <array>
#include <optional>
#include <string>

namespace akcurv {

struct PointGeometry {
  int d = 0;
  std::array<double, kMaxDim * kMaxDim> g{}, gi{}, J{};
  std::array<double, kMaxDim * kMaxDim * kMaxDim> gamma{};  // [b][a][c] = Γ^b_ac
  std::array<double, kMaxDim * kMaxDim * kMaxDim> dJ{};     // [a][b][c] = ∂_a J^b_c
  std::array<double, kMaxDim * kMaxDim * kMaxDim> DJ{};     // [a][b][c] = (D_a J)^b_c
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> Rup{};  // [b][c][a][e]
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> Rl{};   // [a][c][d][e]
  std::array<double, kMaxDim * kMaxDim> ric{};
  double scalar = 0.0;

  // Fills everything from a jet with first and second derivatives.
  void compute(const MetricJet& jet);

  double G(int b, int a, int c) const { return gamma[(b * d + a) * d + c]; }
  double R(int b, int c, int a, int e) const { return Rup[((b * d + c) * d + a) * d + e]; }
  double Rlow(int a, int c, int dd, int e) const { return Rl[((a * d + c) * d + dd) * d + e]; }

  void ricci_form(double* out) const;
  void star_ricci(double* out) const;
  // corr_ab = tr(J ∘ D_a J ∘ D_b J)
  void correction(double* out) const;
  // max |R^a_bcd + R^a_cdb + R^a_dbc|
  double bianchi_residual() const;
  // max |∇_a g_bc| with ∂g from the jet
  double metric_compatibility_residual(const MetricJet& jet) const;
  // max_abc |(D_a J)^b_c|
  double dj_norm() const;
};

// Self-dual Weyl data on a 4-dimensional chart.
struct SelfDual {
  std::array<double, 9> W{};   // in the basis σ1 = ω/√2, σ2, σ3
  std::array<double, 3> eigenvalues{};  // ascending
  double trace = 0.0;
  double omega_residual = 0.0;  // |W⁺(ω) − e ω|_g, e the lowest eigenvalue
  bool lowest_degenerate = false;
  bool omega_lowest = false;  // ω spans an eigenline of the lowest eigenvalue
};
SelfDual self_dual_weyl(const PointGeometry& geo);

struct CurvatureOptions {
  bool store_riemann = false;
  bool store_christoffel = false;
};

struct CurvatureBundle {
  GridField christoffel;  // Rank3, [b][a][c]; empty unless requested
  GridField riemann;      // Rank4 Rl; empty unless requested
  GridField ricci;        // Matrix
  GridField scalar;       // Scalar
  GridField ricci0;       // Matrix, r − (s/d) g
  GridField ricci_form;   // TwoForm
  GridField star_ricci;   // TwoForm
  GridField correction;   // TwoForm, tr(J D_a J D_b J)
  GridField wplus;        // Custom 9, dimension 4 only
  GridField lowest;       // Scalar e(x), dimension 4 only
  GridField omega_residual;  // Scalar |W⁺(ω) − eω|, dimension 4 only
  double bianchi = 0.0;
  double nabla_g = 0.0;
  double max_wplus_trace = 0.0;
  std::size_t degenerate_nodes = 0;
  std::size_t omega_not_lowest = 0;
  std::string path;
};

CurvatureBundle riemann_pipeline(const JetProvider& provider, const CurvatureOptions& options = {});
CurvatureBundle riemann_pipeline(const JetProvider& provider, const CurvatureOptions& options, const Region& region);

struct RicciRelationReport {
  GridField residual;  // TwoForm
  double max_residual = 0.0;
  double max_correction = 0.0;
  double max_star_minus_nabla = 0.0;
};
RicciRelationReport ricci_relation_residual(const CurvatureBundle& bundle, const HermitianCurvature& curvature);

// Scalar functions with first and second partials at grid nodes.
class ScalarJets {
 public:
  virtual ~ScalarJets() = default;
  virtual Region region() const = 0;
  virtual bool toric() const = 0;  // independent of t
  // grad[a], hess[a*d+b]
  virtual double jet_at(std::span<const int> idx, double* grad, double* hess) const = 0;
};

class ExpressionScalar : public ScalarJets {
 public:
  ExpressionScalar(expr::Expression e, ChartPtr chart);
  Region region() const override { return Region::full(*chart_); }
  bool toric() const override { return e_.independent_of_t(); }
  double jet_at(std::span<const int> idx, double* grad, double* hess) const override;

 private:
  expr::Expression e_;
  ChartPtr chart_;
};

// Central differences of a sampled scalar; the region shrinks by one node.
class SampledScalar : public ScalarJets {
 public:
  explicit SampledScalar(GridField f);
  Region region() const override;
  bool toric() const override { return f_.toric(); }
  double jet_at(std::span<const int> idx, double* grad, double* hess) const override;
  const GridField& field() const { return f_; }

 private:
  GridField f_;
};

// Δf as a scalar field over the common region.
GridField laplacian(const JetProvider& provider, const ScalarJets& f);

struct KillingReport {
  GridField residual;  // Scalar, max_ab |(L_X g)_ab|
  double max_residual = 0.0;
  double max_field = 0.0;  // max |X| components, to tell X = 0 apart
};
// X = grad_ω f.
KillingReport killing_residual(const JetProvider& provider, const ScalarJets& f);

struct MomentumReport {
  GridField residual;  // Vector, −½ dΔf − ρ^∇(X, ·)
  double max_residual = 0.0;
  double killing = 0.0;
  bool killing_ok = true;
};
MomentumReport momentum_ricci_residual(const JetProvider& provider, const HermitianCurvature& curvature,
                                      const ScalarJets& f, double killing_tolerance);

struct LeBrunReport {
  double s_mean = 0.0;
  double s_stddev = 0.0;
  double s_variation = 0.0;
  bool s_negative = false;
  double eigenform_residual = 0.0;
  std::size_t degenerate_nodes = 0;
  std::size_t omega_not_lowest = 0;
  bool degenerate_case = false;  // W⁺ = 0 and s^∇ = 0 everywhere
  bool pass = false;
};
LeBrunReport lebrun_saturation_report(const CurvatureBundle& bundle, const HermitianCurvature& curvature,
                                      double s_tolerance, double eigen_tolerance);

}  // namespace akcurv
