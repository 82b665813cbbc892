#pragma once

// Hermitian Ricci form ρ^∇ and hermitian scalar curvature s^∇ of an
// ω-compatible metric in Darboux coordinates.
//
// Notation: a comma is ∂/∂z, a superscript is ∂/∂t, H^{ij} is (H⁻¹)_ij and
// all indices run over 1..n. The mixed quantities
//
//   Q_b = Σ_{i,j,l} H^{ij} P_{lj} ∂_b H_{il},   T(a, b) = ∂_a Q_b
//
// are expanded with the product rule (∂H⁻¹ = −H⁻¹ ∂H H⁻¹). The general
// formula is evaluated from the explicit term table below (see
// docs/conventions.md for the derivation checks):
//
//   ρ(∂z_k, ∂t_l) = ½ c_kl
//     c_kl = Σ_i [ P_ki,i^l − G_ki^il + P_il,k^i − H_li,ik ] + T(t_l, z_k) − T(z_k, t_l)
//   ρ(∂z_k, ∂z_l) = ½ (d_kl − d_lk)
//     d_kl = Σ_i [ P_ki,il − P_ii,kl − G_ki,l^i ] + T(z_l, z_k)
//   ρ(∂t_k, ∂t_l) = ½ (e_kl − e_lk)
//     e_kl = Σ_i [ P_il^ik + P_ii^lk − H_li,i^k ] − T(t_k, t_l)
//   s = Σ_{i,j} [ −G_ij^ij − H_ij,ij + P_ij,j^i + P_ji,i^j ] + Σ_k [ T(t_k, z_k) − T(z_k, t_k) ]
//
// Toric fast paths (t-independent data):
//   ρ = −½ Σ H_li,ik dz_k∧dt_l + ½ Σ (P_ki,il − P_ii,kl) dz_k∧dz_l + ½ Σ (Q_k),r dz_k∧dz_r
//   s = −Σ H_ij,ij

#include <akcurv/chart.hpp>
#include <akcurv/metric.hpp>

#include <string>
#include <vector>

namespace akcurv {

// One entry of the term table: sign · ∂_{d1} ∂_{d2} X_{row col}, where
// every slot names either a free index (k, l) or a summed one (i, j).
struct DerivativeSlot {
  char kind;  // 'z' or 't'
  char index;
};

struct PlainTerm {
  int sign;
  Block block;
  DerivativeSlot first, second;
  char row, col;
};

// sign · T(outer, inner)
struct MixedTerm {
  int sign;
  DerivativeSlot outer, inner;
};

struct TermGroup {
  const char* name;
  const char* summed;  // summation indices of the plain terms, e.g. "i" or "ij"
  std::vector<PlainTerm> plain;
  std::vector<MixedTerm> mixed;
};

// The groups c (zt), d (zz), e (tt) and the scalar group s.
const TermGroup& term_group(char which);

enum class Formula { General, Toric };
const char* formula_name(Formula f);

// ρ as a full antisymmetric 2n×2n array with ρ_ab = ρ(∂_a, ∂_b).
void hermitian_ricci_point(const MetricJet& jet, double* rho);
double hermitian_scalar_point(const MetricJet& jet);
// Require t-independent jets.
void hermitian_ricci_toric_point(const MetricJet& jet, double* rho);
double hermitian_scalar_toric_point(const MetricJet& jet);

struct HermitianCurvature {
  GridField rho;  // TwoForm
  GridField s;    // Scalar
  std::string path;
  Formula formula = Formula::General;
};

HermitianCurvature hermitian_curvature(const JetProvider& provider, Formula formula = Formula::General);
// Evaluates only at the nodes of `region` (e.g. a strided subset).
HermitianCurvature hermitian_curvature(const JetProvider& provider, Formula formula, const Region& region);

// Trapezoid-weighted mean over a field's valid region (z-grid for toric
// fields; periodic axes carry uniform weights).
double trapezoid_mean(const GridField& scalar);
double trapezoid_stddev(const GridField& scalar);

struct EinsteinReport {
  double mean_s = 0.0;
  double residual = 0.0;             // max |ρ − (s̄/2n) ω|
  double anti_invariant_norm = 0.0;  // max |½(ρ − ρ(J·, J·))|
  double s_variation = 0.0;          // max |s − s̄|
};

EinsteinReport hermitian_einstein_residual(const JetProvider& provider, const HermitianCurvature& curvature);

// Λ_ω ρ^∇ at every node and the consistency residual |s − 2Λ_ω ρ|.
struct ConsistencyReport {
  GridField lambda_rho;
  double max_residual = 0.0;
};
ConsistencyReport scalar_consistency(const JetProvider& provider, const HermitianCurvature& curvature);

}  // namespace akcurv
