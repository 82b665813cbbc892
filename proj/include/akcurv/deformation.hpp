#pragma once

// Ricci-preserving deformations of a diagonal toric metric on a 4-dimensional
// chart: H^ε = H + εU with U_ij = f_ij(z1) h_ij(z2) and the chain
//
//   f12 = f11′/β,  f22 = f11″/(αβ),  h12 = −h22′/α,  h11 = h22″/(αβ),
//
// which makes Σ_k (f_ik h_ik)_{,kj} vanish term by term, so ρ^∇ (toric
// formula) does not move. G^ε = (H^ε)⁻¹ and P = 0.

#include <akcurv/chart.hpp>
#include <akcurv/curvature.hpp>
#include <akcurv/expr.hpp>
#include <akcurv/metric.hpp>
#include <akcurv/rational.hpp>

#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace akcurv::deformation {

// A function of one z variable, taken as zero outside [lo, hi] when a
// support is given.
struct Profile {
  expr::Expression e;
  int variable = 0;  // z index
  std::optional<std::pair<double, double>> support;

  bool inside(double z) const { return !support || (z >= support->first && z <= support->second); }
  std::string str() const;
};

// amplitude · (((z − a)(b − z)) / q²)^power with q = (b − a)/2, zero outside
// [a, b]; C^{power−1} across the ends.
Profile bump_profile(int n, int variable, const Rational& a, const Rational& b, const Rational& amplitude,
                     int power = 8);

struct DeformationSpec {
  Rational alpha = 1;
  Rational beta = 1;
  Profile f11;  // in z1
  Profile h22;  // in z2
  double epsilon = 0.0;
  MetricModelPtr base;  // diagonal toric, n = 2

  // Hyperbolic-product base with degree-8 bumps supported in [1.3, 2.1].
  static DeformationSpec defaults();
};

struct Chain {
  Profile f11, f12, f22, h11, h12, h22;
  // U_ij as a symbolic product (inside the supports).
  expr::Expression entry(int i, int j) const;
};

// Throws std::invalid_argument when α or β is zero, the base is not a
// diagonal toric n = 2 model, or a profile depends on the wrong variable.
Chain derive_chain(const DeformationSpec& spec);

class DeformedMetric : public MetricModel {
 public:
  DeformedMetric(MetricModelPtr base, Chain chain, double epsilon);

  int n() const override { return 2; }
  bool t_independent() const override { return true; }
  void values(std::span<const double> x, MetricJet& out) const override;
  void jet(std::span<const double> x, MetricJet& out) const override;
  std::string describe() const override;
  std::vector<std::string> entry_strings(Block b) const override;

  double epsilon() const { return epsilon_; }
  const Chain& chain() const { return chain_; }
  const MetricModel& base() const { return *base_; }
  // U at a point (row-major 2×2).
  void U(std::span<const double> x, double* out) const;

 private:
  MetricModelPtr base_;
  Chain chain_;
  double epsilon_;
};

struct AdmissibleRange {
  double epsilon_min = -std::numeric_limits<double>::infinity();  // H + εU > 0 on the grid for ε in
  double epsilon_max = std::numeric_limits<double>::infinity();   // (epsilon_min, epsilon_max)
  double min_eigenvalue_U = 0.0;
  bool u_nonnegative = false;  // informational only
};

// Bisection on the concave function ε ↦ min over z-nodes of λ_min(H + εU).
AdmissibleRange admissible_epsilon(const DeformationSpec& spec, const DarbouxChart& chart);

class PositivityError : public std::runtime_error {
 public:
  PositivityError(const std::string& message, AdmissibleRange range)
      : std::runtime_error(message), range_(range) {}
  const AdmissibleRange& range() const { return range_; }

 private:
  AdmissibleRange range_;
};

// Throws PositivityError when spec.epsilon lies outside the admissible range
// on the chart.
std::shared_ptr<const DeformedMetric> build_deformation(const DeformationSpec& spec, const DarbouxChart& chart);

struct ChainReport {
  double max_residual = 0.0;  // max_ij |Σ_k (f_ik h_ik)_{,kj}|
  double max_term = 0.0;      // largest single term, for scale
  int points = 0;
  bool exact = false;         // polynomial profiles: residual expanded and evaluated exactly
};

// Symbolic second derivatives at seeded random points of the support box.
ChainReport chain_residual(const Chain& chain, int points = 100, std::uint64_t seed = 7);

struct InvarianceReport {
  double rho_residual = 0.0;  // max |ρ^∇(H^ε) − ρ^∇(H)|
  double s_residual = 0.0;    // max |s^∇(H^ε) − s^∇(H)|
  double s_mean = 0.0;        // of the deformed metric
  double nijenhuis_base = 0.0;
  double nijenhuis = 0.0;     // max |N|_g of J_ε
};

InvarianceReport verify_ricci_invariance(const JetProvider& base, const JetProvider& deformed);

}  // namespace akcurv::deformation
