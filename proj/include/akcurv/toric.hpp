#pragma once

// Moment polytopes, exact polynomial integration, the L² projection onto
// affine functions of the momenta, and the Futaki-Mabuchi form.
//
// Measure: dz on the polytope. The fibre volume (2π)^n and the 1/n! of
// ω^n/n! are carried symbolically; projections do not depend on them.

#include <akcurv/chart.hpp>
#include <akcurv/expr.hpp>
#include <akcurv/metric.hpp>
#include <akcurv/rational.hpp>

#include <map>
#include <string>
#include <vector>

namespace akcurv::toric {

class Polynomial {
 public:
  using Exponents = std::vector<int>;

  explicit Polynomial(int n = 1) : n_(n) {}
  static Polynomial constant(int n, const Rational& c);
  static Polynomial variable(int n, int i);
  // Accepts +, −, ×, ÷ by constants and non-negative integer powers of z
  // variables; anything else (t variables, transcendental functions) throws.
  static Polynomial from_expression(const expr::Expression& e);

  int n() const { return n_; }
  const std::map<Exponents, Rational>& terms() const { return terms_; }
  int degree() const;
  bool is_zero() const { return terms_.empty(); }

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(const Rational& s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(Polynomial a, const Rational& s) { return a *= s; }
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.n_ == b.n_ && a.terms_ == b.terms_; }

  double eval(const double* z) const;
  Rational eval(const std::vector<Rational>& z) const;
  std::string str() const;

 private:
  void add_term(const Exponents& e, const Rational& c);
  int n_;
  std::map<Exponents, Rational> terms_;
};

enum class PolytopeKind { Interval, Box, Simplex };

// Interval (n = 1) and boxes are [lo_i, hi_i] products; the simplex is
// {z_i ≥ 0, Σ z_i ≤ scale}.
class Polytope {
 public:
  static Polytope interval(const Rational& lo, const Rational& hi);
  static Polytope box(std::vector<Rational> lo, std::vector<Rational> hi);
  static Polytope simplex(int n, const Rational& scale);

  PolytopeKind kind() const { return kind_; }
  int n() const { return n_; }
  const std::vector<Rational>& lo() const { return lo_; }
  const std::vector<Rational>& hi() const { return hi_; }
  const Rational& scale() const { return scale_; }

  std::vector<std::vector<Rational>> vertices() const;
  // Primitive integer edge directions leaving vertex v.
  std::vector<std::vector<BigInt>> edges_at(std::size_t v) const;
  Rational volume() const;
  std::string describe() const;

 private:
  PolytopeKind kind_ = PolytopeKind::Interval;
  int n_ = 1;
  std::vector<Rational> lo_, hi_;
  Rational scale_ = 1;
};

// Exact ∫_Δ p dz.
Rational integrate(const Polynomial& p, const Polytope& polytope);

// c0 + Σ c_i z_i
struct AffineFunction {
  Rational c0 = 0;
  std::vector<Rational> c;

  static AffineFunction momentum(const std::vector<long>& direction);  // ⟨X, z⟩
  Polynomial polynomial() const;
  double eval(const double* z) const;
};

struct ExactProjection {
  Rational mean;                 // ∫s / vol
  AffineFunction z;              // projection of s − mean, itself zero-mean
  Rational residual_squared;     // ∫ (s − mean − z)² dz
  double residual() const;
};

// Orthogonal projection of the zero-mean part of s onto span{z_i − z̄_i}.
ExactProjection project_affine(const Polynomial& s, const Polytope& polytope);

struct SampledProjection {
  double mean = 0.0;
  double c0 = 0.0;  // constant term of the zero-mean affine function
  std::vector<double> c;
  double residual = 0.0;  // sqrt of ∫ (s − mean − z)² dz, trapezoid
};

// Same projection for a toric scalar field over its valid region (a box in
// z), with trapezoid quadrature.
SampledProjection project_affine(const GridField& s);

// Φ(X, Y) = rational · (2π)^two_pi_power.
struct FutakiValue {
  Rational rational;
  int two_pi_power = -2;
  double value() const;
};

// Φ(X, Y) = (2π)⁻² ∫_M f^X f^Y ω^n/(2π)^n = (2π)⁻² n! ∫_Δ f^X f^Y dz with the
// means of f^X, f^Y subtracted exactly.
FutakiValue futaki_mabuchi(const AffineFunction& fX, const AffineFunction& fY, const Polytope& polytope);

struct FutakiGram {
  std::vector<FutakiValue> entries;  // n×n over the coordinate directions
  bool symmetric = false;
  bool positive_definite = false;    // exact LDLᵀ pivots
  std::vector<Rational> pivots;
};
FutakiGram futaki_gram(const Polytope& polytope);

// Toric Kähler metric from a symplectic potential u(z): G = Hess u,
// H = G⁻¹, P = 0.
class PotentialMetric : public MetricModel {
 public:
  explicit PotentialMetric(expr::Expression u, std::string label = "potential");
  int n() const override { return n_; }
  bool t_independent() const override { return true; }
  void values(std::span<const double> x, MetricJet& out) const override;
  void jet(std::span<const double> x, MetricJet& out) const override;
  std::string describe() const override { return label_; }
  std::vector<std::string> entry_strings(Block b) const override;
  const expr::Expression& potential() const { return u_; }

 private:
  expr::Expression u_;
  int n_;
  std::string label_;
  std::vector<expr::Expression> hess_;  // G entries
};

// u = (z1⁴ + .. + zn⁴)/12 + ½ Σ z_i² + ¼ Σ_{i<j} z_i² z_j²: a non-quadratic
// convex potential whose metric exercises genuine discretisation error.
expr::Expression quartic_potential(int n);

}  // namespace akcurv::toric
