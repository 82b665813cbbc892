#pragma once

// Both sides of the Duistermaat-Heckman formula for a circle action with
// isolated fixed points on toric data:
//
//   LHS(h) = ∫_M e^{−h f^X} ω^n/n! = (2π)^n ∫_Δ e^{−h(⟨X, z⟩ + c)} dz
//   RHS(h) = Σ_v Π_i 1/(k_i^v h) · e^{−h f^X(v)}
//
// with one fixed point per vertex v and weights k_i^v = ⟨X, u_i⟩ over the
// primitive edge vectors u_i leaving v. The two sides differ by one factor
// per circle, calibrated once on the interval and frozen.

#include <akcurv/rational.hpp>
#include <akcurv/toric.hpp>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace akcurv::localization {

using Complex = std::complex<double>;

struct FixedPoint {
  Rational momentum;            // f^X at the point
  std::vector<BigInt> weights;  // all non-zero
};

struct FixedPointData {
  std::vector<FixedPoint> points;
};

class LocalizationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Vertex data of the action generated by X; throws when X is orthogonal to
// an edge (the fixed points are then not isolated).
FixedPointData fixed_points(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c = 0);

// Geometric left side, including the (2π)^n fibre volume. Throws for h = 0.
double dh_lhs(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c, double h);
Complex dh_lhs(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c, Complex h);

// Vertex sum; the terms are added in a canonical order so the result does
// not depend on how the points are labelled. Throws for a zero weight or h = 0.
double dh_rhs(const FixedPointData& data, double h);
Complex dh_rhs(const FixedPointData& data, Complex h);

// RHS/LHS on the interval [0, 1] with X = 1 at h = 1: the factor carried by
// each circle. Computed once and frozen.
double calibration_per_circle();

struct DhRow {
  Complex h;
  Complex lhs;  // calibrated
  Complex rhs;
  double relative = 0.0;  // |LHS − RHS| / |LHS|
};

struct DhReport {
  std::vector<DhRow> rows;
  double calibration = 0.0;  // per circle
  double max_relative = 0.0;
  double tolerance = 1e-10;
  bool pass = false;
};

DhReport dh_check(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c,
                  const FixedPointData& data, const std::vector<Complex>& hs, double tolerance = 1e-10);

}  // namespace akcurv::localization
