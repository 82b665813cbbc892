#include <akcurv/localization.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace akcurv::localization {

namespace {

double expm1_(double x) { return std::expm1(x); }

Complex expm1_(Complex x) {
  if (std::abs(x) < 1e-5) return x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x / 24.0)));
  return std::exp(x) - 1.0;
}

bool is_zero(double x) { return x == 0.0; }
bool is_zero(Complex x) { return x == Complex(0.0); }

// ∫_lo^hi e^{−a z} dz
template <class T>
T interval_integral(T a, double lo, double hi) {
  if (is_zero(a)) return T(hi - lo);
  return std::exp(-a * lo) * (-expm1_(-a * (hi - lo))) / a;
}

// Σ coefficient · x^power · e^{rate x}
template <class T>
struct ExpPoly {
  struct Term {
    T coefficient;
    int power;
    T rate;
  };
  std::vector<Term> terms;

  T eval(double x) const {
    T total(0.0);
    for (const Term& t : terms) total += t.coefficient * std::pow(x, t.power) * std::exp(t.rate * x);
    return total;
  }
};

double factorial(int k) {
  double r = 1.0;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

// (x^m e^{ax}) ⋆ (x^k e^{bx}) = ∫_0^x y^m e^{ay} (x − y)^k e^{b(x−y)} dy, from
// the partial fractions of m! k! / ((p − a)^{m+1} (p − b)^{k+1}).
template <class T>
void convolve_monomials(int m, T a, int k, T b, T scale, std::vector<typename ExpPoly<T>::Term>& out) {
  const double mk = factorial(m) * factorial(k);
  if (a == b) {
    out.push_back({scale * T(mk / factorial(m + k + 1)), m + k + 1, a});
    return;
  }
  const int M = m + 1, N = k + 1;
  // A_{M−r} = (−1)^r C(N+r−1, r) (a − b)^{−N−r}
  for (int r = 0; r < M; ++r) {
    const int j = M - r;
    const T A = (r % 2 ? -1.0 : 1.0) * binomial(N + r - 1, r) * std::pow(a - b, -(N + r));
    out.push_back({scale * T(mk) * A / factorial(j - 1), j - 1, a});
  }
  for (int r = 0; r < N; ++r) {
    const int j = N - r;
    const T B = (r % 2 ? -1.0 : 1.0) * binomial(M + r - 1, r) * std::pow(b - a, -(M + r));
    out.push_back({scale * T(mk) * B / factorial(j - 1), j - 1, b});
  }
}

// ∫_{Σz ≤ s, z ≥ 0} e^{−Σ a_i z_i} dz as a function of s: F_0 = 1,
// F_i = e^{−a_i x} ⋆ F_{i−1}.
template <class T>
T simplex_integral(const std::vector<T>& a, double s) {
  ExpPoly<T> F;
  F.terms.push_back({T(1.0), 0, T(0.0)});
  for (const T& ai : a) {
    ExpPoly<T> next;
    for (const auto& t : F.terms) convolve_monomials<T>(0, -ai, t.power, t.rate, t.coefficient, next.terms);
    F = std::move(next);
  }
  return F.eval(s);
}

template <class T>
T lhs_impl(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c, T h) {
  const int n = polytope.n();
  if (static_cast<int>(X.size()) != n) throw LocalizationError("direction X has the wrong dimension");
  if (is_zero(h)) throw LocalizationError("h = 0 is not allowed (the vertex sum uses inverse powers of h)");
  std::vector<T> a(n);
  for (int i = 0; i < n; ++i) a[i] = h * static_cast<double>(X[i]);
  T integral(1.0);
  if (polytope.kind() == toric::PolytopeKind::Simplex) {
    integral = simplex_integral(a, to_double(polytope.scale()));
  } else {
    for (int i = 0; i < n; ++i) {
      integral *= interval_integral(a[i], to_double(polytope.lo()[i]), to_double(polytope.hi()[i]));
    }
  }
  return std::pow(2.0 * std::numbers::pi, n) * std::exp(-h * to_double(c)) * integral;
}

template <class T>
T rhs_impl(const FixedPointData& data, T h) {
  if (is_zero(h)) throw LocalizationError("h = 0 is not allowed (the vertex sum uses inverse powers of h)");
  std::vector<const FixedPoint*> order;
  for (const FixedPoint& p : data.points) {
    for (const BigInt& k : p.weights) {
      if (k == 0) throw LocalizationError("fixed point with a zero weight");
    }
    order.push_back(&p);
  }
  std::sort(order.begin(), order.end(), [](const FixedPoint* x, const FixedPoint* y) {
    if (x->momentum != y->momentum) return x->momentum < y->momentum;
    return x->weights < y->weights;
  });
  T total(0.0);
  for (const FixedPoint* p : order) {
    T term = std::exp(-h * to_double(p->momentum));
    for (const BigInt& k : p->weights) term /= h * k.convert_to<double>();
    total += term;
  }
  return total;
}

}  // namespace

FixedPointData fixed_points(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c) {
  const int n = polytope.n();
  if (static_cast<int>(X.size()) != n) throw LocalizationError("direction X has the wrong dimension");
  FixedPointData data;
  const auto vertices = polytope.vertices();
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    FixedPoint p;
    p.momentum = c;
    for (int i = 0; i < n; ++i) p.momentum += Rational(X[i]) * vertices[v][i];
    for (const auto& edge : polytope.edges_at(v)) {
      BigInt k = 0;
      for (int i = 0; i < n; ++i) k += BigInt(X[i]) * edge[i];
      if (k == 0) throw LocalizationError("X is orthogonal to an edge; fixed points are not isolated");
      p.weights.push_back(k);
    }
    data.points.push_back(std::move(p));
  }
  return data;
}

double dh_lhs(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c, double h) {
  return lhs_impl<double>(polytope, X, c, h);
}

Complex dh_lhs(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c, Complex h) {
  return lhs_impl<Complex>(polytope, X, c, h);
}

double dh_rhs(const FixedPointData& data, double h) { return rhs_impl<double>(data, h); }
Complex dh_rhs(const FixedPointData& data, Complex h) { return rhs_impl<Complex>(data, h); }

double calibration_per_circle() {
  static const double value = [] {
    const toric::Polytope interval = toric::Polytope::interval(0, 1);
    const std::vector<long> X{1};
    return dh_rhs(fixed_points(interval, X), 1.0) / dh_lhs(interval, X, 0, 1.0);
  }();
  return value;
}

DhReport dh_check(const toric::Polytope& polytope, const std::vector<long>& X, const Rational& c,
                  const FixedPointData& data, const std::vector<Complex>& hs, double tolerance) {
  DhReport out;
  out.calibration = calibration_per_circle();
  out.tolerance = tolerance;
  const double factor = std::pow(out.calibration, polytope.n());
  for (const Complex& h : hs) {
    DhRow row;
    row.h = h;
    row.lhs = factor * dh_lhs(polytope, X, c, h);
    row.rhs = dh_rhs(data, h);
    row.relative = std::abs(row.lhs) > 0.0 ? std::abs(row.lhs - row.rhs) / std::abs(row.lhs) : std::abs(row.rhs);
    out.max_relative = std::max(out.max_relative, row.relative);
    out.rows.push_back(row);
  }
  out.pass = !out.rows.empty() && out.max_relative < tolerance;
  return out;
}

}  // namespace akcurv::localization
