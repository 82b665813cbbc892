#include <akcurv/dense.hpp>
#include <akcurv/jet.hpp>
#include <akcurv/toric.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace akcurv::toric {

// ------------------------------------------------------------ Polynomial

Polynomial Polynomial::constant(int n, const Rational& c) {
  Polynomial p(n);
  p.add_term(Exponents(n, 0), c);
  return p;
}

Polynomial Polynomial::variable(int n, int i) {
  if (i < 0 || i >= n) throw std::invalid_argument("polynomial variable out of range");
  Polynomial p(n);
  Exponents e(n, 0);
  e[i] = 1;
  p.add_term(e, 1);
  return p;
}

void Polynomial::add_term(const Exponents& e, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.n_ != n_) throw std::invalid_argument("polynomial dimensions differ");
  for (const auto& [e, c] : o.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.n_ != n_) throw std::invalid_argument("polynomial dimensions differ");
  for (const auto& [e, c] : o.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(const Rational& s) {
  if (s == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.n_ != b.n_) throw std::invalid_argument("polynomial dimensions differ");
  Polynomial r(a.n_);
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      Polynomial::Exponents e(ea);
      for (int i = 0; i < a.n_; ++i) e[i] += eb[i];
      r.add_term(e, ca * cb);
    }
  }
  return r;
}

double Polynomial::eval(const double* z) const {
  double total = 0.0;
  for (const auto& [e, c] : terms_) {
    double m = to_double(c);
    for (int i = 0; i < n_; ++i) m *= std::pow(z[i], e[i]);
    total += m;
  }
  return total;
}

Rational Polynomial::eval(const std::vector<Rational>& z) const {
  std::vector<std::vector<Rational>> powers(n_, std::vector<Rational>{Rational(1)});
  for (const auto& [e, c] : terms_) {
    for (int i = 0; i < n_; ++i) {
      while (static_cast<int>(powers[i].size()) <= e[i]) powers[i].push_back(powers[i].back() * z[i]);
    }
  }
  Rational total = 0;
  for (const auto& [e, c] : terms_) {
    Rational m = c;
    for (int i = 0; i < n_; ++i) {
      if (e[i] != 0) m *= powers[i][e[i]];
    }
    total += m;
  }
  return total;
}

std::string Polynomial::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream out;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) out << " + ";
    first = false;
    out << "(" << to_string(c) << ")";
    for (int i = 0; i < n_; ++i) {
      if (e[i] == 1) out << "*z" << i + 1;
      if (e[i] > 1) out << "*z" << i + 1 << "^" << e[i];
    }
  }
  return out.str();
}

namespace {

Polynomial from_node(const expr::Node& node, int n) {
  using expr::Op;
  switch (node.op) {
    case Op::Constant: return Polynomial::constant(n, node.value);
    case Op::Variable:
      if (node.variable >= n) throw std::invalid_argument("polynomial in z expected; found a t variable");
      return Polynomial::variable(n, node.variable);
    case Op::Neg: return from_node(*node.lhs, n) * Rational(-1);
    case Op::Add: return from_node(*node.lhs, n) + from_node(*node.rhs, n);
    case Op::Sub: return from_node(*node.lhs, n) - from_node(*node.rhs, n);
    case Op::Mul: return from_node(*node.lhs, n) * from_node(*node.rhs, n);
    case Op::Div: {
      const Polynomial den = from_node(*node.rhs, n);
      if (den.degree() != 0 || den.is_zero()) throw std::invalid_argument("polynomial division by a non-constant");
      return from_node(*node.lhs, n) * (Rational(1) / den.terms().begin()->second);
    }
    case Op::Pow: {
      if (node.exponent < 0) throw std::invalid_argument("negative power in a polynomial");
      const Polynomial base = from_node(*node.lhs, n);
      Polynomial r = Polynomial::constant(n, 1);
      for (int k = 0; k < node.exponent; ++k) r = r * base;
      return r;
    }
    default: throw std::invalid_argument("expression is not a polynomial in z");
  }
}

Rational factorial(int k) {
  Rational r = 1;
  for (int i = 2; i <= k; ++i) r *= i;
  return r;
}

}  // namespace

Polynomial Polynomial::from_expression(const expr::Expression& e) { return from_node(*e.root(), e.dimension()); }

// ------------------------------------------------------------ Polytope

Polytope Polytope::interval(const Rational& lo, const Rational& hi) {
  Polytope p = box({lo}, {hi});
  p.kind_ = PolytopeKind::Interval;
  return p;
}

Polytope Polytope::box(std::vector<Rational> lo, std::vector<Rational> hi) {
  if (lo.empty() || lo.size() != hi.size()) throw std::invalid_argument("box needs matching lo/hi vectors");
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("degenerate polytope");
  }
  Polytope p;
  p.kind_ = lo.size() == 1 ? PolytopeKind::Interval : PolytopeKind::Box;
  p.n_ = static_cast<int>(lo.size());
  p.lo_ = std::move(lo);
  p.hi_ = std::move(hi);
  return p;
}

Polytope Polytope::simplex(int n, const Rational& scale) {
  if (n < 1) throw std::invalid_argument("simplex dimension must be positive");
  if (!(scale > 0)) throw std::invalid_argument("degenerate polytope");
  Polytope p;
  p.kind_ = PolytopeKind::Simplex;
  p.n_ = n;
  p.scale_ = scale;
  p.lo_.assign(n, Rational(0));
  p.hi_.assign(n, scale);
  return p;
}

std::vector<std::vector<Rational>> Polytope::vertices() const {
  std::vector<std::vector<Rational>> out;
  if (kind_ == PolytopeKind::Simplex) {
    out.emplace_back(n_, Rational(0));
    for (int i = 0; i < n_; ++i) {
      std::vector<Rational> v(n_, Rational(0));
      v[i] = scale_;
      out.push_back(v);
    }
    return out;
  }
  for (unsigned mask = 0; mask < (1u << n_); ++mask) {
    std::vector<Rational> v(n_);
    for (int i = 0; i < n_; ++i) v[i] = (mask >> i) & 1u ? hi_[i] : lo_[i];
    out.push_back(v);
  }
  return out;
}

std::vector<std::vector<BigInt>> Polytope::edges_at(std::size_t v) const {
  std::vector<std::vector<BigInt>> out;
  if (kind_ == PolytopeKind::Simplex) {
    if (v == 0) {
      for (int i = 0; i < n_; ++i) {
        std::vector<BigInt> e(n_, 0);
        e[i] = 1;
        out.push_back(e);
      }
      return out;
    }
    const int j = static_cast<int>(v) - 1;
    for (int i = 0; i < n_; ++i) {
      std::vector<BigInt> e(n_, 0);
      e[j] = -1;
      if (i != j) e[i] = 1;
      out.push_back(e);
    }
    return out;
  }
  for (int i = 0; i < n_; ++i) {
    std::vector<BigInt> e(n_, 0);
    e[i] = (v >> i) & 1u ? -1 : 1;
    out.push_back(e);
  }
  return out;
}

Rational Polytope::volume() const {
  if (kind_ == PolytopeKind::Simplex) return rational_pow(scale_, static_cast<unsigned>(n_)) / factorial(n_);
  Rational v = 1;
  for (int i = 0; i < n_; ++i) v *= hi_[i] - lo_[i];
  return v;
}

std::string Polytope::describe() const {
  std::ostringstream out;
  if (kind_ == PolytopeKind::Simplex) {
    out << "simplex(n=" << n_ << ", scale=" << to_string(scale_) << ")";
    return out.str();
  }
  out << (kind_ == PolytopeKind::Interval ? "interval" : "box");
  for (int i = 0; i < n_; ++i) out << (i ? " x " : " ") << "[" << to_string(lo_[i]) << ", " << to_string(hi_[i]) << "]";
  return out.str();
}

Rational integrate(const Polynomial& p, const Polytope& polytope) {
  if (p.n() != polytope.n()) throw std::invalid_argument("polynomial and polytope dimensions differ");
  const int n = p.n();
  Rational total = 0;
  for (const auto& [e, c] : p.terms()) {
    Rational m = c;
    if (polytope.kind() == PolytopeKind::Simplex) {
      // ∫_{sΔ} z^α dz = s^{n+|α|} Π α_i! / (n + |α|)!
      int order = 0;
      for (int k : e) {
        order += k;
        m *= factorial(k);
      }
      m *= rational_pow(polytope.scale(), static_cast<unsigned>(n + order)) / factorial(n + order);
    } else {
      for (int i = 0; i < n; ++i) {
        const unsigned k = static_cast<unsigned>(e[i]) + 1;
        m *= (rational_pow(polytope.hi()[i], k) - rational_pow(polytope.lo()[i], k)) / Rational(k);
      }
    }
    total += m;
  }
  return total;
}

// ------------------------------------------------------------ projection

AffineFunction AffineFunction::momentum(const std::vector<long>& direction) {
  AffineFunction f;
  for (long x : direction) f.c.emplace_back(x);
  return f;
}

Polynomial AffineFunction::polynomial() const {
  const int n = static_cast<int>(c.size());
  Polynomial p = Polynomial::constant(n, c0);
  for (int i = 0; i < n; ++i) p += Polynomial::variable(n, i) * c[i];
  return p;
}

double AffineFunction::eval(const double* z) const {
  double v = to_double(c0);
  for (std::size_t i = 0; i < c.size(); ++i) v += to_double(c[i]) * z[i];
  return v;
}

double ExactProjection::residual() const { return std::sqrt(to_double(residual_squared)); }

namespace {

// Solves A x = b exactly (A n×n, row-major); throws when singular.
std::vector<Rational> solve_exact(std::vector<Rational> A, std::vector<Rational> b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    for (int r = col; r < n; ++r) {
      if (A[r * n + col] != 0) {
        pivot = r;
        break;
      }
    }
    if (pivot < 0) throw std::domain_error("Gram matrix singular (degenerate polytope)");
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(A[pivot * n + j], A[col * n + j]);
      std::swap(b[pivot], b[col]);
    }
    for (int r = 0; r < n; ++r) {
      if (r == col || A[r * n + col] == 0) continue;
      const Rational f = A[r * n + col] / A[col * n + col];
      for (int j = col; j < n; ++j) A[r * n + j] -= f * A[col * n + j];
      b[r] -= f * b[col];
    }
  }
  std::vector<Rational> x(n);
  for (int i = 0; i < n; ++i) x[i] = b[i] / A[i * n + i];
  return x;
}

}  // namespace

ExactProjection project_affine(const Polynomial& s, const Polytope& polytope) {
  const int n = polytope.n();
  const Rational vol = polytope.volume();
  ExactProjection out;
  const Rational total = integrate(s, polytope);
  out.mean = total / vol;
  std::vector<Rational> zbar(n), first(n);
  for (int i = 0; i < n; ++i) zbar[i] = integrate(Polynomial::variable(n, i), polytope) / vol;
  std::vector<Rational> C(static_cast<std::size_t>(n) * n), b(n);
  for (int i = 0; i < n; ++i) {
    const Polynomial zi = Polynomial::variable(n, i);
    for (int j = 0; j < n; ++j) {
      C[i * n + j] = integrate(zi * Polynomial::variable(n, j), polytope) - vol * zbar[i] * zbar[j];
    }
    b[i] = integrate(zi * s, polytope) - zbar[i] * total;
  }
  out.z.c = solve_exact(C, b, n);
  out.z.c0 = 0;
  for (int i = 0; i < n; ++i) out.z.c0 -= out.z.c[i] * zbar[i];
  const Polynomial rest = s - Polynomial::constant(n, out.mean) - out.z.polynomial();
  out.residual_squared = integrate(rest * rest, polytope);
  return out;
}

SampledProjection project_affine(const GridField& s) {
  if (s.shape() != Shape::Scalar || !s.toric()) throw std::invalid_argument("sampled projection needs a toric scalar");
  const DarbouxChart& chart = s.chart();
  const int n = chart.n();
  const Region& r = s.valid();
  for (int a = 0; a < n; ++a) {
    if (r.hi[a] <= r.lo[a]) throw std::domain_error("Gram matrix singular (degenerate region)");
  }
  // Weighted moments with trapezoid cell weights.
  double W = 0.0, S = 0.0;
  std::vector<double> Z(n, 0.0), ZS(n, 0.0), ZZ(static_cast<std::size_t>(n) * n, 0.0);
  auto weight = [&](std::span<const int> idx) {
    double w = 1.0;
    for (int a = 0; a < n; ++a) {
      const double h = chart.axis(a).step() * r.stride;
      w *= (idx[a] == r.lo[a] || idx[a] == r.hi[a]) ? 0.5 * h : h;
    }
    return w;
  };
  std::array<double, kMaxDim> x{};
  r.for_each(
      [&](std::span<const int> idx) {
        chart.coordinates(idx, std::span<double>(x.data(), chart.dim()));
        const double w = weight(idx), v = s.at(idx)[0];
        W += w;
        S += w * v;
        for (int i = 0; i < n; ++i) {
          Z[i] += w * x[i];
          ZS[i] += w * x[i] * v;
          for (int j = 0; j < n; ++j) ZZ[i * n + j] += w * x[i] * x[j];
        }
      },
      true, n);
  SampledProjection out;
  out.mean = S / W;
  std::vector<double> zbar(n), C(static_cast<std::size_t>(n) * n), Cinv(static_cast<std::size_t>(n) * n), b(n);
  for (int i = 0; i < n; ++i) zbar[i] = Z[i] / W;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) C[i * n + j] = ZZ[i * n + j] - W * zbar[i] * zbar[j];
    b[i] = ZS[i] - zbar[i] * S;
  }
  if (!dense::invert(C.data(), Cinv.data(), n, 1e-300)) throw std::domain_error("Gram matrix singular");
  out.c.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.c[i] += Cinv[i * n + j] * b[j];
  }
  for (int i = 0; i < n; ++i) out.c0 -= out.c[i] * zbar[i];
  double res = 0.0;
  r.for_each(
      [&](std::span<const int> idx) {
        chart.coordinates(idx, std::span<double>(x.data(), chart.dim()));
        double v = s.at(idx)[0] - out.mean - out.c0;
        for (int i = 0; i < n; ++i) v -= out.c[i] * x[i];
        res += weight(idx) * v * v;
      },
      true, n);
  out.residual = std::sqrt(res);
  return out;
}

// ------------------------------------------------------------ Futaki-Mabuchi

double FutakiValue::value() const { return to_double(rational) * std::pow(2.0 * std::numbers::pi, two_pi_power); }

FutakiValue futaki_mabuchi(const AffineFunction& fX, const AffineFunction& fY, const Polytope& polytope) {
  const int n = polytope.n();
  if (static_cast<int>(fX.c.size()) != n || static_cast<int>(fY.c.size()) != n) {
    throw std::invalid_argument("affine function dimension differs from the polytope");
  }
  const Rational vol = polytope.volume();
  Polynomial x = fX.polynomial(), y = fY.polynomial();
  x -= Polynomial::constant(n, integrate(x, polytope) / vol);
  y -= Polynomial::constant(n, integrate(y, polytope) / vol);
  FutakiValue out;
  out.rational = factorial(n) * integrate(x * y, polytope);
  out.two_pi_power = -2;
  return out;
}

FutakiGram futaki_gram(const Polytope& polytope) {
  const int n = polytope.n();
  FutakiGram out;
  std::vector<AffineFunction> basis;
  for (int i = 0; i < n; ++i) {
    std::vector<long> e(n, 0);
    e[i] = 1;
    basis.push_back(AffineFunction::momentum(e));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.entries.push_back(futaki_mabuchi(basis[i], basis[j], polytope));
  }
  out.symmetric = true;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.symmetric = out.symmetric && out.entries[i * n + j].rational == out.entries[j * n + i].rational;
  }
  // Exact LDLᵀ without pivoting: positive-definite iff every pivot is positive.
  std::vector<Rational> A(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n * n; ++k) A[k] = out.entries[k].rational;
  out.positive_definite = true;
  for (int k = 0; k < n; ++k) {
    const Rational p = A[k * n + k];
    out.pivots.push_back(p);
    if (!(p > 0)) {
      out.positive_definite = false;
      break;
    }
    for (int r = k + 1; r < n; ++r) {
      const Rational f = A[r * n + k] / p;
      for (int c = k; c < n; ++c) A[r * n + c] -= f * A[k * n + c];
    }
  }
  return out;
}

// ------------------------------------------------------------ potentials

PotentialMetric::PotentialMetric(expr::Expression u, std::string label)
    : u_(std::move(u)), n_(u_.dimension()), label_(std::move(label)) {
  if (!u_.independent_of_t()) throw std::invalid_argument("symplectic potential must not depend on t");
  for (int i = 0; i < n_; ++i) {
    const expr::Expression ui = expr::differentiate(u_, i);
    for (int j = 0; j < n_; ++j) hess_.push_back(expr::differentiate(ui, j));
  }
}

void PotentialMetric::values(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  const int nn = n_ * n_;
  std::array<double, 16> G{}, H{};
  for (int c = 0; c < nn; ++c) G[c] = hess_[c].eval(x);
  if (!dense::invert(G.data(), H.data(), n_)) throw std::domain_error("Hess u singular");
  for (int c = 0; c < nn; ++c) {
    out.val[c] = G[c];
    out.val[nn + c] = H[c];
    out.val[2 * nn + c] = 0.0;
  }
}

void PotentialMetric::jet(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  const int d = 2 * n_, nn = n_ * n_, C = 3 * nn;
  std::array<Jet, kMaxDim> xs;
  for (int a = 0; a < d; ++a) xs[a] = Jet::variable(d, a, x[a]);
  std::array<Jet, 16> G, H;
  for (int c = 0; c < nn; ++c) {
    G[c] = hess_[c].eval(std::span<const Jet>(xs.data(), d));
    if (G[c].dim() == 0) G[c] = Jet(d, G[c].value());
  }
  if (!dense::invert(G.data(), H.data(), n_)) throw std::domain_error("Hess u singular");
  out.clear();
  for (int c = 0; c < nn; ++c) {
    for (int block = 0; block < 2; ++block) {
      const Jet& v = block == 0 ? G[c] : H[c];
      const int comp = block * nn + c;
      out.val[comp] = v.value();
      for (int a = 0; a < d; ++a) {
        out.d1[a * C + comp] = v.grad(a);
        for (int b = 0; b < d; ++b) out.d2[(a * d + b) * C + comp] = v.hess(a, b);
      }
    }
  }
}

std::vector<std::string> PotentialMetric::entry_strings(Block b) const {
  std::vector<std::string> out;
  if (b == Block::G) {
    for (const auto& e : hess_) out.push_back(e.str());
  } else if (b == Block::P) {
    out.assign(static_cast<std::size_t>(n_) * n_, "0");
  }
  return out;
}

expr::Expression quartic_potential(int n) {
  std::ostringstream s;
  for (int i = 1; i <= n; ++i) s << (i > 1 ? " + " : "") << "z" << i << "^4/12 + z" << i << "^2/2";
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) s << " + z" << i << "^2*z" << j << "^2/4";
  }
  return expr::parse(s.str(), n);
}

}  // namespace akcurv::toric
