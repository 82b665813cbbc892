#include <akcurv/deformation.hpp>
#include <akcurv/dense.hpp>
#include <akcurv/jet.hpp>
#include <akcurv/toric.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>

namespace akcurv::deformation {

namespace {

void collect_variables(const expr::Node& node, std::set<int>& out) {
  if (node.op == expr::Op::Variable) out.insert(node.variable);
  if (node.lhs) collect_variables(*node.lhs, out);
  if (node.rhs) collect_variables(*node.rhs, out);
}

void check_profile(const Profile& p, int variable, const char* name) {
  if (p.e.dimension() != 2) throw std::invalid_argument(std::string(name) + " must be an expression on a 4-dimensional chart");
  if (p.variable != variable) throw std::invalid_argument(std::string(name) + " is attached to the wrong variable");
  std::set<int> used;
  collect_variables(*p.e.root(), used);
  for (int v : used) {
    if (v != variable) {
      throw std::invalid_argument(std::string(name) + " may only depend on z" + std::to_string(variable + 1));
    }
  }
  if (p.support && !(p.support->second > p.support->first)) {
    throw std::invalid_argument(std::string(name) + " has an empty support");
  }
}

Profile derived(const Profile& p, const Rational& factor, int order) {
  Profile out = p;
  for (int k = 0; k < order; ++k) out.e = expr::differentiate(out.e, p.variable);
  out.e = expr::Expression::constant(factor, 2) * out.e;
  return out;
}

// Smallest eigenvalue of a symmetric 2×2 matrix.
double lambda_min(double a, double b, double c) {
  const double m = 0.5 * (a + c), r = std::hypot(0.5 * (a - c), b);
  return m - r;
}

Jet profile_jet(const Profile& p, std::span<const Jet> xs, double z) {
  const int d = static_cast<int>(xs.size());
  if (!p.inside(z)) return Jet(d, 0.0);
  Jet v = p.e.eval(xs);
  if (v.dim() == 0) v = Jet(d, v.value());
  return v;
}

double profile_value(const Profile& p, std::span<const double> x) {
  return p.inside(x[p.variable]) ? p.e.eval(x) : 0.0;
}

}  // namespace

std::string Profile::str() const {
  std::string s = e.str();
  if (support) {
    std::ostringstream out;
    out.precision(17);
    out << s << " for z" << variable + 1 << " in [" << support->first << ", " << support->second << "], 0 outside";
    return out.str();
  }
  return s;
}

Profile bump_profile(int n, int variable, const Rational& a, const Rational& b, const Rational& amplitude, int power) {
  if (!(b > a)) throw std::invalid_argument("bump support must satisfy a < b");
  if (power < 3) throw std::invalid_argument("bump power must be at least 3");
  using expr::Expression;
  const Expression z = Expression::variable(variable, n);
  const Rational q = (b - a) / 2;
  const Expression base = (z - Expression::constant(a, n)) * (Expression::constant(b, n) - z) /
                          Expression::constant(q * q, n);
  Profile p;
  p.e = Expression::constant(amplitude, n) * expr::pow(base, power);
  p.variable = variable;
  p.support = std::make_pair(to_double(a), to_double(b));
  return p;
}

DeformationSpec DeformationSpec::defaults() {
  DeformationSpec s;
  s.alpha = 1;
  s.beta = 1;
  s.f11 = bump_profile(2, 0, Rational(13, 10), Rational(21, 10), Rational(3, 20));
  s.h22 = bump_profile(2, 1, Rational(13, 10), Rational(21, 10), Rational(3, 20));
  s.base = hyperbolic_product_metric(2);
  return s;
}

expr::Expression Chain::entry(int i, int j) const {
  if (i > j) std::swap(i, j);
  if (i == 0 && j == 0) return f11.e * h11.e;
  if (i == 0 && j == 1) return f12.e * h12.e;
  return f22.e * h22.e;
}

Chain derive_chain(const DeformationSpec& spec) {
  if (spec.alpha == 0 || spec.beta == 0) throw std::invalid_argument("alpha and beta must be non-zero");
  if (!spec.base) throw std::invalid_argument("deformation needs a base metric");
  if (spec.base->n() != 2 || !spec.base->t_independent()) {
    throw std::invalid_argument("deformation base must be a toric metric on a 4-dimensional chart");
  }
  check_profile(spec.f11, 0, "f11");
  check_profile(spec.h22, 1, "h22");
  Chain c;
  c.f11 = spec.f11;
  c.h22 = spec.h22;
  c.f12 = derived(spec.f11, 1 / spec.beta, 1);
  c.f22 = derived(spec.f11, 1 / (spec.alpha * spec.beta), 2);
  c.h12 = derived(spec.h22, -1 / spec.alpha, 1);
  c.h11 = derived(spec.h22, 1 / (spec.alpha * spec.beta), 2);
  return c;
}

// ------------------------------------------------------------ DeformedMetric

DeformedMetric::DeformedMetric(MetricModelPtr base, Chain chain, double epsilon)
    : base_(std::move(base)), chain_(std::move(chain)), epsilon_(epsilon) {}

std::string DeformedMetric::describe() const {
  std::ostringstream out;
  out.precision(17);
  out << "deformation of " << base_->describe() << " with epsilon = " << epsilon_;
  return out.str();
}

void DeformedMetric::U(std::span<const double> x, double* out) const {
  const Profile* f[4] = {&chain_.f11, &chain_.f12, &chain_.f12, &chain_.f22};
  const Profile* h[4] = {&chain_.h11, &chain_.h12, &chain_.h12, &chain_.h22};
  for (int c = 0; c < 4; ++c) out[c] = profile_value(*f[c], x) * profile_value(*h[c], x);
}

void DeformedMetric::values(std::span<const double> x, MetricJet& out) const {
  base_->values(x, out);
  if (epsilon_ == 0.0) return;
  double u[4], H[4], G[4];
  U(x, u);
  for (int c = 0; c < 4; ++c) H[c] = out.val[out.comp(Block::H, c / 2, c % 2)] + epsilon_ * u[c];
  if (!dense::invert(H, G, 2)) throw std::domain_error("deformed H is singular");
  for (int c = 0; c < 4; ++c) {
    out.val[out.comp(Block::G, c / 2, c % 2)] = G[c];
    out.val[out.comp(Block::H, c / 2, c % 2)] = H[c];
    out.val[out.comp(Block::P, c / 2, c % 2)] = 0.0;
  }
}

void DeformedMetric::jet(std::span<const double> x, MetricJet& out) const {
  base_->jet(x, out);
  if (epsilon_ == 0.0) return;
  constexpr int d = 4;
  std::array<Jet, d> xs;
  for (int a = 0; a < d; ++a) xs[a] = Jet::variable(d, a, x[a]);
  const Profile* f[4] = {&chain_.f11, &chain_.f12, &chain_.f12, &chain_.f22};
  const Profile* h[4] = {&chain_.h11, &chain_.h12, &chain_.h12, &chain_.h22};
  std::array<Jet, 4> H, G;
  for (int c = 0; c < 4; ++c) {
    const int i = c / 2, j = c % 2;
    Jet v(d, out.v(Block::H, i, j));
    for (int a = 0; a < d; ++a) {
      v.grad(a) = out.d(Block::H, a, i, j);
      for (int b = 0; b < d; ++b) v.hess(a, b) = out.dd(Block::H, a, b, i, j);
    }
    const Jet u = profile_jet(*f[c], xs, x[0]) * profile_jet(*h[c], xs, x[1]);
    H[c] = v + u * epsilon_;
  }
  if (!dense::invert(H.data(), G.data(), 2)) throw std::domain_error("deformed H is singular");
  out.clear();
  const int C = out.blocks();
  for (int c = 0; c < 4; ++c) {
    for (int block = 0; block < 2; ++block) {
      const Jet& v = block == 0 ? G[c] : H[c];
      const int comp = out.comp(block == 0 ? Block::G : Block::H, c / 2, c % 2);
      out.val[comp] = v.value();
      for (int a = 0; a < d; ++a) {
        out.d1[a * C + comp] = v.grad(a);
        for (int b = 0; b < d; ++b) out.d2[(a * d + b) * C + comp] = v.hess(a, b);
      }
    }
  }
}

std::vector<std::string> DeformedMetric::entry_strings(Block b) const {
  const std::vector<std::string> base = base_->entry_strings(b);
  if (epsilon_ == 0.0 || b == Block::P) return base;
  if (b == Block::G) return {};  // G = (H^ε)⁻¹
  std::ostringstream eps;
  eps.precision(17);
  eps << epsilon_;
  std::vector<std::string> out;
  for (int c = 0; c < 4; ++c) {
    const std::string h = base.empty() ? "H" + std::to_string(c / 2 + 1) + std::to_string(c % 2 + 1) : base[c];
    out.push_back("(" + h + ") + " + eps.str() + "*(" + chain_.entry(c / 2, c % 2).str() + ")");
  }
  return out;
}

// ------------------------------------------------------------ admissibility

AdmissibleRange admissible_epsilon(const DeformationSpec& spec, const DarbouxChart& chart) {
  if (chart.n() != 2) throw std::invalid_argument("deformation needs a 4-dimensional chart");
  const Chain chain = derive_chain(spec);
  const DeformedMetric probe(spec.base, chain, 0.0);
  struct Node {
    double h[4], u[4];
  };
  std::vector<Node> nodes;
  AdmissibleRange out;
  out.min_eigenvalue_U = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  MetricJet jet;
  std::array<int, kMaxDim> idx{};
  std::array<double, kMaxDim> x{};
  for (std::size_t k = 0; k < chart.node_count(true); ++k) {
    chart.unravel(k, std::span<int>(idx.data(), 4), true);
    chart.coordinates(std::span<const int>(idx.data(), 4), std::span<double>(x.data(), 4));
    Node node;
    spec.base->values(std::span<const double>(x.data(), 4), jet);
    for (int c = 0; c < 4; ++c) node.h[c] = jet.v(Block::H, c / 2, c % 2);
    probe.U(std::span<const double>(x.data(), 4), node.u);
    out.min_eigenvalue_U = std::min(out.min_eigenvalue_U, lambda_min(node.u[0], node.u[1], node.u[3]));
    for (double v : node.u) scale = std::max(scale, std::abs(v));
    nodes.push_back(node);
  }
  out.u_nonnegative = out.min_eigenvalue_U >= -1e-12 * scale;
  auto F = [&](double eps) {
    double m = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes) {
      m = std::min(m, lambda_min(n.h[0] + eps * n.u[0], n.h[1] + eps * n.u[1], n.h[3] + eps * n.u[3]));
    }
    return m;
  };
  if (!(F(0.0) > 0.0)) throw PositivityError("base H is not positive-definite on the chart", out);
  // F is concave, so {F > 0} is an interval around 0.
  auto edge = [&](double sign) {
    double lo = 0.0, hi = 1.0;
    while (F(sign * hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) return std::numeric_limits<double>::infinity();
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (F(sign * mid) > 0.0 ? lo : hi) = mid;
    }
    return lo;
  };
  out.epsilon_max = edge(1.0);
  out.epsilon_min = -edge(-1.0);
  return out;
}

std::shared_ptr<const DeformedMetric> build_deformation(const DeformationSpec& spec, const DarbouxChart& chart) {
  Chain chain = derive_chain(spec);
  const AdmissibleRange range = admissible_epsilon(spec, chart);
  if (!(spec.epsilon > range.epsilon_min && spec.epsilon < range.epsilon_max)) {
    std::ostringstream msg;
    msg.precision(10);
    msg << "H + eps U is not positive-definite at eps = " << spec.epsilon << "; admissible range is ("
        << range.epsilon_min << ", " << range.epsilon_max << ")";
    throw PositivityError(msg.str(), range);
  }
  return std::make_shared<DeformedMetric>(spec.base, std::move(chain), spec.epsilon);
}

// ------------------------------------------------------------ chain residual

ChainReport chain_residual(const Chain& chain, int points, std::uint64_t seed) {
  // D[i][k][j] = ∂_k ∂_j U_ik
  std::array<expr::Expression, 8> D;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      const expr::Expression dk = expr::differentiate(chain.entry(i, k), k);
      for (int j = 0; j < 2; ++j) D[(i * 2 + k) * 2 + j] = expr::differentiate(dk, j);
    }
  }
  // Polynomial profiles: the sums Σ_k D[i][k][j] expanded exactly.
  std::vector<toric::Polynomial> sums;
  bool exact = true;
  try {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        sums.push_back(toric::Polynomial::from_expression(D[(i * 2) * 2 + j]) +
                       toric::Polynomial::from_expression(D[(i * 2 + 1) * 2 + j]));
      }
    }
  } catch (const std::invalid_argument&) {
    exact = false;
  }
  auto box = [](const Profile& p) { return p.support.value_or(std::make_pair(-1.0, 1.0)); };
  const auto [a1, b1] = box(chain.f11);
  const auto [a2, b2] = box(chain.h22);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u1(a1, b1), u2(a2, b2);
  ChainReport out;
  out.points = points;
  out.exact = exact;
  for (int p = 0; p < points; ++p) {
    const std::array<double, 4> x{u1(rng), u2(rng), 0.0, 0.0};
    const std::vector<Rational> xr{Rational(x[0]), Rational(x[1])};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        double sum = 0.0;
        for (int k = 0; k < 2; ++k) {
          const double term = D[(i * 2 + k) * 2 + j].eval(x);
          sum += term;
          out.max_term = std::max(out.max_term, std::abs(term));
        }
        const double r = exact ? std::abs(to_double(sums[i * 2 + j].eval(xr))) : std::abs(sum);
        out.max_residual = std::max(out.max_residual, r);
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ invariance

InvarianceReport verify_ricci_invariance(const JetProvider& base, const JetProvider& deformed) {
  if (base.chart()->n() != deformed.chart()->n()) throw std::invalid_argument("metrics live on different charts");
  const HermitianCurvature c0 = hermitian_curvature(base, Formula::Toric);
  const HermitianCurvature c1 = hermitian_curvature(deformed, Formula::Toric);
  const Region region = c0.rho.valid().intersect(c1.rho.valid());
  const int n = base.chart()->n();
  const int comps = c0.rho.components();
  InvarianceReport out;
  region.for_each(
      [&](std::span<const int> idx) {
        const double* r0 = c0.rho.at(idx);
        const double* r1 = c1.rho.at(idx);
        for (int c = 0; c < comps; ++c) out.rho_residual = std::max(out.rho_residual, std::abs(r1[c] - r0[c]));
        out.s_residual = std::max(out.s_residual, std::abs(c1.s.at(idx)[0] - c0.s.at(idx)[0]));
      },
      true, n);
  out.s_mean = trapezoid_mean(c1.s);
  out.nijenhuis_base = nijenhuis(base).norm.max_abs();
  out.nijenhuis = nijenhuis(deformed).norm.max_abs();
  return out;
}

}  // namespace akcurv::deformation
