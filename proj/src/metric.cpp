#include <akcurv/dense.hpp>
#include <akcurv/metric.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace akcurv {

// ------------------------------------------------------------- MetricJet

void MetricJet::resize(int half_dim) {
  if (n == half_dim && !val.empty()) return;
  n = half_dim;
  dim = 2 * half_dim;
  const std::size_t C = static_cast<std::size_t>(3 * n * n);
  val.assign(C, 0.0);
  d1.assign(C * dim, 0.0);
  d2.assign(C * dim * dim, 0.0);
}

void MetricJet::clear() {
  std::fill(val.begin(), val.end(), 0.0);
  std::fill(d1.begin(), d1.end(), 0.0);
  std::fill(d2.begin(), d2.end(), 0.0);
}

namespace {

// Component of g_full entry (a, b) in the MetricJet layout.
inline int g_component(int n, int a, int b) {
  if (a < n && b < n) return a * n + b;
  if (a < n) return 2 * n * n + a * n + (b - n);
  if (b < n) return 2 * n * n + b * n + (a - n);
  return n * n + (a - n) * n + (b - n);
}

}  // namespace

double MetricJet::g(int a, int b) const { return val[g_component(n, a, b)]; }
double MetricJet::dg(int c, int a, int b) const { return d1[c * blocks() + g_component(n, a, b)]; }
double MetricJet::ddg(int c, int e, int a, int b) const {
  return d2[(c * dim + e) * blocks() + g_component(n, a, b)];
}

void metric_point(const MetricJet& jet, double* g) {
  const int d = jet.dim;
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) g[a * d + b] = jet.g(a, b);
  }
}

// ------------------------------------------------------ ExpressionMetric

ExpressionMetric::ExpressionMetric(int n, std::optional<std::vector<expr::Expression>> G,
                                   std::vector<expr::Expression> H, std::vector<expr::Expression> P,
                                   std::string label)
    : n_(n), derived_G_(!G.has_value()), t_independent_(true), label_(std::move(label)) {
  const std::size_t nn = static_cast<std::size_t>(n) * n;
  if (n < 1 || 2 * n > kMaxDim) throw std::invalid_argument("metric half-dimension must be in [1, 4]");
  if (H.size() != nn) throw std::invalid_argument("H needs n*n entries");
  if (P.empty()) P.assign(nn, expr::Expression::constant(0, n));
  if (P.size() != nn) throw std::invalid_argument("P needs n*n entries");
  if (G && G->size() != nn) throw std::invalid_argument("G needs n*n entries");
  auto check = [&](const expr::Expression& e) {
    if (e.dimension() != n && e.dimension() != 0) throw std::invalid_argument("entry parsed for another dimension");
    if (!e.independent_of_t()) t_independent_ = false;
  };
  for (const auto& e : H) check(e);
  for (const auto& e : P) check(e);
  if (G) {
    for (const auto& e : *G) check(e);
  }
  entries_.reserve(3 * nn);
  for (std::size_t c = 0; c < nn; ++c) {
    entries_.push_back(G ? make_entry((*G)[c]) : make_entry(expr::Expression::constant(0, n)));
  }
  for (std::size_t c = 0; c < nn; ++c) entries_.push_back(make_entry(H[c]));
  for (std::size_t c = 0; c < nn; ++c) entries_.push_back(make_entry(P[c]));
}

std::shared_ptr<ExpressionMetric> ExpressionMetric::from_strings(int n, const std::vector<std::string>& G,
                                                                 const std::vector<std::string>& H,
                                                                 const std::vector<std::string>& P,
                                                                 std::string label) {
  auto parse_all = [n](const std::vector<std::string>& texts) {
    std::vector<expr::Expression> out;
    for (const auto& t : texts) out.push_back(expr::parse(t, n));
    return out;
  };
  std::optional<std::vector<expr::Expression>> g;
  if (!G.empty()) g = parse_all(G);
  return std::make_shared<ExpressionMetric>(n, std::move(g), parse_all(H), parse_all(P), std::move(label));
}

ExpressionMetric::Entry ExpressionMetric::make_entry(const expr::Expression& e) const {
  Entry entry;
  entry.e = e.dimension() == 0 ? expr::Expression::from_node(e.root(), n_) : e;
  const expr::Op op = entry.e.root()->op;
  if (op == expr::Op::Constant || op == expr::Op::Pi) {
    entry.literal = true;
    entry.literal_value = entry.e.eval(std::vector<double>(2 * n_, 0.0));
    return entry;
  }
  const int d = 2 * n_;
  entry.first.resize(d);
  entry.second.resize(static_cast<std::size_t>(d) * d);
  for (int a = 0; a < d; ++a) entry.first[a] = expr::differentiate(entry.e, a);
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b) {
      entry.second[a * d + b] = expr::differentiate(entry.first[a], b);
      entry.second[b * d + a] = entry.second[a * d + b];
    }
  }
  return entry;
}

void ExpressionMetric::values(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  const int C = 3 * n_ * n_;
  for (int c = derived_G_ ? n_ * n_ : 0; c < C; ++c) {
    const Entry& e = entries_[c];
    out.val[c] = e.literal ? e.literal_value : e.e.eval(x);
  }
  if (derived_G_) derive_G(out, false);
}

void ExpressionMetric::jet(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  out.clear();
  const int C = 3 * n_ * n_, d = 2 * n_;
  for (int c = derived_G_ ? n_ * n_ : 0; c < C; ++c) {
    const Entry& e = entries_[c];
    if (e.literal) {
      out.val[c] = e.literal_value;
      continue;
    }
    out.val[c] = e.e.eval(x);
    for (int a = 0; a < d; ++a) {
      if (!e.first[a].is_zero()) out.d1[a * C + c] = e.first[a].eval(x);
      for (int b = a; b < d; ++b) {
        const expr::Expression& s = e.second[a * d + b];
        if (s.is_zero()) continue;
        const double v = s.eval(x);
        out.d2[(a * d + b) * C + c] = v;
        out.d2[(b * d + a) * C + c] = v;
      }
    }
  }
  if (derived_G_) derive_G(out, true);
}

void ExpressionMetric::derive_G(MetricJet& out, bool with_derivatives) const {
  const int n = n_, nn = n * n, d = 2 * n, C = 3 * nn;
  auto to_jet = [&](int c) {
    Jet j(with_derivatives ? d : 0, out.val[c]);
    if (with_derivatives) {
      for (int a = 0; a < d; ++a) {
        j.grad(a) = out.d1[a * C + c];
        for (int b = 0; b < d; ++b) j.hess(a, b) = out.d2[(a * d + b) * C + c];
      }
    }
    return j;
  };
  std::array<Jet, 16> H, P, Hinv, P2, G;
  for (int c = 0; c < nn; ++c) {
    H[c] = to_jet(nn + c);
    P[c] = to_jet(2 * nn + c);
  }
  if (!dense::invert(H.data(), Hinv.data(), n)) throw std::domain_error("H is singular; cannot derive G");
  dense::multiply(P.data(), P.data(), P2.data(), n, n, n);
  for (int i = 0; i < n; ++i) P2[i * n + i] += 1.0;
  dense::multiply(P2.data(), Hinv.data(), G.data(), n, n, n);
  for (int c = 0; c < nn; ++c) {
    out.val[c] = G[c].value();
    if (!with_derivatives) continue;
    for (int a = 0; a < d; ++a) {
      out.d1[a * C + c] = G[c].grad(a);
      for (int b = 0; b < d; ++b) out.d2[(a * d + b) * C + c] = G[c].hess(a, b);
    }
  }
}

std::vector<std::string> ExpressionMetric::entry_strings(Block b) const {
  std::vector<std::string> out;
  if (b == Block::G && derived_G_) return out;
  const int nn = n_ * n_;
  for (int c = 0; c < nn; ++c) out.push_back(entries_[static_cast<int>(b) * nn + c].e.str());
  return out;
}

// --------------------------------------------------------------- presets

namespace {

std::shared_ptr<ExpressionMetric> diagonal_metric(int n, const std::string& h_template,
                                                  const std::string& g_template, const std::string& label) {
  std::vector<std::string> G, H, P;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::string z = "z" + std::to_string(i + 1);
      auto fill = [&](std::string t) {
        for (std::size_t p = t.find('@'); p != std::string::npos; p = t.find('@')) t.replace(p, 1, z);
        return t;
      };
      G.push_back(i == j ? fill(g_template) : "0");
      H.push_back(i == j ? fill(h_template) : "0");
      P.push_back("0");
    }
  }
  return ExpressionMetric::from_strings(n, G, H, P, label);
}

}  // namespace

MetricModelPtr flat_metric(int n) { return diagonal_metric(n, "1", "1", "flat"); }

MetricModelPtr cp1_type_metric(int n) {
  return diagonal_metric(n, "@*(2-@)", "1/(@*(2-@))", "cp1-type");
}

MetricModelPtr hyperbolic_product_metric(int n) {
  return diagonal_metric(n, "@^2", "@^-2", "hyperbolic-product");
}

MetricModelPtr preset_metric(const std::string& name, int n) {
  if (name == "flat") return flat_metric(n);
  if (name == "cp1-type") return cp1_type_metric(n);
  if (name == "hyperbolic-product") return hyperbolic_product_metric(n);
  throw std::invalid_argument("unknown metric preset '" + name + "' (expected flat, cp1-type, hyperbolic-product)");
}

// ------------------------------------------------------- sampled metrics

SampledMetric SampledMetric::sample(const MetricModel& model, ChartPtr chart) {
  if (model.n() != chart->n()) throw std::invalid_argument("metric and chart dimensions differ");
  SampledMetric m;
  m.chart = chart;
  m.toric = model.t_independent();
  const int n = chart->n();
  m.blocks = GridField(chart, Shape::Custom, m.toric, 3 * n * n);
  const std::size_t total = chart->node_count(m.toric);
  parallel_chunks(total, [&](std::size_t begin, std::size_t end, unsigned) {
    MetricJet jet;
    std::array<int, kMaxDim> idx{};
    std::array<double, kMaxDim> x{};
    for (std::size_t node = begin; node < end; ++node) {
      chart->unravel(node, std::span<int>(idx.data(), 2 * n), m.toric);
      chart->coordinates(std::span<const int>(idx.data(), 2 * n), std::span<double>(x.data(), 2 * n));
      model.values(std::span<const double>(x.data(), 2 * n), jet);
      std::copy(jet.val.begin(), jet.val.end(), m.blocks.at(node));
    }
  });
  return m;
}

AnalyticJets::AnalyticJets(MetricModelPtr model, ChartPtr chart) : model_(std::move(model)), chart_(std::move(chart)) {
  if (model_->n() != chart_->n()) throw std::invalid_argument("metric and chart dimensions differ");
}

void AnalyticJets::jet_at(std::span<const int> idx, MetricJet& out) const {
  std::array<double, kMaxDim> x{};
  chart_->coordinates(idx, std::span<double>(x.data(), chart_->dim()));
  model_->jet(std::span<const double>(x.data(), chart_->dim()), out);
}

void AnalyticJets::values_at(std::span<const int> idx, MetricJet& out) const {
  std::array<double, kMaxDim> x{};
  chart_->coordinates(idx, std::span<double>(x.data(), chart_->dim()));
  model_->values(std::span<const double>(x.data(), chart_->dim()), out);
}

StencilJets::StencilJets(MetricModelPtr model, ChartPtr chart) : model_(std::move(model)), chart_(std::move(chart)) {
  if (model_->n() != chart_->n()) throw std::invalid_argument("metric and chart dimensions differ");
}

void StencilJets::values_at(std::span<const int> idx, MetricJet& out) const {
  std::array<double, kMaxDim> x{};
  chart_->coordinates(idx, std::span<double>(x.data(), chart_->dim()));
  model_->values(std::span<const double>(x.data(), chart_->dim()), out);
}

void StencilJets::jet_at(std::span<const int> idx, MetricJet& out) const {
  const int d = chart_->dim();
  values_at(idx, out);
  const int C = out.blocks();
  const int active = toric() ? chart_->n() : d;
  std::fill(out.d1.begin(), out.d1.end(), 0.0);
  std::fill(out.d2.begin(), out.d2.end(), 0.0);
  std::array<int, kMaxDim> p{};
  std::copy(idx.begin(), idx.end(), p.begin());
  auto shifted = [&](int axis, int delta) {
    const Axis& ax = chart_->axis(axis);
    int k = idx[axis] + delta;
    if (ax.periodic) return ((k % ax.points) + ax.points) % ax.points;
    if (k < 0 || k >= ax.points) throw StencilError("stencil exceeds the grid on axis " + std::to_string(axis));
    return k;
  };
  MetricJet tmp;
  // Values at p with p[a] (and p[b]) moved; p is restored by the caller.
  auto at = [&](std::vector<double>& into) {
    values_at(std::span<const int>(p.data(), d), tmp);
    into = tmp.val;
  };
  std::vector<double> up, down, pp, pm, mp, mm;
  for (int a = 0; a < active; ++a) {
    const double h = chart_->axis(a).step();
    p[a] = shifted(a, +1);
    at(up);
    p[a] = shifted(a, -1);
    at(down);
    p[a] = idx[a];
    for (int c = 0; c < C; ++c) {
      out.d1[a * C + c] = (up[c] - down[c]) / (2.0 * h);
      out.d2[(a * d + a) * C + c] = (up[c] - 2.0 * out.val[c] + down[c]) / (h * h);
    }
    for (int b = a + 1; b < active; ++b) {
      const int ap = shifted(a, +1), am = shifted(a, -1), bp = shifted(b, +1), bm = shifted(b, -1);
      p[a] = ap;
      p[b] = bp;
      at(pp);
      p[b] = bm;
      at(pm);
      p[a] = am;
      at(mm);
      p[b] = bp;
      at(mp);
      p[a] = idx[a];
      p[b] = idx[b];
      const double denom = 4.0 * h * chart_->axis(b).step();
      for (int c = 0; c < C; ++c) {
        const double v = (pp[c] - pm[c] - mp[c] + mm[c]) / denom;
        out.d2[(a * d + b) * C + c] = v;
        out.d2[(b * d + a) * C + c] = v;
      }
    }
  }
}

FiniteDifferenceJets::FiniteDifferenceJets(SampledMetric metric) : metric_(std::move(metric)) {}

Region FiniteDifferenceJets::region() const { return Region::full(*metric_.chart).shrunk(*metric_.chart, 1); }

void FiniteDifferenceJets::values_at(std::span<const int> idx, MetricJet& out) const {
  out.resize(metric_.chart->n());
  const double* v = metric_.blocks.at(idx);
  std::copy(v, v + out.blocks(), out.val.begin());
}

void FiniteDifferenceJets::jet_at(std::span<const int> idx, MetricJet& out) const {
  values_at(idx, out);
  const int d = out.dim, C = out.blocks();
  const int active = metric_.toric ? out.n : d;
  std::fill(out.d1.begin(), out.d1.end(), 0.0);
  std::fill(out.d2.begin(), out.d2.end(), 0.0);
  for (int a = 0; a < active; ++a) {
    for (int c = 0; c < C; ++c) out.d1[a * C + c] = fd_first(metric_.blocks, idx, c, a);
    for (int b = a; b < active; ++b) {
      for (int c = 0; c < C; ++c) {
        const double v = fd_second(metric_.blocks, idx, c, a, b);
        out.d2[(a * d + b) * C + c] = v;
        out.d2[(b * d + a) * C + c] = v;
      }
    }
  }
}

// ---------------------------------------------------------- compatibility

CompatibilityReport validate_point(const MetricJet& m, double tolerance) {
  const int n = m.n;
  CompatibilityReport r;
  r.tolerance = tolerance;
  std::array<double, 16> G{}, H{};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double gh = (i == j ? -1.0 : 0.0), hp = 0.0;
      for (int k = 0; k < n; ++k) {
        gh += m.v(Block::G, i, k) * m.v(Block::H, k, j) - m.v(Block::P, i, k) * m.v(Block::P, k, j);
        hp += m.v(Block::H, i, k) * m.v(Block::P, k, j) - m.v(Block::P, k, i) * m.v(Block::H, k, j);
      }
      r.gh_residual = std::max(r.gh_residual, std::abs(gh));
      r.hp_residual = std::max(r.hp_residual, std::abs(hp));
      r.symmetry_residual = std::max({r.symmetry_residual, std::abs(m.v(Block::G, i, j) - m.v(Block::G, j, i)),
                                      std::abs(m.v(Block::H, i, j) - m.v(Block::H, j, i))});
      G[i * n + j] = 0.5 * (m.v(Block::G, i, j) + m.v(Block::G, j, i));
      H[i * n + j] = 0.5 * (m.v(Block::H, i, j) + m.v(Block::H, j, i));
    }
  }
  r.min_pivot_G = dense::min_ldlt_pivot(G.data(), n);
  r.min_pivot_H = dense::min_ldlt_pivot(H.data(), n);
  r.pass = r.gh_residual < tolerance && r.hp_residual < tolerance && r.symmetry_residual < tolerance &&
           r.min_pivot_G > r.pivot_tolerance && r.min_pivot_H > r.pivot_tolerance;
  return r;
}

CompatibilityReport validate_compatibility(const JetProvider& provider, double tolerance) {
  const ChartPtr& chart = provider.chart();
  const int n = chart->n();
  const bool toric = provider.toric();
  const Region region = provider.region();
  const std::size_t total = chart->node_count(toric);
  const unsigned workers = thread_count();
  std::vector<CompatibilityReport> partial(workers + 1);
  for (auto& p : partial) {
    p.min_pivot_G = p.min_pivot_H = INFINITY;
  }
  parallel_chunks(total, [&](std::size_t begin, std::size_t end, unsigned w) {
    MetricJet jet;
    std::array<int, kMaxDim> idx{};
    CompatibilityReport& acc = partial[w];
    for (std::size_t node = begin; node < end; ++node) {
      chart->unravel(node, std::span<int>(idx.data(), 2 * n), toric);
      std::span<const int> view(idx.data(), 2 * n);
      if (!region.contains(view)) continue;
      provider.values_at(view, jet);
      const CompatibilityReport r = validate_point(jet, tolerance);
      acc.gh_residual = std::max(acc.gh_residual, r.gh_residual);
      acc.hp_residual = std::max(acc.hp_residual, r.hp_residual);
      acc.symmetry_residual = std::max(acc.symmetry_residual, r.symmetry_residual);
      acc.min_pivot_G = std::min(acc.min_pivot_G, r.min_pivot_G);
      acc.min_pivot_H = std::min(acc.min_pivot_H, r.min_pivot_H);
    }
  });
  CompatibilityReport r;
  r.tolerance = tolerance;
  r.min_pivot_G = r.min_pivot_H = INFINITY;
  for (const auto& p : partial) {
    r.gh_residual = std::max(r.gh_residual, p.gh_residual);
    r.hp_residual = std::max(r.hp_residual, p.hp_residual);
    r.symmetry_residual = std::max(r.symmetry_residual, p.symmetry_residual);
    r.min_pivot_G = std::min(r.min_pivot_G, p.min_pivot_G);
    r.min_pivot_H = std::min(r.min_pivot_H, p.min_pivot_H);
  }
  r.pass = r.gh_residual < tolerance && r.hp_residual < tolerance && r.symmetry_residual < tolerance &&
           r.min_pivot_G > r.pivot_tolerance && r.min_pivot_H > r.pivot_tolerance;
  return r;
}

// ----------------------------------------------------------------- J, N

void acs_point(const MetricJet& m, double* J) {
  const int n = m.n, d = 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      J[i * d + j] = -m.v(Block::P, j, i);
      J[i * d + n + j] = -m.v(Block::H, i, j);
      J[(n + i) * d + j] = m.v(Block::G, i, j);
      J[(n + i) * d + n + j] = m.v(Block::P, i, j);
    }
  }
}

void acs_partial(const MetricJet& m, int a, double* dJ) {
  const int n = m.n, d = 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      dJ[i * d + j] = -m.d(Block::P, a, j, i);
      dJ[i * d + n + j] = -m.d(Block::H, a, i, j);
      dJ[(n + i) * d + j] = m.d(Block::G, a, i, j);
      dJ[(n + i) * d + n + j] = m.d(Block::P, a, i, j);
    }
  }
}

GridField derive_acs(const JetProvider& provider, double tolerance) {
  const CompatibilityReport report = validate_compatibility(provider, tolerance);
  if (!report.pass) {
    std::ostringstream msg;
    msg << "metric fails compatibility: |GH-P^2-Id| = " << report.gh_residual << ", |HP-P^tH| = " << report.hp_residual
        << ", min pivots G " << report.min_pivot_G << " H " << report.min_pivot_H;
    throw CompatibilityError(msg.str());
  }
  return evaluate_field(provider, Shape::Matrix, 0, false,
                        [](const MetricJet& jet, std::span<const int>, double* out) { acs_point(jet, out); });
}

void nijenhuis_point(const MetricJet& m, double* N) {
  const int d = m.dim;
  std::array<double, kMaxDim * kMaxDim> J{};
  std::array<double, kMaxDim * kMaxDim * kMaxDim> dJ{};  // [a][row][col]
  acs_point(m, J.data());
  for (int a = 0; a < d; ++a) acs_partial(m, a, dJ.data() + a * d * d);
  auto dj = [&](int axis, int row, int col) { return dJ[(axis * d + row) * d + col]; };
  for (int c = 0; c < d; ++c) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int e = 0; e < d; ++e) {
          s += J[e * d + a] * dj(e, c, b) - J[e * d + b] * dj(e, c, a);
          s -= J[c * d + e] * (dj(a, e, b) - dj(b, e, a));
        }
        N[(c * d + a) * d + b] = 0.25 * s;
      }
    }
  }
}

double nijenhuis_norm(const MetricJet& m, const double* N) {
  const int d = m.dim;
  std::array<double, kMaxDim * kMaxDim> g{}, gi{};
  metric_point(m, g.data());
  if (!dense::invert(g.data(), gi.data(), d)) throw std::domain_error("singular metric");
  // Raise the lower indices, then contract with g on the upper one.
  std::vector<double> up(static_cast<std::size_t>(d) * d * d);
  for (int c = 0; c < d; ++c) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int p = 0; p < d; ++p) {
          for (int q = 0; q < d; ++q) s += gi[a * d + p] * gi[b * d + q] * N[(c * d + p) * d + q];
        }
        up[(c * d + a) * d + b] = s;
      }
    }
  }
  double total = 0.0;
  for (int c = 0; c < d; ++c) {
    for (int e = 0; e < d; ++e) {
      const double gce = g[c * d + e];
      if (gce == 0.0) continue;
      for (int ab = 0; ab < d * d; ++ab) total += gce * N[c * d * d + ab] * up[e * d * d + ab];
    }
  }
  return std::sqrt(std::max(total, 0.0));
}

NijenhuisField nijenhuis(const JetProvider& provider) {
  NijenhuisField out;
  out.tensor = evaluate_field(provider, Shape::Rank3, 0, true,
                              [](const MetricJet& jet, std::span<const int>, double* N) { nijenhuis_point(jet, N); });
  out.norm = evaluate_field(provider, Shape::Scalar, 0, true, [](const MetricJet& jet, std::span<const int>, double* v) {
    std::array<double, kMaxDim * kMaxDim * kMaxDim> N{};
    nijenhuis_point(jet, N.data());
    v[0] = nijenhuis_norm(jet, N.data());
  });
  return out;
}

// ------------------------------------------------ random compatible metric

namespace {

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RandomCompatibleMetric::RandomCompatibleMetric(int n, double amplitude, std::vector<std::vector<Term>> entries,
                                               int attempts)
    : n_(n), amplitude_(amplitude), entries_(std::move(entries)), attempts_(attempts) {}

std::string RandomCompatibleMetric::describe() const {
  std::ostringstream s;
  s << "random-compatible(amplitude=" << amplitude_ << ", attempts=" << attempts_ << ")";
  return s.str();
}

template <class T>
void RandomCompatibleMetric::evaluate(const T* x, T* G, T* H, T* P) const {
  using std::cos;
  using std::sqrt;
  const int n = n_, d = 2 * n;
  if (n > 2) throw std::invalid_argument("random compatible metrics support n <= 2");
  const T zero = x[0] * 0.0;
  std::array<T, 16> h{}, hinv{}, A{}, M{}, Minv{}, J{};  // d <= 4
  int e = 0;
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b, ++e) {
      T s = zero + (a == b ? 1.0 : 0.0);
      for (const Term& term : entries_[e]) {
        T phase = zero + term.phase;
        for (int c = 0; c < d; ++c) {
          if (term.k[c] != 0.0) phase = phase + term.k[c] * x[c];
        }
        s = s + (amplitude_ * term.coefficient) * cos(phase);
      }
      h[a * d + b] = s;
      h[b * d + a] = s;
    }
  }
  if (!dense::invert(h.data(), hinv.data(), d)) throw std::domain_error("h_full singular");
  // h A = Ω⁻¹, so A = −h⁻¹Ω; A = J_std when h = Id.
  for (int a = 0; a < d; ++a) {
    for (int i = 0; i < n; ++i) {
      A[a * d + i] = hinv[a * d + n + i];
      A[a * d + n + i] = -hinv[a * d + i];
    }
  }
  if (n == 1) {
    // A² = −det(A) Id for a 2×2 A with zero trace.
    const T det = A[0] * A[3] - A[1] * A[2];
    const T inv = 1.0 / sqrt(det);
    for (int c = 0; c < 4; ++c) J[c] = A[c] * inv;
  } else if (n == 2) {
    dense::multiply(A.data(), A.data(), M.data(), d, d, d);
    for (int c = 0; c < d * d; ++c) M[c] = -M[c];
    // M has two double eigenvalues λ1, λ2 > 0; M^{-1/2} = c0 Id + c1 M.
    T trM = M[0], trM2 = zero;
    for (int a = 1; a < d; ++a) trM = trM + M[a * d + a];
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) trM2 = trM2 + M[a * d + b] * M[b * d + a];
    }
    const T s1 = 0.5 * trM;
    const T s2 = 0.5 * (s1 * s1 - 0.5 * trM2);
    const T ab = sqrt(s2);
    const T apb = sqrt(s1 + 2.0 * ab);
    const T denom = 1.0 / (ab * apb);
    const T c1 = -1.0 * denom;
    const T c0 = (s1 + ab) * denom;
    for (int c = 0; c < d * d; ++c) Minv[c] = c1 * M[c];
    for (int a = 0; a < d; ++a) Minv[a * d + a] = Minv[a * d + a] + c0;
    dense::multiply(A.data(), Minv.data(), J.data(), d, d, d);
  } else {
    throw std::invalid_argument("random compatible metrics support n <= 2");
  }
  // g = ΩJ: rows i of g are rows n+i of J, rows n+i are −(rows i).
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const T gzz = J[(n + i) * d + j];
      const T gtz_row = J[(n + i) * d + n + j];  // g_{i, n+j}
      const T gtt = -1.0 * J[i * d + n + j];     // g_{n+i, n+j}
      G[i * n + j] = gzz;
      P[i * n + j] = gtz_row;
      H[i * n + j] = gtt;
    }
  }
}

template void RandomCompatibleMetric::evaluate<double>(const double*, double*, double*, double*) const;
template void RandomCompatibleMetric::evaluate<Jet>(const Jet*, Jet*, Jet*, Jet*) const;
template void RandomCompatibleMetric::evaluate<FixedJet<2>>(const FixedJet<2>*, FixedJet<2>*, FixedJet<2>*,
                                                            FixedJet<2>*) const;
template void RandomCompatibleMetric::evaluate<FixedJet<4>>(const FixedJet<4>*, FixedJet<4>*, FixedJet<4>*,
                                                            FixedJet<4>*) const;

void RandomCompatibleMetric::values(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  const int nn = n_ * n_;
  evaluate<double>(x.data(), out.val.data(), out.val.data() + nn, out.val.data() + 2 * nn);
}

namespace {

template <int D>
void fixed_jet(const RandomCompatibleMetric& model, std::span<const double> x, MetricJet& out) {
  constexpr int n = D / 2, nn = n * n, C = 3 * nn;
  std::array<FixedJet<D>, D> xs;
  for (int a = 0; a < D; ++a) xs[a] = FixedJet<D>::variable(a, x[a]);
  std::array<FixedJet<D>, C> buf;
  model.evaluate<FixedJet<D>>(xs.data(), buf.data(), buf.data() + nn, buf.data() + 2 * nn);
  for (int c = 0; c < C; ++c) {
    out.val[c] = buf[c].value();
    for (int a = 0; a < D; ++a) {
      out.d1[a * C + c] = buf[c].grad(a);
      for (int b = 0; b < D; ++b) out.d2[(a * D + b) * C + c] = buf[c].hess(a, b);
    }
  }
}

}  // namespace

void RandomCompatibleMetric::jet(std::span<const double> x, MetricJet& out) const {
  out.resize(n_);
  if (n_ == 1) {
    fixed_jet<2>(*this, x, out);
  } else {
    fixed_jet<4>(*this, x, out);
  }
}

void RandomCompatibleMetric::h_full(std::span<const double> x, double* h) const {
  const int d = 2 * n_;
  int e = 0;
  for (int a = 0; a < d; ++a) {
    for (int b = a; b < d; ++b, ++e) {
      double s = a == b ? 1.0 : 0.0;
      for (const Term& term : entries_[e]) {
        double phase = term.phase;
        for (int c = 0; c < d; ++c) phase += term.k[c] * x[c];
        s += amplitude_ * term.coefficient * std::cos(phase);
      }
      h[a * d + b] = s;
      h[b * d + a] = s;
    }
  }
}

std::shared_ptr<const RandomCompatibleMetric> random_compatible_metric(const RandomMetricSpec& spec,
                                                                       const DarbouxChart& chart) {
  const int n = chart.n(), d = 2 * n;
  if (n > 2) throw std::invalid_argument("random compatible metrics support n <= 2");
  if (spec.amplitude < 0.0) throw std::invalid_argument("amplitude must be non-negative");
  std::mt19937_64 rng(spec.seed);
  const int entries = d * (d + 1) / 2;
  for (int attempt = 1; attempt <= 100; ++attempt) {
    std::vector<std::vector<RandomCompatibleMetric::Term>> terms(entries);
    for (auto& entry : terms) {
      double total = 0.0;
      for (int k = 0; k < spec.terms; ++k) {
        RandomCompatibleMetric::Term term;
        for (int a = 0; a < d; ++a) {
          const Axis& ax = chart.axis(a);
          if (ax.periodic) {
            const int m = static_cast<int>(unit(rng) * 5.0) - 2;  // {-2..2}
            term.k[a] = 2.0 * std::numbers::pi * m / (ax.hi - ax.lo);
          } else {
            term.k[a] = (4.0 * unit(rng) - 2.0) * 2.0 / (ax.hi - ax.lo);
          }
        }
        term.phase = 2.0 * std::numbers::pi * unit(rng);
        term.coefficient = 2.0 * unit(rng) - 1.0;
        total += std::abs(term.coefficient);
        entry.push_back(term);
      }
      if (total > 1.0) {
        for (auto& term : entry) term.coefficient /= total;
      }
    }
    auto model = std::make_shared<RandomCompatibleMetric>(n, spec.amplitude, std::move(terms), attempt);
    // Gershgorin: every |S_ab| <= 1, so λ_min(h) >= 1 − d·amplitude.
    if (1.0 - d * spec.amplitude > 1e-3) return model;
    bool ok = true;
    std::array<int, kMaxDim> idx{};
    std::array<double, kMaxDim> x{};
    std::array<double, kMaxDim * kMaxDim> h{};
    for (std::size_t node = 0; node < chart.node_count() && ok; ++node) {
      chart.unravel(node, std::span<int>(idx.data(), d));
      chart.coordinates(std::span<const int>(idx.data(), d), std::span<double>(x.data(), d));
      model->h_full(std::span<const double>(x.data(), d), h.data());
      ok = dense::min_ldlt_pivot(h.data(), d) > 1e-10;
    }
    if (ok) return model;
  }
  throw CompatibilityError("random compatible metric: positivity rejected after 100 attempts");
}

}  // namespace akcurv
