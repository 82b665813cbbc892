#pragma once

// ω-compatible metrics in Darboux coordinates,
//
//   g = Σ G_ij dz_i dz_j + H_ij dt_i dt_j + P_ij (dz_i ⊗ dt_j + dt_j ⊗ dz_i),
//
// so g_full = [[G, P], [Pᵀ, H]] in the (∂z, ∂t) frame. Compatibility with
// ω = Σ dz_i ∧ dt_i means GH − P² = Id and HP = PᵀH; the almost-complex
// structure is J = Ω⁻¹ g_full = [[−Pᵀ, −H], [G, P]].
//
// Two derivative paths feed every curvature kernel: analytic models produce
// exact jets (values, first and second partials) at any point, sampled
// metrics produce central-difference jets at grid nodes. Both appear to the
// kernels as a JetProvider.

#include <akcurv/chart.hpp>
#include <akcurv/expr.hpp>
#include <akcurv/jet.hpp>
#include <akcurv/parallel.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace akcurv {

enum class Block : int { G = 0, H = 1, P = 2 };

// Values and partials of G, H, P at one point. Component c = block*n² + i*n + j.
struct MetricJet {
  int n = 0;
  int dim = 0;
  std::vector<double> val;  // [c]
  std::vector<double> d1;   // [a][c]
  std::vector<double> d2;   // [a][b][c], symmetric in (a, b)

  void resize(int half_dim);
  void clear();
  int blocks() const { return 3 * n * n; }
  int comp(Block b, int i, int j) const { return static_cast<int>(b) * n * n + i * n + j; }

  double v(Block b, int i, int j) const { return val[comp(b, i, j)]; }
  double d(Block b, int a, int i, int j) const { return d1[a * blocks() + comp(b, i, j)]; }
  double dd(Block b, int a, int c, int i, int j) const { return d2[(a * dim + c) * blocks() + comp(b, i, j)]; }

  // g_full entries and their partials.
  double g(int a, int b) const;
  double dg(int c, int a, int b) const;
  double ddg(int c, int e, int a, int b) const;
};

// A metric given in closed form on (a subset of) the chart.
class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual int n() const = 0;
  virtual bool t_independent() const = 0;
  // Fills val only.
  virtual void values(std::span<const double> x, MetricJet& out) const = 0;
  // Fills val, d1, d2 exactly (to round-off).
  virtual void jet(std::span<const double> x, MetricJet& out) const = 0;
  virtual std::string describe() const = 0;
  // Expression strings for each block entry when available (empty otherwise).
  virtual std::vector<std::string> entry_strings(Block) const { return {}; }
};

using MetricModelPtr = std::shared_ptr<const MetricModel>;

// Entries given as expressions. When G is omitted it is derived as
// G = (Id + P²) H⁻¹. Derivatives of supplied entries come from symbolic
// differentiation.
class ExpressionMetric : public MetricModel {
 public:
  ExpressionMetric(int n, std::optional<std::vector<expr::Expression>> G, std::vector<expr::Expression> H,
                   std::vector<expr::Expression> P, std::string label = "expression");

  static std::shared_ptr<ExpressionMetric> from_strings(int n, const std::vector<std::string>& G,
                                                        const std::vector<std::string>& H,
                                                        const std::vector<std::string>& P,
                                                        std::string label = "expression");

  int n() const override { return n_; }
  bool t_independent() const override { return t_independent_; }
  void values(std::span<const double> x, MetricJet& out) const override;
  void jet(std::span<const double> x, MetricJet& out) const override;
  std::string describe() const override { return label_; }
  std::vector<std::string> entry_strings(Block b) const override;
  bool derived_G() const { return derived_G_; }

 private:
  struct Entry {
    expr::Expression e;
    std::vector<expr::Expression> first;   // [a], empty when e is a literal
    std::vector<expr::Expression> second;  // [a*dim+b], symmetric, empty when e is a literal
    bool literal = false;
    double literal_value = 0.0;
  };
  Entry make_entry(const expr::Expression& e) const;
  void derive_G(MetricJet& out, bool with_derivatives) const;

  int n_;
  bool derived_G_;
  bool t_independent_;
  std::string label_;
  std::vector<Entry> entries_;  // block-major, as MetricJet components
};

// Metric produced by a generic callable that is evaluated with double and
// with Jet scalars: fn(x, G, H, P) writes the three n×n blocks.
template <class Fn>
class FunctionMetric : public MetricModel {
 public:
  FunctionMetric(int n, bool t_independent, Fn fn, std::string label)
      : n_(n), t_independent_(t_independent), fn_(std::move(fn)), label_(std::move(label)) {}

  int n() const override { return n_; }
  bool t_independent() const override { return t_independent_; }
  std::string describe() const override { return label_; }
  const Fn& function() const { return fn_; }

  void values(std::span<const double> x, MetricJet& out) const override {
    out.resize(n_);
    const int nn = n_ * n_;
    std::array<double, 48> buf{};
    fn_(x.data(), buf.data(), buf.data() + nn, buf.data() + 2 * nn);
    for (int c = 0; c < 3 * nn; ++c) out.val[c] = buf[c];
  }

  void jet(std::span<const double> x, MetricJet& out) const override {
    out.resize(n_);
    const int d = 2 * n_, nn = n_ * n_;
    std::array<Jet, kMaxDim> xs;
    for (int a = 0; a < d; ++a) xs[a] = Jet::variable(d, a, x[a]);
    std::array<Jet, 48> buf;
    fn_(xs.data(), buf.data(), buf.data() + nn, buf.data() + 2 * nn);
    const int C = 3 * nn;
    for (int c = 0; c < C; ++c) {
      out.val[c] = buf[c].value();
      for (int a = 0; a < d; ++a) {
        out.d1[a * C + c] = buf[c].dim() ? buf[c].grad(a) : 0.0;
        for (int b = 0; b < d; ++b) out.d2[(a * d + b) * C + c] = buf[c].dim() ? buf[c].hess(a, b) : 0.0;
      }
    }
  }

 private:
  int n_;
  bool t_independent_;
  Fn fn_;
  std::string label_;
};

// Named closed-form models.
MetricModelPtr flat_metric(int n);
// H = diag(z_i (2 − z_i)), G = H⁻¹, P = 0 on z ∈ (0, 2)ⁿ.
MetricModelPtr cp1_type_metric(int n);
// H = diag(z_i²), G = H⁻¹, P = 0 on z > 0.
MetricModelPtr hyperbolic_product_metric(int n);
MetricModelPtr preset_metric(const std::string& name, int n);

// Sampled G, H, P over a chart (toric metrics use the z-grid only).
struct SampledMetric {
  ChartPtr chart;
  bool toric = false;
  GridField blocks;  // Custom field with 3n² components, MetricJet layout

  static SampledMetric sample(const MetricModel& model, ChartPtr chart);
};

// Pointwise metric jets over a chart.
class JetProvider {
 public:
  virtual ~JetProvider() = default;
  virtual const ChartPtr& chart() const = 0;
  virtual bool toric() const = 0;
  virtual Region region() const = 0;
  virtual void jet_at(std::span<const int> idx, MetricJet& out) const = 0;
  virtual void values_at(std::span<const int> idx, MetricJet& out) const = 0;
  virtual const char* path() const = 0;  // "analytic" or "fd"
};

class AnalyticJets : public JetProvider {
 public:
  AnalyticJets(MetricModelPtr model, ChartPtr chart);
  const ChartPtr& chart() const override { return chart_; }
  bool toric() const override { return model_->t_independent(); }
  Region region() const override { return Region::full(*chart_); }
  void jet_at(std::span<const int> idx, MetricJet& out) const override;
  void values_at(std::span<const int> idx, MetricJet& out) const override;
  const char* path() const override { return "analytic"; }
  const MetricModel& model() const { return *model_; }

 private:
  MetricModelPtr model_;
  ChartPtr chart_;
};

class FiniteDifferenceJets : public JetProvider {
 public:
  explicit FiniteDifferenceJets(SampledMetric metric);
  const ChartPtr& chart() const override { return metric_.chart; }
  bool toric() const override { return metric_.toric; }
  Region region() const override;
  void jet_at(std::span<const int> idx, MetricJet& out) const override;
  void values_at(std::span<const int> idx, MetricJet& out) const override;
  const char* path() const override { return "fd"; }
  const SampledMetric& metric() const { return metric_; }

 private:
  SampledMetric metric_;
};

// The finite-difference path without a stored grid: the model is sampled only
// at the stencil nodes of each requested node. Same stencils and arithmetic
// as FiniteDifferenceJets, so results agree bit for bit; used for pointwise
// checks on charts too fine to sample whole.
class StencilJets : public JetProvider {
 public:
  StencilJets(MetricModelPtr model, ChartPtr chart);
  const ChartPtr& chart() const override { return chart_; }
  bool toric() const override { return model_->t_independent(); }
  Region region() const override { return Region::full(*chart_).shrunk(*chart_, 1); }
  void jet_at(std::span<const int> idx, MetricJet& out) const override;
  void values_at(std::span<const int> idx, MetricJet& out) const override;
  const char* path() const override { return "fd"; }

 private:
  MetricModelPtr model_;
  ChartPtr chart_;
};

// Evaluates kernel(jet, idx, out) at every node of `region` (the provider's
// region by default) into a new field. Toric providers fill the z-grid only.
template <class Kernel>
GridField evaluate_field(const JetProvider& provider, Shape shape, int custom_components, const Region& region,
                         bool need_derivatives, Kernel&& kernel) {
  const ChartPtr& chart = provider.chart();
  const bool toric = provider.toric();
  GridField out(chart, shape, toric, custom_components);
  std::fill(out.data().begin(), out.data().end(), std::nan(""));
  out.set_valid(region);
  const int n = chart->n();
  const std::size_t total = chart->node_count(toric);
  parallel_chunks(total, [&](std::size_t begin, std::size_t end, unsigned) {
    MetricJet jet;
    std::array<int, kMaxDim> idx{};
    for (std::size_t node = begin; node < end; ++node) {
      chart->unravel(node, std::span<int>(idx.data(), 2 * n), toric);
      if (toric) {
        for (int a = n; a < 2 * n; ++a) idx[a] = region.lo[a];
      }
      std::span<const int> view(idx.data(), 2 * n);
      if (!region.contains(view)) continue;
      if (need_derivatives) {
        provider.jet_at(view, jet);
      } else {
        provider.values_at(view, jet);
      }
      kernel(static_cast<const MetricJet&>(jet), view, out.at(node));
    }
  });
  return out;
}

template <class Kernel>
GridField evaluate_field(const JetProvider& provider, Shape shape, int custom_components, bool need_derivatives,
                         Kernel&& kernel) {
  return evaluate_field(provider, shape, custom_components, provider.region(), need_derivatives,
                        std::forward<Kernel>(kernel));
}

struct CompatibilityReport {
  double gh_residual = 0.0;        // max |GH − P² − Id|
  double hp_residual = 0.0;        // max |HP − PᵀH|
  double symmetry_residual = 0.0;  // max |G − Gᵀ|, |H − Hᵀ|
  double min_pivot_G = 0.0;        // smallest LDLᵀ pivot
  double min_pivot_H = 0.0;
  double tolerance = 1e-8;
  double pivot_tolerance = 1e-10;
  bool pass = false;
};

CompatibilityReport validate_point(const MetricJet& values, double tolerance = 1e-8);
CompatibilityReport validate_compatibility(const JetProvider& provider, double tolerance = 1e-8);

// J = [[−Pᵀ, −H], [G, P]] (row-major 2n×2n) and its partials.
void acs_point(const MetricJet& jet, double* J);
void acs_partial(const MetricJet& jet, int axis, double* dJ);
void metric_point(const MetricJet& jet, double* g);

// Matrix field of J; throws if the metric fails validation.
GridField derive_acs(const JetProvider& provider, double tolerance = 1e-8);

// N^c_ab stored at [c*d*d + a*d + b] with
// 4N^c_ab = J^d_a ∂_d J^c_b − J^d_b ∂_d J^c_a − J^c_d (∂_a J^d_b − ∂_b J^d_a).
void nijenhuis_point(const MetricJet& jet, double* N);
// |N|_g² = g_cc' g^aa' g^bb' N^c_ab N^c'_a'b'.
double nijenhuis_norm(const MetricJet& jet, const double* N);

struct NijenhuisField {
  GridField tensor;  // Rank3
  GridField norm;    // Scalar
};
NijenhuisField nijenhuis(const JetProvider& provider);

// Random ω-compatible metric with t-dependence: h_full = Id + amplitude·S
// with S a symmetric trigonometric polynomial (integer t-wavenumbers on
// periodic t axes), then the polar construction A = h⁻¹Ω,
// J = A(−A²)^{-1/2}, g = ΩJ. Supported for n ≤ 2.
struct RandomMetricSpec {
  std::uint64_t seed = 1;
  double amplitude = 0.2;
  int terms = 2;  // trigonometric terms per entry
};

class RandomCompatibleMetric;
std::shared_ptr<const RandomCompatibleMetric> random_compatible_metric(const RandomMetricSpec& spec,
                                                                       const DarbouxChart& chart);

class RandomCompatibleMetric : public MetricModel {
 public:
  struct Term {
    std::array<double, kMaxDim> k{};
    double phase = 0.0;
    double coefficient = 0.0;
  };

  RandomCompatibleMetric(int n, double amplitude, std::vector<std::vector<Term>> entries, int attempts);

  int n() const override { return n_; }
  bool t_independent() const override { return false; }
  void values(std::span<const double> x, MetricJet& out) const override;
  void jet(std::span<const double> x, MetricJet& out) const override;
  std::string describe() const override;
  int attempts() const { return attempts_; }
  double amplitude() const { return amplitude_; }

  // h_full at a point (row-major 2n×2n).
  void h_full(std::span<const double> x, double* h) const;

  template <class T>
  void evaluate(const T* x, T* G, T* H, T* P) const;

 private:
  int n_;
  double amplitude_;
  std::vector<std::vector<Term>> entries_;  // upper triangle of the 2n×2n matrix, row-major
  int attempts_;
};

class CompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace akcurv
