#include <akcurv/chart.hpp>
#include <akcurv/parallel.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace akcurv {

DarbouxChart::DarbouxChart(int n, std::vector<Axis> axes) : n_(n), axes_(std::move(axes)) {
  if (n < 1 || 2 * n > kMaxDim) throw std::invalid_argument("chart half-dimension must be in [1, 4]");
  if (static_cast<int>(axes_.size()) != 2 * n) throw std::invalid_argument("chart needs 2n axes");
  for (int a = 0; a < 2 * n; ++a) {
    const Axis& ax = axes_[a];
    if (!(ax.hi > ax.lo)) throw std::invalid_argument("degenerate chart interval on axis " + std::to_string(a));
    if (ax.points < 8) throw std::invalid_argument("chart resolution must be at least 8 points per axis");
    if (ax.periodic && a < n) throw std::invalid_argument("only t axes may be periodic");
  }
}

DarbouxChart DarbouxChart::uniform(int n, double z_lo, double z_hi, int z_points, double t_lo, double t_hi,
                                   int t_points, bool t_periodic) {
  std::vector<Axis> axes;
  for (int i = 0; i < n; ++i) axes.push_back({z_lo, z_hi, z_points, false});
  for (int i = 0; i < n; ++i) axes.push_back({t_lo, t_hi, t_points, t_periodic});
  return DarbouxChart(n, std::move(axes));
}

double DarbouxChart::max_step() const {
  double h = 0.0;
  for (const Axis& ax : axes_) h = std::max(h, ax.step());
  return h;
}

std::size_t DarbouxChart::node_count(bool z_only) const {
  std::size_t c = 1;
  const int active = z_only ? n_ : 2 * n_;
  for (int a = 0; a < active; ++a) c *= static_cast<std::size_t>(axes_[a].points);
  return c;
}

void DarbouxChart::unravel(std::size_t node, std::span<int> idx, bool z_only) const {
  const int active = z_only ? n_ : 2 * n_;
  for (int a = active - 1; a >= 0; --a) {
    const auto p = static_cast<std::size_t>(axes_[a].points);
    idx[a] = static_cast<int>(node % p);
    node /= p;
  }
  for (int a = active; a < 2 * n_; ++a) idx[a] = 0;
}

std::size_t DarbouxChart::ravel(std::span<const int> idx, bool z_only) const {
  const int active = z_only ? n_ : 2 * n_;
  std::size_t node = 0;
  for (int a = 0; a < active; ++a) node = node * static_cast<std::size_t>(axes_[a].points) + idx[a];
  return node;
}

void DarbouxChart::coordinates(std::span<const int> idx, std::span<double> x) const {
  for (int a = 0; a < 2 * n_; ++a) x[a] = axes_[a].coord(idx[a]);
}

DarbouxChart DarbouxChart::refined(int times) const {
  std::vector<Axis> axes = axes_;
  for (int k = 0; k < times; ++k) {
    for (Axis& ax : axes) ax = ax.refined();
  }
  return DarbouxChart(n_, std::move(axes));
}

// ---------------------------------------------------------------- Region

Region Region::full(const DarbouxChart& chart) {
  Region r;
  for (const Axis& ax : chart.axes()) {
    r.lo.push_back(0);
    r.hi.push_back(ax.points - 1);
  }
  return r;
}

bool Region::contains(std::span<const int> idx) const {
  for (int a = 0; a < dim(); ++a) {
    if (idx[a] < lo[a] || idx[a] > hi[a] || (idx[a] - lo[a]) % stride != 0) return false;
  }
  return true;
}

std::size_t Region::count(bool z_only, int n) const {
  std::size_t c = 1;
  const int active = z_only ? n : dim();
  for (int a = 0; a < active; ++a) {
    if (hi[a] < lo[a]) return 0;
    c *= static_cast<std::size_t>((hi[a] - lo[a]) / stride + 1);
  }
  return c;
}

Region Region::intersect(const Region& other) const {
  if (stride != other.stride) throw std::invalid_argument("intersecting regions of different stride");
  Region r = *this;
  for (int a = 0; a < dim(); ++a) {
    r.lo[a] = std::max(lo[a], other.lo[a]);
    r.hi[a] = std::min(hi[a], other.hi[a]);
    if ((r.lo[a] - lo[a]) % stride != 0 || (r.lo[a] - other.lo[a]) % stride != 0) {
      throw std::invalid_argument("regions are not aligned on a common lattice");
    }
  }
  return r;
}

Region Region::shrunk(const DarbouxChart& chart, int radius) const {
  Region r = *this;
  for (int a = 0; a < dim(); ++a) {
    if (chart.axis(a).periodic) continue;
    r.lo[a] = std::max(lo[a], radius);
    r.hi[a] = std::min(hi[a], chart.axis(a).points - 1 - radius);
    if (stride > 1) {
      const int off = ((r.lo[a] - lo[a]) % stride + stride) % stride;
      if (off != 0) r.lo[a] += stride - off;
    }
  }
  return r;
}

Region Region::refined(int times) const {
  Region r = *this;
  const int f = 1 << times;
  for (int a = 0; a < dim(); ++a) {
    r.lo[a] *= f;
    r.hi[a] *= f;
  }
  r.stride *= f;
  return r;
}

// ------------------------------------------------------------- GridField

int shape_components(Shape shape, int dim) {
  switch (shape) {
    case Shape::Scalar: return 1;
    case Shape::Vector: return dim;
    case Shape::Matrix:
    case Shape::TwoForm: return dim * dim;
    case Shape::ThreeForm:
    case Shape::Rank3: return dim * dim * dim;
    case Shape::Rank4: return dim * dim * dim * dim;
    case Shape::Custom: return 0;
  }
  return 0;
}

const char* shape_name(Shape shape) {
  switch (shape) {
    case Shape::Scalar: return "scalar";
    case Shape::Vector: return "vector";
    case Shape::Matrix: return "matrix";
    case Shape::TwoForm: return "2-form";
    case Shape::ThreeForm: return "3-form";
    case Shape::Rank3: return "rank-3";
    case Shape::Rank4: return "rank-4";
    case Shape::Custom: return "custom";
  }
  return "?";
}

GridField::GridField(ChartPtr chart, Shape shape, bool toric, int custom_components)
    : chart_(std::move(chart)), shape_(shape), toric_(toric) {
  components_ = shape == Shape::Custom ? custom_components : shape_components(shape, chart_->dim());
  if (components_ <= 0) throw std::invalid_argument("grid field needs a positive component count");
  nodes_ = chart_->node_count(toric);
  valid_ = Region::full(*chart_);
  data_.assign(nodes_ * static_cast<std::size_t>(components_), 0.0);
}

double GridField::max_abs() const { return max_abs(valid_); }

double GridField::max_abs(const Region& region) const {
  double m = 0.0;
  region.for_each(
      [&](std::span<const int> idx) {
        const double* v = at(idx);
        for (int c = 0; c < components_; ++c) m = std::max(m, std::abs(v[c]));
      },
      toric_, chart_->n());
  return m;
}

// ----------------------------------------------------------- FD stencils

namespace {

int shifted(const DarbouxChart& chart, int axis, int j, int delta) {
  const Axis& ax = chart.axis(axis);
  int k = j + delta;
  if (ax.periodic) {
    k %= ax.points;
    if (k < 0) k += ax.points;
    return k;
  }
  if (k < 0 || k >= ax.points) {
    throw StencilError("stencil exceeds the grid on axis " + std::to_string(axis) + " at node " +
                       std::to_string(j));
  }
  return k;
}

bool structural_zero(const GridField& f, int axis) { return f.toric() && axis >= f.chart().n(); }

double sample(const GridField& f, std::array<int, kMaxDim>& idx, int component) {
  return f.at(std::span<const int>(idx.data(), f.chart().dim()))[component];
}

}  // namespace

double fd_first(const GridField& f, std::span<const int> idx, int component, int axis) {
  if (structural_zero(f, axis)) return 0.0;
  const DarbouxChart& chart = f.chart();
  std::array<int, kMaxDim> p{};
  std::copy(idx.begin(), idx.end(), p.begin());
  const int j = idx[axis];
  p[axis] = shifted(chart, axis, j, +1);
  const double up = sample(f, p, component);
  p[axis] = shifted(chart, axis, j, -1);
  const double down = sample(f, p, component);
  return (up - down) / (2.0 * chart.axis(axis).step());
}

double fd_second(const GridField& f, std::span<const int> idx, int component, int a, int b) {
  if (structural_zero(f, a) || structural_zero(f, b)) return 0.0;
  const DarbouxChart& chart = f.chart();
  std::array<int, kMaxDim> p{};
  std::copy(idx.begin(), idx.end(), p.begin());
  if (a == b) {
    const double h = chart.axis(a).step();
    const int j = idx[a];
    const double mid = sample(f, p, component);
    p[a] = shifted(chart, a, j, +1);
    const double up = sample(f, p, component);
    p[a] = shifted(chart, a, j, -1);
    const double down = sample(f, p, component);
    return (up - 2.0 * mid + down) / (h * h);
  }
  const int ja = idx[a], jb = idx[b];
  const int ap = shifted(chart, a, ja, +1), am = shifted(chart, a, ja, -1);
  const int bp = shifted(chart, b, jb, +1), bm = shifted(chart, b, jb, -1);
  p[a] = ap;
  p[b] = bp;
  const double pp = sample(f, p, component);
  p[b] = bm;
  const double pm = sample(f, p, component);
  p[a] = am;
  const double mm = sample(f, p, component);
  p[b] = bp;
  const double mp = sample(f, p, component);
  return (pp - pm - mp + mm) / (4.0 * chart.axis(a).step() * chart.axis(b).step());
}

namespace {

template <class Kernel>
GridField derived_field(const GridField& f, Shape shape, int components, const Region& region, Kernel&& kernel) {
  GridField out(f.chart_ptr(), shape, f.toric(), shape == Shape::Custom ? components : 0);
  std::fill(out.data().begin(), out.data().end(), std::nan(""));
  out.set_valid(region);
  const DarbouxChart& chart = f.chart();
  const int n = chart.n();
  const std::size_t total = chart.node_count(f.toric());
  parallel_chunks(total, [&](std::size_t begin, std::size_t end, unsigned) {
    std::array<int, kMaxDim> idx{};
    for (std::size_t node = begin; node < end; ++node) {
      chart.unravel(node, std::span<int>(idx.data(), chart.dim()), f.toric());
      std::span<const int> view(idx.data(), chart.dim());
      if (f.toric()) {
        for (int a = n; a < 2 * n; ++a) idx[a] = region.lo[a];
      }
      if (!region.contains(view)) continue;
      kernel(view, out.at(node));
    }
  });
  return out;
}

Region derivative_region(const GridField& f, std::initializer_list<int> axes) {
  Region r = f.valid();
  const DarbouxChart& chart = f.chart();
  for (int a : axes) {
    if (structural_zero(f, a) || chart.axis(a).periodic) continue;
    r.lo[a] = std::max(r.lo[a], 1);
    r.hi[a] = std::min(r.hi[a], chart.axis(a).points - 2);
    // Stencil neighbours must themselves be valid samples.
    r.lo[a] = std::max(r.lo[a], f.valid().lo[a] + 1);
    r.hi[a] = std::min(r.hi[a], f.valid().hi[a] - 1);
  }
  for (int a = 0; a < r.dim(); ++a) {
    if (r.hi[a] < r.lo[a]) throw StencilError("field too small for the stencil on axis " + std::to_string(a));
  }
  return r;
}

}  // namespace

GridField fd_partial(const GridField& f, int axis) {
  if (axis < 0 || axis >= f.chart().dim()) throw std::invalid_argument("axis outside the chart");
  const int comps = f.components();
  const Region region = derivative_region(f, {axis});
  if (structural_zero(f, axis)) {
    GridField out(f.chart_ptr(), f.shape(), f.toric(), f.shape() == Shape::Custom ? comps : 0);
    out.set_valid(region);
    return out;
  }
  return derived_field(f, f.shape(), comps, region, [&](std::span<const int> idx, double* out) {
    for (int c = 0; c < comps; ++c) out[c] = fd_first(f, idx, c, axis);
  });
}

GridField fd_partial(const GridField& f, int a, int b) {
  const int dim = f.chart().dim();
  if (a < 0 || a >= dim || b < 0 || b >= dim) throw std::invalid_argument("axis outside the chart");
  const int comps = f.components();
  const Region region = derivative_region(f, {a, b});
  if (structural_zero(f, a) || structural_zero(f, b)) {
    GridField out(f.chart_ptr(), f.shape(), f.toric(), f.shape() == Shape::Custom ? comps : 0);
    out.set_valid(region);
    return out;
  }
  return derived_field(f, f.shape(), comps, region, [&](std::span<const int> idx, double* out) {
    for (int c = 0; c < comps; ++c) out[c] = fd_second(f, idx, c, a, b);
  });
}

GridField exterior_derivative(const GridField& form, int p) {
  const int d = form.chart().dim();
  if (p < 0 || p > 2) throw std::invalid_argument("exterior derivative supports p in {0, 1, 2}");
  const Shape expected[] = {Shape::Scalar, Shape::Vector, Shape::TwoForm};
  if (form.shape() != expected[p]) throw std::invalid_argument("field shape does not hold a p-form");
  const Shape result[] = {Shape::Vector, Shape::TwoForm, Shape::ThreeForm};
  Region region = form.valid();
  for (int a = 0; a < d; ++a) region = derivative_region(form, {a}).intersect(region);
  return derived_field(form, result[p], 0, region, [&](std::span<const int> idx, double* out) {
    if (p == 0) {
      for (int a = 0; a < d; ++a) out[a] = fd_first(form, idx, 0, a);
    } else if (p == 1) {
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          out[a * d + b] = a == b ? 0.0 : fd_first(form, idx, b, a) - fd_first(form, idx, a, b);
        }
      }
    } else {
      // dα_{abc} = ∂_a α_{bc} + ∂_b α_{ca} + ∂_c α_{ab}
      std::vector<double> grad(static_cast<std::size_t>(d) * d * d);
      for (int a = 0; a < d; ++a) {
        for (int c = 0; c < d * d; ++c) grad[a * d * d + c] = fd_first(form, idx, c, a);
      }
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          for (int c = 0; c < d; ++c) {
            out[(a * d + b) * d + c] =
                grad[a * d * d + b * d + c] + grad[b * d * d + c * d + a] + grad[c * d * d + a * d + b];
          }
        }
      }
    }
  });
}

void omega_matrix(int n, double* out) {
  const int d = 2 * n;
  std::fill(out, out + d * d, 0.0);
  for (int i = 0; i < n; ++i) {
    out[i * d + n + i] = 1.0;
    out[(n + i) * d + i] = -1.0;
  }
}

double lambda_contract_point(const double* beta, const double* J, int d) {
  const int n = d / 2;
  std::array<double, kMaxDim * kMaxDim> omega{}, g{};
  omega_matrix(n, omega.data());
  // g_ab = ω(∂_a, J ∂_b) = Ω_ac J^c_b
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += omega[a * d + c] * J[c * d + b];
      g[a * d + b] = s;
    }
  }
  auto inner = [&](const double* u, const double* v) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) s += u[a] * g[a * d + b] * v[b];
    }
    return s;
  };
  std::array<std::array<double, kMaxDim>, kMaxDim> frame{};
  int built = 0;
  for (int candidate = 0; candidate < d && built < d; ++candidate) {
    std::array<double, kMaxDim> v{};
    v[candidate] = 1.0;
    for (int k = 0; k < built; ++k) {
      const double c = inner(frame[k].data(), v.data());
      for (int a = 0; a < d; ++a) v[a] -= c * frame[k][a];
    }
    const double norm2 = inner(v.data(), v.data());
    if (!(norm2 > 1e-20)) {
      if (norm2 < -1e-12) throw std::domain_error("induced metric is not positive-definite");
      continue;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int a = 0; a < d; ++a) frame[built][a] = v[a] * inv;
    for (int a = 0; a < d; ++a) {
      double s = 0.0;
      for (int b = 0; b < d; ++b) s += J[a * d + b] * frame[built][b];
      frame[built + 1][a] = s;
    }
    built += 2;
  }
  if (built != d) throw std::domain_error("could not build a J-adapted frame; induced metric degenerate");
  double lambda = 0.0;
  for (int k = 0; k < d; k += 2) {
    // ½ [β(e, Je) + β(Je, J²e)] = β(e, Je)
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) lambda += frame[k][a] * beta[a * d + b] * frame[k + 1][b];
    }
  }
  return lambda;
}

GridField lambda_contract(const GridField& beta, const GridField& J) {
  if (beta.shape() != Shape::TwoForm || J.shape() != Shape::Matrix) {
    throw std::invalid_argument("lambda_contract expects a 2-form and a matrix field");
  }
  if (beta.toric() != J.toric()) throw std::invalid_argument("lambda_contract: toric flags differ");
  const int d = beta.chart().dim();
  const Region region = beta.valid().intersect(J.valid());
  return derived_field(beta, Shape::Scalar, 0, region, [&](std::span<const int> idx, double* out) {
    out[0] = lambda_contract_point(beta.at(idx), J.at(idx), d);
  });
}

// ----------------------------------------------------------------- dumps

namespace {

std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void write_csv(std::ostream& out, const GridField& f, const std::vector<std::string>& names) {
  const DarbouxChart& chart = f.chart();
  const int n = chart.n();
  const int active = f.toric() ? n : 2 * n;
  for (int a = 0; a < active; ++a) out << (a < n ? "z" : "t") << (a % n + 1) << ',';
  for (int c = 0; c < f.components(); ++c) {
    out << (c < static_cast<int>(names.size()) ? names[c] : "c" + std::to_string(c));
    out << (c + 1 < f.components() ? "," : "\n");
  }
  std::vector<double> x(chart.dim());
  f.valid().for_each(
      [&](std::span<const int> idx) {
        chart.coordinates(idx, x);
        for (int a = 0; a < active; ++a) out << number(x[a]) << ',';
        const double* v = f.at(idx);
        for (int c = 0; c < f.components(); ++c) out << number(v[c]) << (c + 1 < f.components() ? "," : "\n");
      },
      f.toric(), n);
}

void write_jsonl(std::ostream& out, const GridField& f) {
  const DarbouxChart& chart = f.chart();
  const int n = chart.n();
  const int active = f.toric() ? n : 2 * n;
  std::vector<double> x(chart.dim());
  f.valid().for_each(
      [&](std::span<const int> idx) {
        chart.coordinates(idx, x);
        out << "{\"x\":[";
        for (int a = 0; a < active; ++a) out << number(x[a]) << (a + 1 < active ? "," : "");
        out << "],\"v\":[";
        const double* v = f.at(idx);
        for (int c = 0; c < f.components(); ++c) out << number(v[c]) << (c + 1 < f.components() ? "," : "");
        out << "]}\n";
      },
      f.toric(), n);
}

}  // namespace akcurv
