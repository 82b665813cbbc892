#pragma once

// Darboux charts, grid fields and the finite-difference calculus on them.
//
// Coordinates are ordered (z1..zn, t1..tn); axis a < n is z_{a+1}. The
// symplectic form is always ω = Σ dz_i ∧ dt_i, i.e. ω(∂z_i, ∂t_j) = δ_ij.
//
// Clamped axis with N points: x_j = lo + j h, h = (hi - lo)/(N - 1).
// Periodic axis with N points: x_j = lo + j h, h = (hi - lo)/N; x_N ≡ x_0.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace akcurv {

inline constexpr int kMaxDim = 8;  // 2n

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int points = 8;
  bool periodic = false;

  double step() const { return periodic ? (hi - lo) / points : (hi - lo) / (points - 1); }
  double coord(int j) const { return lo + j * step(); }
  // Halves the spacing; node j of this axis becomes node 2j of the result.
  Axis refined() const { return {lo, hi, periodic ? 2 * points : 2 * points - 1, periodic}; }
};

class DarbouxChart {
 public:
  DarbouxChart(int n, std::vector<Axis> axes);

  // Same box for every z axis and every t axis.
  static DarbouxChart uniform(int n, double z_lo, double z_hi, int z_points, double t_lo, double t_hi,
                              int t_points, bool t_periodic);

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const Axis& axis(int a) const { return axes_[a]; }
  const std::vector<Axis>& axes() const { return axes_; }
  double max_step() const;

  // Nodes of the full grid, or of the z-grid only.
  std::size_t node_count(bool z_only = false) const;
  // Multi-index of a linear node number (row-major, last axis fastest).
  void unravel(std::size_t node, std::span<int> idx, bool z_only = false) const;
  std::size_t ravel(std::span<const int> idx, bool z_only = false) const;
  void coordinates(std::span<const int> idx, std::span<double> x) const;

  DarbouxChart refined(int times = 1) const;

 private:
  int n_;
  std::vector<Axis> axes_;
};

using ChartPtr = std::shared_ptr<const DarbouxChart>;

// Axis-aligned box of node indices [lo_a, hi_a] visited with a common stride.
struct Region {
  std::vector<int> lo, hi;
  int stride = 1;

  static Region full(const DarbouxChart& chart);
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const int> idx) const;
  std::size_t count(bool z_only = false, int n = 0) const;
  Region intersect(const Region& other) const;
  // Region shrunk by r nodes on every clamped axis.
  Region shrunk(const DarbouxChart& chart, int r) const;
  // Node indices of this region expressed on a chart refined `times` times.
  Region refined(int times) const;
  // Calls fn(idx) for every node, in row-major order. With z_only the t
  // indices are held at lo.
  template <class Fn>
  void for_each(Fn&& fn, bool z_only = false, int n = 0) const;
};

enum class Shape { Scalar, Vector, Matrix, TwoForm, ThreeForm, Rank3, Rank4, Custom };

int shape_components(Shape shape, int dim);
const char* shape_name(Shape shape);

// Samples over a chart's nodes. A toric field stores the z-grid only and is
// constant along t.
class GridField {
 public:
  GridField() = default;
  GridField(ChartPtr chart, Shape shape, bool toric, int custom_components = 0);

  const DarbouxChart& chart() const { return *chart_; }
  const ChartPtr& chart_ptr() const { return chart_; }
  Shape shape() const { return shape_; }
  bool toric() const { return toric_; }
  int components() const { return components_; }
  std::size_t nodes() const { return nodes_; }

  const Region& valid() const { return valid_; }
  void set_valid(Region r) { valid_ = std::move(r); }

  std::size_t node_of(std::span<const int> idx) const { return chart_->ravel(idx, toric_); }
  double* at(std::size_t node) { return data_.data() + node * components_; }
  const double* at(std::size_t node) const { return data_.data() + node * components_; }
  double* at(std::span<const int> idx) { return at(node_of(idx)); }
  const double* at(std::span<const int> idx) const { return at(node_of(idx)); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Largest |component| over the valid region (or the given region).
  double max_abs() const;
  double max_abs(const Region& region) const;

 private:
  ChartPtr chart_;
  Shape shape_ = Shape::Scalar;
  bool toric_ = false;
  int components_ = 1;
  std::size_t nodes_ = 0;
  Region valid_;
  std::vector<double> data_;
};

class StencilError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pointwise central stencils (radius 1). `idx` must be at least one node
// away from the ends of every clamped axis involved. t-derivatives of toric
// fields are exactly 0.
double fd_first(const GridField& f, std::span<const int> idx, int component, int axis);
double fd_second(const GridField& f, std::span<const int> idx, int component, int a, int b);

// Whole-field partials; the valid region shrinks by one node along each
// clamped differentiation axis.
GridField fd_partial(const GridField& f, int axis);
GridField fd_partial(const GridField& f, int a, int b);

// Antisymmetric coefficient storage: a p-form α is kept as the full
// antisymmetric array α_{a1..ap} = α(∂_{a1}, .., ∂_{ap}).
// p = 0 is Scalar, 1 Vector, 2 TwoForm, 3 ThreeForm.
GridField exterior_derivative(const GridField& form, int p);

// ½ Σ_a β(e_a, J e_a) over a pointwise J-adapted g-orthonormal frame,
// g = ω(·, J·). Throws when g is not positive-definite somewhere.
double lambda_contract_point(const double* beta, const double* J, int dim);
GridField lambda_contract(const GridField& beta, const GridField& J);

// Standard symplectic matrix Ω with Ω_ab = ω(∂_a, ∂_b).
void omega_matrix(int n, double* out);

// CSV: header "z1,..,tn,c0,.." then one row per valid node.
void write_csv(std::ostream& out, const GridField& f, const std::vector<std::string>& names = {});
// JSON lines: {"x":[...],"v":[...]} per valid node.
void write_jsonl(std::ostream& out, const GridField& f);

template <class Fn>
void Region::for_each(Fn&& fn, bool z_only, int n) const {
  const int d = dim();
  if (d == 0) return;
  const int active = z_only ? n : d;
  std::vector<int> idx(lo);
  for (int a = 0; a < active; ++a) {
    if (lo[a] > hi[a]) return;
  }
  for (;;) {
    fn(std::span<const int>(idx));
    int a = active - 1;
    while (a >= 0) {
      idx[a] += stride;
      if (idx[a] <= hi[a]) break;
      idx[a] = lo[a];
      --a;
    }
    if (a < 0) return;
  }
}

}  // namespace akcurv
