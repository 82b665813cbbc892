#pragma once

// Second-order forward-mode jets: value, gradient and Hessian with respect to
// up to kMaxJetDim coordinates. Arithmetic on jets is exact truncated Taylor
// arithmetic, so derivatives carried through smooth closed-form constructions
// (matrix inverses, square roots, trigonometric fields) are exact to
// round-off.

#include <array>
#include <cmath>
#include <stdexcept>

namespace akcurv {

inline constexpr int kMaxJetDim = 8;

class Jet {
 public:
  Jet() = default;
  explicit Jet(int dim, double value = 0.0) : dim_(dim) { c_[0] = value; }

  static Jet variable(int dim, int index, double value) {
    Jet j(dim, value);
    j.c_[1 + index] = 1.0;
    return j;
  }

  int dim() const { return dim_; }
  double value() const { return c_[0]; }
  double grad(int a) const { return c_[1 + a]; }
  double hess(int a, int b) const { return c_[1 + dim_ + a * dim_ + b]; }

  double& value() { return c_[0]; }
  double& grad(int a) { return c_[1 + a]; }
  double& hess(int a, int b) { return c_[1 + dim_ + a * dim_ + b]; }

  // Storage is [value, grad(dim), hess(dim×dim)], zero beyond; a constant
  // (dim 0) jet is promoted when combined with a jet of positive dim.
  Jet& operator+=(const Jet& o) {
    promote(o.dim_);
    const int len = o.used();
    for (int k = 0; k < len; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    promote(o.dim_);
    const int len = o.used();
    for (int k = 0; k < len; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(double s) {
    const int len = used();
    for (int k = 0; k < len; ++k) c_[k] *= s;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend Jet operator*(const Jet& x, const Jet& y) {
    if (x.dim_ == 0) return Jet(y) *= x.c_[0];
    if (y.dim_ == 0) return Jet(x) *= y.c_[0];
    if (x.dim_ != y.dim_) throw std::invalid_argument("jet dimensions differ");
    const int d = x.dim_;
    Jet r(d, x.c_[0] * y.c_[0]);
    const double xv = x.c_[0], yv = y.c_[0];
    const double* xg = x.c_.data() + 1;
    const double* yg = y.c_.data() + 1;
    const double* xh = xg + d;
    const double* yh = yg + d;
    double* rg = r.c_.data() + 1;
    double* rh = rg + d;
    for (int a = 0; a < d; ++a) rg[a] = xv * yg[a] + yv * xg[a];
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        const int k = a * d + b;
        const double v = xv * yh[k] + yv * xh[k] + xg[a] * yg[b] + xg[b] * yg[a];
        rh[k] = v;
        rh[b * d + a] = v;
      }
    }
    return r;
  }

  // f(x) given f, f', f'' at the value of x.
  friend Jet chain(const Jet& x, double f0, double f1, double f2) {
    const int d = x.dim_;
    Jet r(d, f0);
    const double* xg = x.c_.data() + 1;
    const double* xh = xg + d;
    double* rg = r.c_.data() + 1;
    double* rh = rg + d;
    for (int a = 0; a < d; ++a) rg[a] = f1 * xg[a];
    for (int a = 0; a < d; ++a) {
      for (int b = a; b < d; ++b) {
        const double v = f1 * xh[a * d + b] + f2 * xg[a] * xg[b];
        rh[a * d + b] = v;
        rh[b * d + a] = v;
      }
    }
    return r;
  }

 private:
  int used() const { return 1 + dim_ + dim_ * dim_; }
  void promote(int dim) {
    if (dim == dim_ || dim == 0) return;
    if (dim_ != 0) throw std::invalid_argument("jet dimensions differ");
    dim_ = dim;
  }

  int dim_ = 0;
  std::array<double, 1 + kMaxJetDim + kMaxJetDim * kMaxJetDim> c_{};
};

inline Jet operator+(Jet x, const Jet& y) { return x += y; }
inline Jet operator-(Jet x, const Jet& y) { return x -= y; }
inline Jet operator*(Jet x, double s) { return x *= s; }
inline Jet operator*(double s, Jet x) { return x *= s; }
inline Jet operator+(Jet x, double s) { return x += s; }
inline Jet operator+(double s, Jet x) { return x += s; }
inline Jet operator-(Jet x, double s) { return x += -s; }
inline Jet operator-(double s, const Jet& x) { return (x * -1.0) + s; }
inline Jet operator-(const Jet& x) { return x * -1.0; }

inline Jet reciprocal(const Jet& x) {
  const double v = x.value();
  if (v == 0.0) throw std::domain_error("jet reciprocal of zero");
  return chain(x, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
}
inline Jet operator/(const Jet& x, const Jet& y) { return x * reciprocal(y); }
inline Jet operator/(const Jet& x, double s) { return x * (1.0 / s); }
inline Jet operator/(double s, const Jet& x) { return s * reciprocal(x); }

inline Jet sin(const Jet& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  return chain(x, s, c, -s);
}
inline Jet cos(const Jet& x) {
  const double s = std::sin(x.value()), c = std::cos(x.value());
  return chain(x, c, -s, -c);
}
inline Jet exp(const Jet& x) {
  const double e = std::exp(x.value());
  return chain(x, e, e, e);
}
inline Jet log(const Jet& x) {
  const double v = x.value();
  return chain(x, std::log(v), 1.0 / v, -1.0 / (v * v));
}
inline Jet sqrt(const Jet& x) {
  const double r = std::sqrt(x.value());
  return chain(x, r, 0.5 / r, -0.25 / (r * x.value()));
}
inline Jet pow(const Jet& x, int k) {
  if (k == 0) return Jet(x.dim(), 1.0);
  const double v = x.value();
  const double f0 = std::pow(v, k);
  const double f1 = k * std::pow(v, k - 1);
  const double f2 = k == 1 ? 0.0 : static_cast<double>(k) * (k - 1) * std::pow(v, k - 2);
  return chain(x, f0, f1, f2);
}

// Jet with a compile-time dimension and packed symmetric Hessian; used on
// hot paths where every node evaluates hundreds of jet operations.
template <int D>
class FixedJet {
 public:
  static constexpr int kHess = D * (D + 1) / 2;

  FixedJet() = default;
  FixedJet(double value) : v_(value) {}  // NOLINT: constants mix freely

  static FixedJet variable(int index, double value) {
    FixedJet j(value);
    j.g_[index] = 1.0;
    return j;
  }
  static constexpr int slot(int a, int b) { return a <= b ? a * D - a * (a - 1) / 2 + (b - a) : slot(b, a); }

  double value() const { return v_; }
  double grad(int a) const { return g_[a]; }
  double hess(int a, int b) const { return h_[slot(a, b)]; }

  FixedJet& operator+=(const FixedJet& o) {
    v_ += o.v_;
    for (int a = 0; a < D; ++a) g_[a] += o.g_[a];
    for (int k = 0; k < kHess; ++k) h_[k] += o.h_[k];
    return *this;
  }
  FixedJet& operator-=(const FixedJet& o) {
    v_ -= o.v_;
    for (int a = 0; a < D; ++a) g_[a] -= o.g_[a];
    for (int k = 0; k < kHess; ++k) h_[k] -= o.h_[k];
    return *this;
  }
  FixedJet& operator*=(double s) {
    v_ *= s;
    for (int a = 0; a < D; ++a) g_[a] *= s;
    for (int k = 0; k < kHess; ++k) h_[k] *= s;
    return *this;
  }

  friend FixedJet operator*(const FixedJet& x, const FixedJet& y) {
    FixedJet r(x.v_ * y.v_);
    for (int a = 0; a < D; ++a) r.g_[a] = x.v_ * y.g_[a] + y.v_ * x.g_[a];
    int k = 0;
    for (int a = 0; a < D; ++a) {
      for (int b = a; b < D; ++b, ++k) {
        r.h_[k] = x.v_ * y.h_[k] + y.v_ * x.h_[k] + x.g_[a] * y.g_[b] + x.g_[b] * y.g_[a];
      }
    }
    return r;
  }

  friend FixedJet chain(const FixedJet& x, double f0, double f1, double f2) {
    FixedJet r(f0);
    for (int a = 0; a < D; ++a) r.g_[a] = f1 * x.g_[a];
    int k = 0;
    for (int a = 0; a < D; ++a) {
      for (int b = a; b < D; ++b, ++k) r.h_[k] = f1 * x.h_[k] + f2 * x.g_[a] * x.g_[b];
    }
    return r;
  }

  friend FixedJet operator+(FixedJet x, const FixedJet& y) { return x += y; }
  friend FixedJet operator-(FixedJet x, const FixedJet& y) { return x -= y; }
  friend FixedJet operator*(FixedJet x, double s) { return x *= s; }
  friend FixedJet operator*(double s, FixedJet x) { return x *= s; }
  friend FixedJet operator-(const FixedJet& x) { return x * -1.0; }
  friend FixedJet operator/(double s, const FixedJet& x) {
    const double v = x.v_;
    if (v == 0.0) throw std::domain_error("jet reciprocal of zero");
    return chain(x, s / v, -s / (v * v), 2.0 * s / (v * v * v));
  }
  friend FixedJet cos(const FixedJet& x) {
    const double s = std::sin(x.v_), c = std::cos(x.v_);
    return chain(x, c, -s, -c);
  }
  friend FixedJet sqrt(const FixedJet& x) {
    const double r = std::sqrt(x.v_);
    return chain(x, r, 0.5 / r, -0.25 / (r * x.v_));
  }

 private:
  double v_ = 0.0;
  std::array<double, D> g_{};
  std::array<double, kHess> h_{};
};

}  // namespace akcurv
