#pragma once

// Small row-major dense kernels, generic over double and Jet.

#include <cmath>
#include <stdexcept>

namespace akcurv::dense {

inline double magnitude(double x) { return std::abs(x); }
template <class T>
double magnitude(const T& x) {
  return std::abs(x.value());
}

// out = a * b for (r x k) * (k x c).
template <class T>
void multiply(const T* a, const T* b, T* out, int r, int k, int c) {
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      T s = a[i * k] * b[j];
      for (int l = 1; l < k; ++l) s = s + a[i * k + l] * b[l * c + j];
      out[i * c + j] = s;
    }
  }
}

namespace detail {

template <int kMax, class T>
bool invert(const T* a, T* out, int n, double tiny) {
  T work[kMax * kMax];
  for (int i = 0; i < n * n; ++i) work[i] = a[i];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out[i * n + j] = work[0] * 0.0 + (i == j ? 1.0 : 0.0);
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (magnitude(work[r * n + col]) > magnitude(work[pivot * n + col])) pivot = r;
    }
    if (!(magnitude(work[pivot * n + col]) > tiny)) return false;
    if (pivot != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(work[pivot * n + j], work[col * n + j]);
        std::swap(out[pivot * n + j], out[col * n + j]);
      }
    }
    const T inv = 1.0 / work[col * n + col];
    for (int j = 0; j < n; ++j) {
      work[col * n + j] = work[col * n + j] * inv;
      out[col * n + j] = out[col * n + j] * inv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const T f = work[r * n + col];
      if (magnitude(f) == 0.0) continue;
      for (int j = 0; j < n; ++j) {
        work[r * n + j] = work[r * n + j] - f * work[col * n + j];
        out[r * n + j] = out[r * n + j] - f * out[col * n + j];
      }
    }
  }
  return true;
}

}  // namespace detail

// Gauss-Jordan inverse with partial pivoting on the value part. Returns
// false when a pivot falls below `tiny`.
template <class T>
bool invert(const T* a, T* out, int n, double tiny = 1e-300) {
  if (n > 8) throw std::invalid_argument("dense::invert supports n <= 8");
  if (n <= 2) return detail::invert<2>(a, out, n, tiny);
  if (n <= 4) return detail::invert<4>(a, out, n, tiny);
  return detail::invert<8>(a, out, n, tiny);
}

// Smallest pivot of an LDLᵀ factorization with symmetric diagonal pivoting;
// positive iff the matrix is positive-definite (up to round-off).
inline double min_ldlt_pivot(const double* a, int n) {
  constexpr int kMax = 8;
  double w[kMax * kMax];
  int perm[kMax];
  for (int i = 0; i < n * n; ++i) w[i] = a[i];
  for (int i = 0; i < n; ++i) perm[i] = i;
  double smallest = INFINITY;
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int r = k + 1; r < n; ++r) {
      if (w[perm[r] * n + perm[r]] > w[perm[p] * n + perm[p]]) p = r;
    }
    std::swap(perm[k], perm[p]);
    const int pk = perm[k];
    const double d = w[pk * n + pk];
    if (d < smallest) smallest = d;
    if (!(d > 0.0)) return d;
    for (int r = k + 1; r < n; ++r) {
      const int pr = perm[r];
      const double l = w[pr * n + pk] / d;
      for (int c = k + 1; c < n; ++c) {
        const int pc = perm[c];
        w[pr * n + pc] -= l * w[pk * n + pc];
      }
    }
  }
  return smallest;
}

}  // namespace akcurv::dense
