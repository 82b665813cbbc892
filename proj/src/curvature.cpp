#include <akcurv/curvature.hpp>
#include <akcurv/dense.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace akcurv {

namespace {

constexpr DerivativeSlot z(char i) { return {'z', i}; }
constexpr DerivativeSlot t(char i) { return {'t', i}; }

const TermGroup kGroupC{"c (dz_k ^ dt_l)",
                        "i",
                        {
                            {+1, Block::P, z('i'), t('l'), 'k', 'i'},
                            {-1, Block::G, t('i'), t('l'), 'k', 'i'},
                            {+1, Block::P, z('k'), t('i'), 'i', 'l'},
                            {-1, Block::H, z('i'), z('k'), 'l', 'i'},
                        },
                        {
                            {+1, t('l'), z('k')},
                            {-1, z('k'), t('l')},
                        }};

const TermGroup kGroupD{"d (dz_k ^ dz_l)",
                        "i",
                        {
                            {+1, Block::P, z('i'), z('l'), 'k', 'i'},
                            {-1, Block::P, z('k'), z('l'), 'i', 'i'},
                            {-1, Block::G, z('l'), t('i'), 'k', 'i'},
                        },
                        {
                            {+1, z('l'), z('k')},
                        }};

const TermGroup kGroupE{"e (dt_k ^ dt_l)",
                        "i",
                        {
                            {+1, Block::P, t('i'), t('k'), 'i', 'l'},
                            {+1, Block::P, t('l'), t('k'), 'i', 'i'},
                            {-1, Block::H, z('i'), t('k'), 'l', 'i'},
                        },
                        {
                            {-1, t('k'), t('l')},
                        }};

const TermGroup kGroupS{"s",
                        "ij",
                        {
                            {-1, Block::G, t('i'), t('j'), 'i', 'j'},
                            {-1, Block::H, z('i'), z('j'), 'i', 'j'},
                            {+1, Block::P, z('j'), t('i'), 'i', 'j'},
                            {+1, Block::P, z('i'), t('j'), 'j', 'i'},
                        },
                        {
                            {+1, t('k'), z('k')},
                            {-1, z('k'), t('k')},
                        }};

// Index environment: values of i, j, k, l.
struct Env {
  int i = 0, j = 0, k = 0, l = 0;
  int operator[](char c) const {
    switch (c) {
      case 'i': return i;
      case 'j': return j;
      case 'k': return k;
      case 'l': return l;
    }
    throw std::logic_error("unknown index symbol");
  }
};

int axis_of(const DerivativeSlot& s, const Env& env, int n) { return (s.kind == 'z' ? 0 : n) + env[s.index]; }

// T(a, b) = ∂_a Σ H^{ij} P_lj ∂_b H_il for all coordinate axes a, b.
struct MixedTable {
  int d = 0;
  std::array<double, kMaxDim * kMaxDim> T{};

  void build(const MetricJet& m) {
    const int n = m.n;
    d = 2 * n;
    std::array<double, 16> H{}, Hinv{};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) H[i * n + j] = m.v(Block::H, i, j);
    }
    if (!dense::invert(H.data(), Hinv.data(), n, 1e-300)) throw std::domain_error("H is singular");
    // ∂_a H⁻¹ = −H⁻¹ (∂_a H) H⁻¹
    std::array<std::array<double, 16>, kMaxDim> dHinv{};
    for (int a = 0; a < d; ++a) {
      std::array<double, 16> dH{}, tmp{};
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) dH[i * n + j] = m.d(Block::H, a, i, j);
      }
      dense::multiply(Hinv.data(), dH.data(), tmp.data(), n, n, n);
      dense::multiply(tmp.data(), Hinv.data(), dHinv[a].data(), n, n, n);
      for (int c = 0; c < n * n; ++c) dHinv[a][c] = -dHinv[a][c];
    }
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            for (int l = 0; l < n; ++l) {
              s += dHinv[a][i * n + j] * m.v(Block::P, l, j) * m.d(Block::H, b, i, l);
              s += Hinv[i * n + j] * m.d(Block::P, a, l, j) * m.d(Block::H, b, i, l);
              s += Hinv[i * n + j] * m.v(Block::P, l, j) * m.dd(Block::H, a, b, i, l);
            }
          }
        }
        T[a * d + b] = s;
      }
    }
  }
  double operator()(int a, int b) const { return T[a * d + b]; }
};

double evaluate_group(const TermGroup& group, const MetricJet& m, const MixedTable& T, Env env) {
  const int n = m.n;
  const bool two = group.summed[1] == 'j';
  double total = 0.0;
  for (env.i = 0; env.i < n; ++env.i) {
    for (env.j = 0; env.j < (two ? n : 1); ++env.j) {
      for (const PlainTerm& term : group.plain) {
        const int a = axis_of(term.first, env, n), b = axis_of(term.second, env, n);
        total += term.sign * m.dd(term.block, a, b, env[term.row], env[term.col]);
      }
    }
  }
  if (group.name[0] == 's') {
    for (env.k = 0; env.k < n; ++env.k) {
      for (const MixedTerm& term : group.mixed) {
        total += term.sign * T(axis_of(term.outer, env, n), axis_of(term.inner, env, n));
      }
    }
  } else {
    for (const MixedTerm& term : group.mixed) {
      total += term.sign * T(axis_of(term.outer, env, n), axis_of(term.inner, env, n));
    }
  }
  return total;
}

}  // namespace

const TermGroup& term_group(char which) {
  switch (which) {
    case 'c': return kGroupC;
    case 'd': return kGroupD;
    case 'e': return kGroupE;
    case 's': return kGroupS;
  }
  throw std::invalid_argument("unknown term group");
}

const char* formula_name(Formula f) { return f == Formula::General ? "general" : "toric"; }

void hermitian_ricci_point(const MetricJet& m, double* rho) {
  const int n = m.n, d = 2 * n;
  MixedTable T;
  T.build(m);
  std::fill(rho, rho + d * d, 0.0);
  std::array<double, 16> dkl{}, ekl{};
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      Env env;
      env.k = k;
      env.l = l;
      const double c = 0.5 * evaluate_group(kGroupC, m, T, env);
      rho[k * d + n + l] = c;
      rho[(n + l) * d + k] = -c;
      dkl[k * n + l] = evaluate_group(kGroupD, m, T, env);
      ekl[k * n + l] = evaluate_group(kGroupE, m, T, env);
    }
  }
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (k == l) continue;
      rho[k * d + l] = 0.5 * (dkl[k * n + l] - dkl[l * n + k]);
      rho[(n + k) * d + n + l] = 0.5 * (ekl[k * n + l] - ekl[l * n + k]);
    }
  }
}

double hermitian_scalar_point(const MetricJet& m) {
  MixedTable T;
  T.build(m);
  return evaluate_group(kGroupS, m, T, Env{});
}

void hermitian_ricci_toric_point(const MetricJet& m, double* rho) {
  const int n = m.n, d = 2 * n;
  std::fill(rho, rho + d * d, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += m.dd(Block::H, i, k, l, i);
      rho[k * d + n + l] = -0.5 * s;
      rho[(n + l) * d + k] = 0.5 * s;
    }
  }
  // The dz∧dz part needs (Q_k),r = T(z_r, z_k); the t-derivative groups vanish.
  bool has_p = false;
  for (int c = 0; c < n * n && !has_p; ++c) has_p = m.val[2 * n * n + c] != 0.0;
  for (int a = 0; a < d && !has_p; ++a) {
    for (int c = 0; c < n * n && !has_p; ++c) has_p = m.d1[a * m.blocks() + 2 * n * n + c] != 0.0;
  }
  if (!has_p) return;
  MixedTable T;
  T.build(m);
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (k == l) continue;
      auto coefficient = [&](int a, int b) {
        double s = T(b, a);
        for (int i = 0; i < n; ++i) s += m.dd(Block::P, i, b, a, i) - m.dd(Block::P, a, b, i, i);
        return s;
      };
      rho[k * d + l] = 0.5 * (coefficient(k, l) - coefficient(l, k));
    }
  }
}

double hermitian_scalar_toric_point(const MetricJet& m) {
  double s = 0.0;
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j) s -= m.dd(Block::H, i, j, i, j);
  }
  return s;
}

HermitianCurvature hermitian_curvature(const JetProvider& provider, Formula formula) {
  return hermitian_curvature(provider, formula, provider.region());
}

HermitianCurvature hermitian_curvature(const JetProvider& provider, Formula formula, const Region& region) {
  if (formula == Formula::Toric && !provider.toric()) {
    throw std::invalid_argument("toric fast path requires t-independent metric data");
  }
  HermitianCurvature out;
  out.path = provider.path();
  out.formula = formula;
  const bool general = formula == Formula::General;
  const int d = provider.chart()->dim();
  // One jet evaluation per node; ρ and s are split afterwards.
  GridField both = evaluate_field(provider, Shape::Custom, d * d + 1, region, true,
                                  [general, d](const MetricJet& m, std::span<const int>, double* v) {
                                    if (general) {
                                      hermitian_ricci_point(m, v);
                                      v[d * d] = hermitian_scalar_point(m);
                                    } else {
                                      hermitian_ricci_toric_point(m, v);
                                      v[d * d] = hermitian_scalar_toric_point(m);
                                    }
                                  });
  out.rho = GridField(provider.chart(), Shape::TwoForm, provider.toric());
  out.s = GridField(provider.chart(), Shape::Scalar, provider.toric());
  out.rho.set_valid(both.valid());
  out.s.set_valid(both.valid());
  for (std::size_t node = 0; node < both.nodes(); ++node) {
    const double* src = both.at(node);
    std::copy(src, src + d * d, out.rho.at(node));
    out.s.at(node)[0] = src[d * d];
  }
  return out;
}

namespace {

// Trapezoid weight of node index j on an axis restricted to [lo, hi].
double trapezoid_weight(const Axis& axis, const Region& r, int a, int j) {
  if (axis.periodic && r.lo[a] == 0 && r.hi[a] == axis.points - 1) return 1.0;
  if (r.lo[a] == r.hi[a]) return 1.0;
  return (j == r.lo[a] || j == r.hi[a]) ? 0.5 : 1.0;
}

template <class Fn>
void weighted_sum(const GridField& f, Fn&& fn) {
  const DarbouxChart& chart = f.chart();
  const Region& r = f.valid();
  const int active = f.toric() ? chart.n() : chart.dim();
  r.for_each(
      [&](std::span<const int> idx) {
        double w = 1.0;
        for (int a = 0; a < active; ++a) w *= trapezoid_weight(chart.axis(a), r, a, idx[a]);
        fn(w, f.at(idx)[0]);
      },
      f.toric(), chart.n());
}

}  // namespace

double trapezoid_mean(const GridField& f) {
  double sw = 0.0, s = 0.0;
  weighted_sum(f, [&](double w, double v) {
    sw += w;
    s += w * v;
  });
  if (sw == 0.0) throw std::invalid_argument("empty region");
  return s / sw;
}

double trapezoid_stddev(const GridField& f) {
  const double mean = trapezoid_mean(f);
  double sw = 0.0, s = 0.0;
  weighted_sum(f, [&](double w, double v) {
    sw += w;
    s += w * (v - mean) * (v - mean);
  });
  return std::sqrt(s / sw);
}

EinsteinReport hermitian_einstein_residual(const JetProvider& provider, const HermitianCurvature& curvature) {
  EinsteinReport report;
  report.mean_s = trapezoid_mean(curvature.s);
  const int n = provider.chart()->n(), d = 2 * n;
  std::array<double, kMaxDim * kMaxDim> omega{};
  omega_matrix(n, omega.data());
  const double factor = report.mean_s / (2.0 * n);
  const Region region = curvature.rho.valid();
  GridField anti = evaluate_field(provider, Shape::Scalar, 0, region, false,
                                  [&](const MetricJet& m, std::span<const int> idx, double* v) {
                                    std::array<double, kMaxDim * kMaxDim> J{};
                                    acs_point(m, J.data());
                                    const double* rho = curvature.rho.at(idx);
                                    double worst = 0.0;
                                    for (int a = 0; a < d; ++a) {
                                      for (int b = 0; b < d; ++b) {
                                        double jj = 0.0;  // ρ(J∂a, J∂b) = J^c_a ρ_cd J^d_b
                                        for (int c = 0; c < d; ++c) {
                                          for (int e = 0; e < d; ++e) jj += J[c * d + a] * rho[c * d + e] * J[e * d + b];
                                        }
                                        worst = std::max(worst, std::abs(0.5 * (rho[a * d + b] - jj)));
                                      }
                                    }
                                    v[0] = worst;
                                  });
  report.anti_invariant_norm = anti.max_abs();
  region.for_each(
      [&](std::span<const int> idx) {
        const double* rho = curvature.rho.at(idx);
        for (int c = 0; c < d * d; ++c) {
          report.residual = std::max(report.residual, std::abs(rho[c] - factor * omega[c]));
        }
        report.s_variation = std::max(report.s_variation, std::abs(curvature.s.at(idx)[0] - report.mean_s));
      },
      curvature.rho.toric(), n);
  return report;
}

ConsistencyReport scalar_consistency(const JetProvider& provider, const HermitianCurvature& curvature) {
  ConsistencyReport out;
  GridField J = evaluate_field(provider, Shape::Matrix, 0, curvature.rho.valid(), false,
                               [](const MetricJet& m, std::span<const int>, double* v) { acs_point(m, v); });
  out.lambda_rho = lambda_contract(curvature.rho, J);
  const int n = provider.chart()->n();
  out.lambda_rho.valid().for_each(
      [&](std::span<const int> idx) {
        const double r = std::abs(curvature.s.at(idx)[0] - 2.0 * out.lambda_rho.at(idx)[0]);
        out.max_residual = std::max(out.max_residual, r);
      },
      curvature.rho.toric(), n);
  return out;
}

}  // namespace akcurv
