#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "log.hpp"
#include "parallel.hpp"

namespace carleman {

/// Boundary values f = U and tractions g = T(d_y, n)U at the nodes of S.
struct CauchyData {
  std::vector<Vec6> f;
  std::vector<Vec6> g;
  double delta = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return f.size(); }
};

inline CauchyData cauchy_data(const ManufacturedSolution& u, const SurfaceQuadrature& q, unsigned threads = 1) {
  CauchyData d;
  d.f.resize(q.size());
  d.g.resize(q.size());
  parallel_for(q.size(), threads, [&](std::size_t i) {
    auto s = u.sample(q.nodes[i]);
    d.f[i] = s.u;
    d.g[i] = stress_vector(s.u, s.du, q.normals[i], u.medium.params);
  });
  return d;
}

/// max over the quadrature nodes of |U| + |T(d_y, n)U|.
inline double data_bound(const ManufacturedSolution& u, const SurfaceQuadrature& q, unsigned threads = 1) {
  std::vector<double> v(q.size());
  parallel_for(q.size(), threads, [&](std::size_t i) {
    auto s = u.sample(q.nodes[i]);
    v[i] = norm(s.u) + norm(stress_vector(s.u, s.du, q.normals[i], u.medium.params));
  });
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

/// Componentwise uniform perturbation scaled so that
/// max_S |f - f_delta| + max_S |g - g_delta| = delta (1 - 1e-9).
inline CauchyData add_noise(const CauchyData& data, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("noise level delta must lie in [0, 1)");
  CauchyData out = data;
  out.delta = delta;
  out.seed = seed;
  if (delta == 0.0 || data.size() == 0) return out;
  std::mt19937_64 rng(seed);
  std::vector<Vec6> ef(data.size()), eg(data.size());
  double mf = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (auto& c : ef[i]) c = 2.0 * uniform01(rng) - 1.0;
    for (auto& c : eg[i]) c = 2.0 * uniform01(rng) - 1.0;
    mf = std::max(mf, norm(ef[i]));
    mg = std::max(mg, norm(eg[i]));
  }
  const double scale = delta * (1.0 - 1e-9) / (mf + mg);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int r = 0; r < 6; ++r) {
      out.f[i][r] += scale * ef[i][r];
      out.g[i][r] += scale * eg[i][r];
    }
  return out;
}

/// Noise budget: max_S |f1 - f2| + max_S |g1 - g2|.
inline double noise_budget(const CauchyData& a, const CauchyData& b) {
  double mf = 0.0, mg = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Vec6 df, dg;
    for (int r = 0; r < 6; ++r) {
      df[r] = a.f[i][r] - b.f[i][r];
      dg[r] = a.g[i][r] - b.g[i][r];
    }
    mf = std::max(mf, norm(df));
    mg = std::max(mg, norm(dg));
  }
  return mf + mg;
}

/// A boundary quadrature sum together with the scale it cancels from.
struct BoundarySum {
  Vec6 value{};
  double magnitude = 0.0;   ///< sum w (|K||g| + |TK||f|)
  double mass = 0.0;        ///< sum w (|K| + |TK|)
  double quad_error = 0.0;  ///< accumulated kernel quadrature estimate, weighted like magnitude
};

/// sum_i w_i [K(y_i, x)^T g_i - (T K)(y_i, x)^T f_i]. Nodes are reduced in
/// fixed blocks in index order, so the result does not depend on `threads`.
inline BoundarySum boundary_sum(const Vec3& x, const CauchyData& data, const SurfaceQuadrature& q, const Medium& m,
                                const KernelSpec& spec, unsigned threads = 1) {
  if (data.size() != q.size())
    throw ConfigError("Cauchy data has " + std::to_string(data.size()) + " nodes, quadrature has " +
                      std::to_string(q.size()));
  constexpr std::size_t block = 32;
  const std::size_t nblocks = (q.size() + block - 1) / block;
  std::vector<BoundarySum> partial(nblocks);
  parallel_for(nblocks, threads, [&](std::size_t b) {
    BoundarySum& acc = partial[b];
    for (std::size_t i = b * block; i < std::min(q.size(), (b + 1) * block); ++i) {
      KernelPair kp;
      try {
        kp = kernel_pair(q.nodes[i], x, q.normals[i], m, spec);
      } catch (...) {
        rethrow_with_context("node " + std::to_string(i) + " (" + to_string(q.part[i]) + ")");
      }
      const double w = q.weights[i];
      for (int c = 0; c < 6; ++c) {
        double s = 0.0;
        for (int r = 0; r < 6; ++r) s += kp.K[r][c] * data.g[i][r] - kp.TK[r][c] * data.f[i][r];
        acc.value[c] += w * s;
      }
      double mag = norm(kp.K) * norm(data.g[i]) + norm(kp.TK) * norm(data.f[i]);
      acc.magnitude += w * mag;
      acc.mass += w * (norm(kp.K) + norm(kp.TK));
      acc.quad_error += w * kp.quad_error * mag;
    }
  });
  BoundarySum total;
  for (auto& p : partial) {
    for (int c = 0; c < 6; ++c) total.value[c] += p.value[c];
    total.magnitude += p.magnitude;
    total.mass += p.mass;
    total.quad_error += p.quad_error;
  }
  return total;
}

inline void check_carleman_spec(const KernelSpec& spec, const Medium& m) {
  if (spec.kind == KernelKind::fundamental) throw ConfigError("u_tau needs a Carleman kernel, not the fundamental one");
  if (!(spec.tau > m.wn.k_max()))
    throw ConfigError("tau = " + std::to_string(spec.tau) + " must exceed max k_l = " + std::to_string(m.wn.k_max()));
}

/// Regularized solution from (possibly noisy) Cauchy data on S.
inline Vec6 u_tau(const Vec3& x, const CauchyData& data, const SurfaceQuadrature& S, const Medium& m,
                  const KernelSpec& spec, unsigned threads = 1) {
  check_carleman_spec(spec, m);
  return boundary_sum(x, data, S, m, spec, threads).value;
}

inline Vec6 u_tau_delta(const Vec3& x, const CauchyData& noisy, const SurfaceQuadrature& S, const Medium& m,
                        const KernelSpec& spec, unsigned threads = 1) {
  if (!(noisy.delta > 0.0 && noisy.delta < 1.0)) throw ConfigError("u_tau_delta: data noise level must lie in (0, 1)");
  return u_tau(x, noisy, S, m, spec, threads);
}

/// Representation of U from its Cauchy data on the whole boundary with the
/// fundamental matrix.
inline Vec6 representation(const Vec3& x, const CauchyData& full_data, const SurfaceQuadrature& full, const Medium& m,
                           unsigned threads = 1) {
  return boundary_sum(x, full_data, full, m, KernelSpec::fundamental(), threads).value;
}

/// sum_i w_i (|Pi(y_i, x)| + |T Pi(y_i, x)|) over a surface, usually Sigma.
inline double kernel_mass(const Vec3& x, const SurfaceQuadrature& q, const Medium& m, const KernelSpec& spec,
                          unsigned threads = 1) {
  std::vector<double> v(q.size());
  parallel_for(q.size(), threads, [&](std::size_t i) {
    try {
      auto kp = kernel_pair(q.nodes[i], x, q.normals[i], m, spec);
      v[i] = q.weights[i] * (norm(kp.K) + norm(kp.TK));
    } catch (...) {
      rethrow_with_context("node " + std::to_string(i) + " (" + to_string(q.part[i]) + ")");
    }
  });
  double s = 0.0;
  for (double a : v) s += a;
  return s;
}

// ------------------------------------------------------------- tau rule

/// max over the nodes of S of Re (i sqrt(s) + y3)^rho (principal branch), s = |y'|^2.
inline double cone_r_power(const SurfaceQuadrature& S, double rho_e) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& y : S.nodes) {
    std::complex<double> w(y[2], std::hypot(y[0], y[1]));
    best = std::max(best, std::pow(w, rho_e).real());
  }
  if (!(best > 0.0)) throw GeometryError("cone tau rule: max_S Re(i sqrt(s) + y3)^rho is not positive");
  return best;
}

struct TauChoice {
  double tau = 0.0;
  double raw = 0.0;     ///< value of the rule before the floor
  double floor = 0.0;   ///< 1.25 max k_l
  double R = 0.0;       ///< cone only
  bool floored = false;
};

/// tau = ln(M/delta) / x3^0 (cap) or (kappa R)^-rho ln(M/delta) (cone),
/// floored at 1.25 max k_l.
inline TauChoice choose_tau(double M, double delta, const DomainQuadrature& dq, const WaveNumbers& wn) {
  if (!(delta > 0.0)) throw ConfigError("choose_tau: delta must be positive");
  if (!(delta < M)) throw ConfigError("choose_tau: invalid ratio, delta must be smaller than M");
  const double lg = std::log(M / delta);
  TauChoice c;
  if (dq.domain.branch == Branch::cap) {
    c.raw = lg / dq.domain.x3_top();
  } else {
    const double rho = dq.domain.rho_e;
    c.R = std::pow(cone_r_power(dq.S, rho), 1.0 / rho);
    c.raw = std::pow(dq.domain.kappa * c.R, -rho) * lg;
  }
  c.floor = 1.25 * wn.k_max();
  c.tau = std::max(c.raw, c.floor);
  c.floored = c.raw < c.floor;
  if (c.floored) log().warn("choose_tau: rule gives tau = {:.4g}, floored at 1.25 max k = {:.4g}", c.raw, c.floor);
  return c;
}

// ---------------------------------------------------------------- audit

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (x_i, y_i).
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw AuditError("fit: mismatched sample counts");
  if (x.size() < 3) throw AuditError("fit: insufficient grid (" + std::to_string(x.size()) + " < 3 points)");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw AuditError("fit: non-finite sample");
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw AuditError("fit: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

inline bool strictly_decreasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

inline bool strictly_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

/// A tau sweep at one probe: slope of ln(value / tau^m) against tau. Use
/// m = 0 for errors and the bound's prefactor power for kernel masses.
struct TauAudit {
  Vec3 probe{};
  std::vector<double> taus, errors, floors;
  int power = 1;
  double slope = 0.0;
  double expected = 0.0;
  double ratio = 0.0;  ///< error(last) / error(first)
  bool decreasing = false;
  bool floor_reached = false;
  bool slope_ok = false;
  bool ratio_ok = false;
};

struct TauTolerances {
  double slope_rel = 0.25;
  double ratio = 0.1;
  bool assert_slope = true;
};

inline TauAudit audit_tau(const Vec3& probe, std::vector<double> taus, std::vector<double> errors,
                          std::vector<double> floors, double expected_slope, int power, const TauTolerances& tol) {
  if (taus.size() < 3) throw AuditError("tau audit: insufficient grid (" + std::to_string(taus.size()) + " < 3 points)");
  TauAudit a;
  a.probe = probe;
  a.power = power;
  a.expected = expected_slope;
  std::vector<double> ly(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) ly[i] = std::log(errors[i]) - power * std::log(taus[i]);
  a.slope = fit_line(taus, ly).slope;
  a.ratio = errors.back() / errors.front();
  a.decreasing = strictly_decreasing(errors);
  for (std::size_t i = 0; i < floors.size(); ++i)
    if (errors[i] <= floors[i]) a.floor_reached = true;
  a.slope_ok = !tol.assert_slope || std::abs(a.slope - expected_slope) <= tol.slope_rel * std::abs(expected_slope);
  a.ratio_ok = a.ratio <= tol.ratio;
  a.taus = std::move(taus);
  a.errors = std::move(errors);
  a.floors = std::move(floors);
  return a;
}

/// Error against delta at one probe with tau = choose_tau(M, delta). The
/// exponent is a plain power-law fit; the constants use the bound shape
/// C delta^p (ln M/delta)^m.
struct DeltaAudit {
  Vec3 probe{};
  double M = 0.0;
  int power = 1;
  std::vector<double> deltas, taus, errors;
  std::vector<double> constants;  ///< error / (delta^expected (ln M/delta)^m)
  std::vector<double> bounds;     ///< max constant times delta^expected (ln M/delta)^m
  double exponent = 0.0;          ///< slope of ln(error) against ln(delta)
  double exponent_log_adjusted = 0.0;  ///< same after dividing by (ln M/delta)^m
  double expected = std::numeric_limits<double>::quiet_NaN();
  double constant_spread = 0.0;   ///< max / min of `constants`
  bool error_monotone = false;    ///< error grows with delta
  bool bound_monotone = false;
  bool exponent_ok = false;
  bool spread_ok = false;
};

struct DeltaTolerances {
  double exponent_rel = 0.3;
  double constant_spread = 5.0;
  bool assert_exponent = true;
};

/// `expected` is x3/x3^0 for the cap; for the cone pass NaN and the constants
/// use the fitted exponent.
inline DeltaAudit audit_delta(const Vec3& probe, double M, std::vector<double> deltas, std::vector<double> taus,
                              std::vector<double> errors, double expected, int power, const DeltaTolerances& tol) {
  if (deltas.size() < 3)
    throw AuditError("delta audit: insufficient grid (" + std::to_string(deltas.size()) + " < 3 points)");
  DeltaAudit a;
  a.probe = probe;
  a.M = M;
  a.power = power;
  a.expected = expected;
  std::vector<std::size_t> order(deltas.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return deltas[i] < deltas[j]; });
  for (auto i : order) {
    a.deltas.push_back(deltas[i]);
    a.taus.push_back(taus[i]);
    a.errors.push_back(errors[i]);
  }
  std::vector<double> lx, ly, ladj;
  for (std::size_t i = 0; i < a.deltas.size(); ++i) {
    lx.push_back(std::log(a.deltas[i]));
    ly.push_back(std::log(a.errors[i]));
    ladj.push_back(ly.back() - power * std::log(std::log(M / a.deltas[i])));
  }
  a.exponent = fit_line(lx, ly).slope;
  a.exponent_log_adjusted = fit_line(lx, ladj).slope;
  const double p = std::isnan(expected) ? a.exponent : expected;
  double cmax = 0.0, cmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.deltas.size(); ++i) {
    double shape = std::pow(a.deltas[i], p) * std::pow(std::log(M / a.deltas[i]), power);
    a.constants.push_back(a.errors[i] / shape);
    cmax = std::max(cmax, a.constants.back());
    cmin = std::min(cmin, a.constants.back());
  }
  for (std::size_t i = 0; i < a.deltas.size(); ++i)
    a.bounds.push_back(cmax * std::pow(a.deltas[i], p) * std::pow(std::log(M / a.deltas[i]), power));
  a.constant_spread = cmax / cmin;
  a.error_monotone = strictly_increasing(a.errors);
  a.bound_monotone = strictly_increasing(a.bounds);
  a.exponent_ok = std::isnan(expected) ? a.exponent > 0.0
                  : !tol.assert_exponent || std::abs(a.exponent - expected) <= tol.exponent_rel * std::abs(expected);
  a.spread_ok = a.constant_spread <= tol.constant_spread;
  return a;
}

}  // namespace carleman
