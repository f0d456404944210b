#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "jet.hpp"
#include "material.hpp"
#include "specfun.hpp"

namespace carleman {

using Vec3 = std::array<double, 3>;
using Vec6 = std::array<double, 6>;
using Mat6 = std::array<std::array<double, 6>, 6>;

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
inline double norm(const Vec6& v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}
/// Euclidean (Frobenius) norm of a 6x6 matrix.
inline double norm(const Mat6& m) {
  double s = 0.0;
  for (auto& row : m)
    for (double c : row) s += c * c;
  return std::sqrt(s);
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline constexpr int levi_civita(int i, int j, int k) {
  return (i == j || j == k || i == k) ? 0 : (((j - i + 3) % 3 == 1) ? 1 : -1);
}

/// Normalization constant of the Carleman scalar in three dimensions, fixed
/// by requiring the tau = 0 kernel to equal yukawa_kernel.
inline constexpr double c3_constant = -2.0 * std::numbers::pi * std::numbers::pi;

enum class Branch { cap, cone };
enum class KernelKind { fundamental, carleman_cap, carleman_cone };
enum class TauReading { literal, product_rule };

inline const char* to_string(Branch b) { return b == Branch::cap ? "cap" : "cone"; }

struct PhiOptions {
  TauReading reading = TauReading::literal;
  double c3_scale = 1.0;        ///< fault injection: C_3 -> c3_scale * C_3
  int t_nodes = 20;             ///< Gauss points per tau-panel (cap)
  double t_panel_phase = 6.0;   ///< radians of variation per tau-panel
  int u_nodes = 16;             ///< Gauss points per u-panel (cone)
  double u_panel_phase = 6.0;
  double u_truncation = 40.0;   ///< minimum truncation length of the u-integral (cone)
  double abel_eta = 0.05;       ///< initial damping, rho = 1 only
  int abel_levels = 5;
};

/// Value and y-derivatives (up to third order) of Phi(y, x, k_l) for one l.
struct CarlemanScalar {
  Jet3 jet;  ///< Taylor coefficients in (y - y0)
  int l = 0;
  double k = 0.0;
  double tau = 0.0;
  KernelKind kind = KernelKind::fundamental;
  double quad_error = 0.0;  ///< truncation/quadrature estimate (cone)

  double value() const { return jet.value(); }
  Vec3 grad_y() const {
    return {jet.derivative({1, 0, 0}), jet.derivative({0, 1, 0}), jet.derivative({0, 0, 1})};
  }
  double hess_y(int i, int j) const {
    std::array<int, 3> e{};
    ++e[i];
    ++e[j];
    return jet.derivative(e);
  }
  /// x-gradient; only translation-invariant kernels (fundamental, cap) depend
  /// on y - x alone.
  Vec3 grad_x() const {
    if (kind == KernelKind::carleman_cone)
      throw Error("grad_x is not available for the cone kernel (not a function of y - x)");
    Vec3 g = grad_y();
    return {-g[0], -g[1], -g[2]};
  }
};

namespace detail {

inline std::array<Jet3, 3> offset_jets(const Vec3& d) {
  return {Jet3::variable(0, d[0]), Jet3::variable(1, d[1]), Jet3::variable(2, d[2])};
}

struct RadialJets {
  Jet3 r;
  Jet3 inv_r;
};

inline RadialJets radial(const Vec3& d) {
  auto D = offset_jets(d);
  Jet3 r2 = D[0] * D[0] + D[1] * D[1] + D[2] * D[2];
  Jet3 r = sqrt(r2);
  return {r, inverse(r)};
}

inline Jet3 yukawa_from(const RadialJets& rj, double k) {
  return exp(rj.r * (-k)) * rj.inv_r * (1.0 / (4.0 * std::numbers::pi));
}

inline void require_distinct(const Vec3& y, const Vec3& x, const char* what) {
  if (norm(y - x) == 0.0) throw SingularityError(std::string(what) + ": y coincides with x");
}

}  // namespace detail

inline Jet3 yukawa_jet(const Vec3& d, double k) { return detail::yukawa_from(detail::radial(d), k); }

// ----------------------------------------------------------------- cap Phi

namespace detail {

using Jet2 = Jet<double, 2, 3>;

/// Taylor table of G(s,h) = int_k^tau t^b-weighted e^{th} J0(sqrt(s(t^2-k^2))) dt
/// in (s, h); with_h = false drops the e^{th} factor (product-rule reading).
inline Jet2 cap_integral_table(double s, double h, double k, double tau, const PhiOptions& opt, bool with_h) {
  double f[4][4] = {};
  double len = tau - k;
  double rate = std::sqrt(s) + (with_h ? std::abs(h) : 0.0) + 1e-3;
  int panels = std::max(1, static_cast<int>(std::ceil(len * rate / opt.t_panel_phase)));
  double width = len / panels;
  const GaussRule& g = gauss_legendre(opt.t_nodes);
  double A[4];
  for (int p = 0; p < panels; ++p) {
    double mid = k + (p + 0.5) * width, half = 0.5 * width;
    for (int i = 0; i < opt.t_nodes; ++i) {
      double t = mid + half * g.x[i];
      double q = t * t - k * k;
      bessel_scaled(s * q, 3, A);
      double w = g.w[i] * half * (with_h ? std::exp(t * h) : 1.0);
      double qa = 1.0;
      for (int a = 0; a <= 3; ++a) {
        double base = w * qa * A[a];
        double tb = 1.0;
        for (int b = 0; a + b <= 3; ++b) {
          f[a][b] += base * tb;
          if (!with_h) break;
          tb *= t;
        }
        qa *= -0.5 * q;
      }
    }
  }
  Jet2 j;
  const auto& tab = Jet2::table;
  for (std::size_t i = 0; i < Jet2::size; ++i) {
    int a = tab.exps[i][0], b = tab.exps[i][1];
    j.c[i] = f[a][b] / tab.factorial_weight[i];
  }
  return j;
}

inline Jet3 cap_phi_jet(const Vec3& d, const RadialJets& rj, double k, double tau, const PhiOptions& opt) {
  Jet3 y = yukawa_from(rj, k);
  const double scale = 1.0 / opt.c3_scale;
  if (tau == k) throw BranchPointError("phi_cap: tau == k is a branch point of the tau-derivative");
  if (tau < k) return y * scale;
  auto D = offset_jets(d);
  std::array<Jet3, 2> sh{D[0] * D[0] + D[1] * D[1], D[2]};
  double s = d[0] * d[0] + d[1] * d[1], h = d[2];
  const double c = std::numbers::pi / (2.0 * c3_constant);  // = -1 / (4 pi)
  if (opt.reading == TauReading::literal) {
    Jet3 g = substitute(cap_integral_table(s, h, k, tau, opt, true), sh);
    return (y + g * c) * scale;
  }
  Jet3 g = substitute(cap_integral_table(s, h, k, tau, opt, false), sh);
  return exp(D[2] * tau) * (y + g * c) * scale;
}

}  // namespace detail

/// Carleman scalar of the cap domain with the kernel exp(tau w).
inline CarlemanScalar phi_cap(const Vec3& y, const Vec3& x, double k, double tau, const PhiOptions& opt = {}) {
  detail::require_distinct(y, x, "phi_cap");
  if (!(k > 0.0)) throw BranchPointError("phi_cap: k must be positive");
  if (tau < 0.0) throw Error("phi_cap: tau must be non-negative");
  Vec3 d = y - x;
  CarlemanScalar cs;
  cs.jet = detail::cap_phi_jet(d, detail::radial(d), k, tau, opt);
  cs.k = k;
  cs.tau = tau;
  cs.kind = KernelKind::carleman_cap;
  return cs;
}

/// Direct evaluation of the cap scalar from its u-integral representation
/// with Abel damping; an independent oracle for phi_cap (value only).
inline QuadResult phi_cap_oracle(const Vec3& y, const Vec3& x, double k, double tau, double eta = 0.2,
                                 double tolerance = 1e-6) {
  Vec3 d = y - x;
  double s = d[0] * d[0] + d[1] * d[1], h = d[2], r2 = s + h * h;
  QuadSpec spec;
  spec.nodes = 24;
  spec.panel_width = 0.5;
  spec.abel_eta = eta;
  spec.extrapolation_order = 5;
  spec.tolerance = tolerance;
  auto f = [&](double u) {
    double a = std::sqrt(u * u + s);
    return (h * std::sin(tau * a) / a - std::cos(tau * a)) * std::cos(k * u) / (u * u + r2);
  };
  QuadResult r = semiinf_quad(f, spec);
  double pre = std::exp(tau * h) / c3_constant;
  r.value *= pre;
  r.error *= std::abs(pre);
  r.tail *= std::abs(pre);
  return r;
}

/// dPhi/dtau under the chosen reading of the closed-form tau-derivative.
inline double phi_cap_dtau(const Vec3& y, const Vec3& x, double k, double tau, TauReading reading) {
  Vec3 d = y - x;
  double s = d[0] * d[0] + d[1] * d[1], h = d[2];
  double lit = std::exp(tau * h) * weber_disc(tau, k, s) / c3_constant;
  if (reading == TauReading::literal) return lit;
  PhiOptions o;
  o.reading = TauReading::product_rule;
  double phi = phi_cap(y, x, k, tau, o).value();
  return lit + h * phi;
}

// ----------------------------------------------------------------- cone Phi

namespace detail {

using CJet2 = Jet<cplx, 2, 3>;

struct ConeSetup {
  double s, y3, x3, c, rho, norm_inv;
  std::span<const double> ks;
};

/// Integrand jet Im[E(c w)/(w - x3)] / a in (s, y3) at one u.
inline Jet2 cone_integrand(const ConeSetup& cs, double u) {
  Jet2 a2 = Jet2::variable(0, cs.s) + u * u;
  Jet2 a = sqrt(a2);
  CJet2 w = to_complex(Jet2::variable(1, cs.y3)) + to_complex(a) * cplx(0, 1);
  cplx w0 = w.value();
  MLDerivs e = ml_derivatives(cs.rho, cs.c * w0);
  std::array<cplx, 4> ed;
  double cp = 1.0;
  for (int n = 0; n <= 3; ++n) {
    ed[n] = e[n] * cp;
    cp *= cs.c;
  }
  CJet2 ew = w.compose(ed);
  CJet2 q = ew * inverse(w - cplx(cs.x3));
  return imag_part(q) * inverse(a);
}

inline double cone_rate(const ConeSetup& cs, double u, double kmax) {
  double a = std::sqrt(u * u + cs.s);
  cplx w(cs.y3, a);
  cplx zr = std::pow(cs.c * w, cs.rho);
  double rate = kmax + 1.0 / (u + std::sqrt(cs.s) + 0.05);
  if (zr.real() > -40.0) rate += cs.rho * std::pow(cs.c, cs.rho) * std::pow(std::abs(w), cs.rho - 1.0);
  return rate;
}

/// Accumulates int_0^U cos(k_l u) F(u) e^{-eta u} du for every k_l.
inline void cone_panels(const ConeSetup& cs, double upper, double eta, const PhiOptions& opt,
                        std::vector<Jet2>& acc) {
  double kmax = 0.0;
  for (double k : cs.ks) kmax = std::max(kmax, k);
  double scale = std::sqrt(cs.s + (cs.y3 - cs.x3) * (cs.y3 - cs.x3));
  const GaussRule& g = gauss_legendre(opt.u_nodes);
  double a = 0.0;
  while (a < upper) {
    double width = opt.u_panel_phase / cone_rate(cs, a, kmax);
    width = std::min(width, std::max(0.5 * (a + 0.25 * scale), 0.25 * scale));
    width = std::min(width, upper - a);
    double half = 0.5 * width, mid = a + half;
    for (int i = 0; i < opt.u_nodes; ++i) {
      double u = mid + half * g.x[i];
      Jet2 f = cone_integrand(cs, u);
      double w = g.w[i] * half * (eta > 0 ? std::exp(-eta * u) : 1.0);
      for (std::size_t l = 0; l < cs.ks.size(); ++l) acc[l].axpy(w * std::cos(cs.ks[l] * u), f);
    }
    a += width;
  }
}

}  // namespace detail

/// Cone-branch Carleman scalars Phi(y, x, k_l) for every k in ks, sharing the
/// Mittag-Leffler evaluations across wave numbers.
inline std::vector<CarlemanScalar> phi_cone_all(const Vec3& y, const Vec3& x, std::span<const double> ks, double tau,
                                                double rho_e, const PhiOptions& opt = {}) {
  detail::require_distinct(y, x, "phi_cone");
  if (!(rho_e >= 1.0)) throw Error("phi_cone: rho_e must be >= 1");
  if (!(tau > 0.0)) throw Error("phi_cone: tau must be positive");
  if (!(x[2] > 0.0)) throw GeometryError("phi_cone: x must lie inside the cone (x3 > 0)");
  using detail::Jet2;
  detail::ConeSetup cs;
  cs.s = (y[0] - x[0]) * (y[0] - x[0]) + (y[1] - x[1]) * (y[1] - x[1]);
  cs.y3 = y[2];
  cs.x3 = x[2];
  cs.c = std::pow(tau, 1.0 / rho_e);
  cs.rho = rho_e;
  cs.ks = ks;
  double ex = mittag_leffler(rho_e, cs.c * x[2]).real();
  const double pre = 1.0 / (c3_constant * opt.c3_scale * ex);

  std::vector<Jet2> total(ks.size());
  std::vector<double> err(ks.size(), 0.0);
  if (rho_e == 1.0) {
    // non-decaying integrand: Abel damping and Richardson extrapolation
    int m = opt.abel_levels;
    std::vector<std::vector<Jet2>> table(m + 1);
    std::vector<double> eta(m + 1);
    for (int i = 0; i <= m; ++i) {
      eta[i] = opt.abel_eta / std::pow(2.0, i);
      table[i].assign(ks.size(), Jet2());
      detail::cone_panels(cs, 40.0 / eta[i], eta[i], opt, table[i]);
    }
    std::vector<Jet2> prev = table[m];
    for (int j = 1; j <= m; ++j) {
      prev = table[m];
      for (int i = m; i >= j; --i)
        for (std::size_t l = 0; l < ks.size(); ++l)
          table[i][l] = (table[i][l] * eta[i - j] - table[i - 1][l] * eta[i]) * (1.0 / (eta[i - j] - eta[i]));
    }
    total = table[m];
    for (std::size_t l = 0; l < ks.size(); ++l) err[l] = std::abs(total[l].value() - prev[l].value());
  } else {
    double upper = std::max(opt.u_truncation, 20.0 * (std::abs(y[2]) + std::sqrt(cs.s) + 1.0));
    detail::cone_panels(cs, upper, 0.0, opt, total);
    // integration-by-parts tail: int_U^inf cos(ku) F du ~ -sin(kU) F(U)/k - cos(kU) F'(U)/k^2
    double du = 1e-3 * upper;
    Jet2 f0 = detail::cone_integrand(cs, upper);
    Jet2 f1 = detail::cone_integrand(cs, upper + du);
    Jet2 fp = (f1 - f0) * (1.0 / du);
    for (std::size_t l = 0; l < ks.size(); ++l) {
      double k = ks[l];
      Jet2 tail = f0 * (-std::sin(k * upper) / k) + fp * (-std::cos(k * upper) / (k * k));
      total[l] += tail;
      err[l] = std::abs(fp.value()) / (k * k) + std::abs(f0.value()) / (k * upper);
    }
  }
  Vec3 d = y - x;
  auto D = detail::offset_jets(d);
  std::array<Jet3, 2> sy{D[0] * D[0] + D[1] * D[1], D[2] + y[2]};
  std::vector<CarlemanScalar> out(ks.size());
  for (std::size_t l = 0; l < ks.size(); ++l) {
    out[l].jet = substitute(total[l], sy) * pre;
    out[l].l = static_cast<int>(l);
    out[l].k = ks[l];
    out[l].tau = tau;
    out[l].kind = KernelKind::carleman_cone;
    out[l].quad_error = err[l] * std::abs(pre);
  }
  return out;
}

inline CarlemanScalar phi_cone(const Vec3& y, const Vec3& x, double k, double tau, double rho_e,
                               const PhiOptions& opt = {}) {
  std::array<double, 1> ks{k};
  return phi_cone_all(y, x, ks, tau, rho_e, opt)[0];
}

// --------------------------------------------------------------- assembly

/// Which scalar kernel feeds the block algebra.
struct KernelSpec {
  KernelKind kind = KernelKind::fundamental;
  double tau = 0.0;
  double rho_e = 2.0;
  PhiOptions phi{};

  static KernelSpec fundamental() { return {}; }
  static KernelSpec cap(double tau, PhiOptions o = {}) { return {KernelKind::carleman_cap, tau, 1.0, o}; }
  static KernelSpec cone(double tau, double rho_e, PhiOptions o = {}) {
    return {KernelKind::carleman_cone, tau, rho_e, o};
  }
};

/// Medium plus the derived quantities every kernel needs.
struct Medium {
  MaterialParams params;
  WaveNumbers wn;
  KernelCoeffs kc;

  static Medium from(const MaterialParams& p) {
    Medium m;
    m.params = p;
    m.wn = wave_numbers(p);
    m.kc = kernel_coeffs(p, m.wn);
    return m;
  }
};

/// The four scalars Phi(y, x, k_l) (or the Yukawa kernels) as y-jets.
inline std::array<CarlemanScalar, 4> scalar_kernels(const Vec3& y, const Vec3& x, const Medium& m,
                                                    const KernelSpec& spec) {
  detail::require_distinct(y, x, "kernel");
  std::array<CarlemanScalar, 4> out;
  Vec3 d = y - x;
  if (spec.kind == KernelKind::carleman_cone) {
    auto v = phi_cone_all(y, x, m.wn.k, spec.tau, spec.rho_e, spec.phi);
    for (int l = 0; l < 4; ++l) out[l] = v[l];
    return out;
  }
  auto rj = detail::radial(d);
  for (int l = 0; l < 4; ++l) {
    double k = m.wn.k[l];
    out[l].l = l;
    out[l].k = k;
    out[l].kind = spec.kind;
    out[l].tau = spec.tau;
    out[l].jet = spec.kind == KernelKind::fundamental ? detail::yukawa_from(rj, k)
                                                      : detail::cap_phi_jet(d, rj, k, spec.tau, spec.phi);
  }
  return out;
}

/// A 6x6 kernel together with its first y-derivatives.
struct KernelField {
  Mat6 K{};
  std::array<Mat6, 3> dK{};
  double quad_error = 0.0;
};

inline KernelField kernel_field(const std::array<CarlemanScalar, 4>& phi, const Medium& m) {
  const auto& kc = m.kc;
  const double two_pi = 2.0 * std::numbers::pi;
  const double coupling = 2.0 * m.params.alpha_c / (m.params.mu_c + m.params.alpha_c);
  Jet3 au, bu, cc, aw, bw;
  double qerr = 0.0;
  for (int l = 0; l < 4; ++l) {
    const Jet3& j = phi[l].jet;
    au.axpy(two_pi * kc.alpha_l[l], j);
    bu.axpy(two_pi * kc.beta_l[l], j);
    cc.axpy(two_pi * coupling * kc.eps_l[l], j);
    aw.axpy(two_pi * kc.gamma_l[l], j);
    bw.axpy(two_pi * kc.delta_l[l], j);
    qerr += phi[l].quad_error;
  }
  Derivs3 Au = Derivs3::from(au), Bu = Derivs3::from(bu), Cc = Derivs3::from(cc), Aw = Derivs3::from(aw),
          Bw = Derivs3::from(bw);
  KernelField f;
  f.quad_error = qerr;
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      double dkj = k == j ? 1.0 : 0.0;
      double c = 0.0;
      for (int p = 0; p < 3; ++p) c += levi_civita(k, j, p) * Cc.g[p];
      f.K[k][j] = Au.v * dkj - Bu.h[k][j];
      f.K[k][j + 3] = f.K[k + 3][j] = c;
      f.K[k + 3][j + 3] = -(Aw.v * dkj - Bw.h[k][j]);
      for (int i = 0; i < 3; ++i) {
        double dc = 0.0;
        for (int p = 0; p < 3; ++p) dc += levi_civita(k, j, p) * Cc.h[i][p];
        f.dK[i][k][j] = Au.g[i] * dkj - Bu.t[i][k][j];
        f.dK[i][k][j + 3] = f.dK[i][k + 3][j] = dc;
        f.dK[i][k + 3][j + 3] = -(Aw.g[i] * dkj - Bw.t[i][k][j]);
      }
    }
  return f;
}

/// T(d_y, n) applied to a 6-vector field given its value V and gradient
/// dV[i] = d V / d y_i.
inline Vec6 stress_vector(const Vec6& V, const std::array<Vec6, 3>& dV, const Vec3& n, const MaterialParams& p) {
  Vec6 out{};
  double div_u = dV[0][0] + dV[1][1] + dV[2][2];
  double div_w = dV[0][3] + dV[1][4] + dV[2][5];
  for (int k = 0; k < 3; ++k) {
    double tu = p.lambda_c * n[k] * div_u, tw = p.epsilon_c * n[k] * div_w;
    for (int m = 0; m < 3; ++m) {
      tu += (p.mu_c - p.alpha_c) * n[m] * dV[k][m] + (p.mu_c + p.alpha_c) * n[m] * dV[m][k];
      tw += (p.nu_c - p.beta_c) * n[m] * dV[k][m + 3] + (p.nu_c + p.beta_c) * n[m] * dV[m][k + 3];
    }
    // 2 alpha (n x w)
    int a = (k + 1) % 3, b = (k + 2) % 3;
    tu += 2.0 * p.alpha_c * (n[a] * V[b + 3] - n[b] * V[a + 3]);
    out[k] = tu;
    out[k + 3] = -tw;
  }
  return out;
}

inline void check_normal(const Vec3& n) {
  if (std::abs(norm(n) - 1.0) > 1e-10) throw GeometryError("stress operator: normal is not a unit vector");
}

/// T(d_y, n) applied columnwise.
inline Mat6 stress_apply(const KernelField& f, const Vec3& n, const MaterialParams& p) {
  check_normal(n);
  Mat6 out{};
  for (int j = 0; j < 6; ++j) {
    Vec6 V;
    std::array<Vec6, 3> dV;
    for (int r = 0; r < 6; ++r) {
      V[r] = f.K[r][j];
      for (int i = 0; i < 3; ++i) dV[i][r] = f.dK[i][r][j];
    }
    Vec6 t = stress_vector(V, dV, n, p);
    for (int r = 0; r < 6; ++r) out[r][j] = t[r];
  }
  return out;
}

struct KernelMatrix {
  Mat6 m{};
  Vec3 y{}, x{};
  KernelKind kind = KernelKind::fundamental;
  bool stress_applied = false;

  double block(int bi, int bj, int k, int j) const { return m[3 * bi + k][3 * bj + j]; }
};

inline KernelMatrix psi_matrix(const Vec3& y, const Vec3& x, const Medium& m) {
  auto f = kernel_field(scalar_kernels(y, x, m, KernelSpec::fundamental()), m);
  return {f.K, y, x, KernelKind::fundamental, false};
}

inline KernelMatrix pi_matrix(const Vec3& y, const Vec3& x, const Medium& m, const KernelSpec& spec) {
  auto f = kernel_field(scalar_kernels(y, x, m, spec), m);
  return {f.K, y, x, spec.kind, false};
}

inline KernelMatrix pi_stress(const Vec3& y, const Vec3& x, const Vec3& n, const Medium& m, const KernelSpec& spec) {
  auto f = kernel_field(scalar_kernels(y, x, m, spec), m);
  return {stress_apply(f, n, m.params), y, x, spec.kind, true};
}

/// Kernel and its stress in one evaluation (the reconstruction hot path).
struct KernelPair {
  Mat6 K{};
  Mat6 TK{};
  double quad_error = 0.0;
};

inline KernelPair kernel_pair(const Vec3& y, const Vec3& x, const Vec3& n, const Medium& m, const KernelSpec& spec) {
  auto f = kernel_field(scalar_kernels(y, x, m, spec), m);
  return {f.K, stress_apply(f, n, m.params), f.quad_error};
}

// ------------------------------------------------------ finite differences

using Field6 = std::function<Vec6(const Vec3&)>;

/// M(d_y) U by fourth-order central differences with step h. The system is
/// M = [[(mu+a)(Lap - s1^2) + (lam+mu-a) grad div, 2a curl],
///      [2a curl, -((nu+b)(Lap - s2^2) + (eps+nu-b) grad div)]].
inline Vec6 apply_system_fd(const Field6& U, const Vec3& y, const Medium& m, double h = 1e-3) {
  const auto& p = m.params;
  auto at = [&](int i, double di, int j, double dj) {
    Vec3 z = y;
    z[i] += di;
    z[j] += dj;
    return U(z);
  };
  static constexpr double c1[4] = {1.0 / 12, -2.0 / 3, 2.0 / 3, -1.0 / 12};
  static constexpr double o1[4] = {-2, -1, 1, 2};
  std::array<Vec6, 3> d1{};
  std::array<std::array<Vec6, 3>, 3> d2{};
  Vec6 u0 = U(y);
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 4; ++a) {
      Vec6 v = at(i, o1[a] * h, i, 0.0);
      for (int r = 0; r < 6; ++r) d1[i][r] += c1[a] * v[r] / h;
    }
    // second derivative: (-f(2) + 16 f(1) - 30 f(0) + 16 f(-1) - f(-2)) / 12h^2
    static constexpr double c2[5] = {-1.0 / 12, 4.0 / 3, -5.0 / 2, 4.0 / 3, -1.0 / 12};
    for (int a = 0; a < 5; ++a) {
      Vec6 v = a == 2 ? u0 : at(i, (a - 2) * h, i, 0.0);
      for (int r = 0; r < 6; ++r) d2[i][i][r] += c2[a] * v[r] / (h * h);
    }
    for (int j = i + 1; j < 3; ++j) {
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          Vec6 v = at(i, o1[a] * h, j, o1[b] * h);
          for (int r = 0; r < 6; ++r) d2[i][j][r] += c1[a] * c1[b] * v[r] / (h * h);
        }
      d2[j][i] = d2[i][j];
    }
  }
  Vec6 out{};
  for (int k = 0; k < 3; ++k) {
    double lap_u = 0, lap_w = 0, gd_u = 0, gd_w = 0;
    for (int i = 0; i < 3; ++i) {
      lap_u += d2[i][i][k];
      lap_w += d2[i][i][k + 3];
      gd_u += d2[k][i][i];
      gd_w += d2[k][i][i + 3];
    }
    int a = (k + 1) % 3, b = (k + 2) % 3;
    double curl_w = d1[a][b + 3] - d1[b][a + 3];
    double curl_u = d1[a][b] - d1[b][a];
    out[k] = (p.mu_c + p.alpha_c) * (lap_u - m.wn.sigma1_sq * u0[k]) + (p.lambda_c + p.mu_c - p.alpha_c) * gd_u +
             2.0 * p.alpha_c * curl_w;
    out[k + 3] = 2.0 * p.alpha_c * curl_u -
                 ((p.nu_c + p.beta_c) * (lap_w - m.wn.sigma2_sq * u0[k + 3]) +
                  (p.epsilon_c + p.nu_c - p.beta_c) * gd_w);
  }
  return out;
}

}  // namespace carleman
