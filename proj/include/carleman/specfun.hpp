#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "jet.hpp"

namespace carleman {

using cplx = std::complex<double>;

// ---------------------------------------------------------------- quadrature

struct GaussRule {
  std::vector<double> x;  ///< nodes on [-1, 1]
  std::vector<double> w;
};

inline GaussRule make_gauss_legendre(int n) {
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= n; ++j) {
      double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = n * (z * p0 - p1) / (z * z - 1.0);
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return r;
}

inline constexpr int max_gauss_nodes = 128;

/// Cached Gauss-Legendre rule with n points (1 <= n <= 128).
inline const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> rules = [] {
    std::vector<GaussRule> v(max_gauss_nodes + 1);
    for (int k = 1; k <= max_gauss_nodes; ++k) v[k] = make_gauss_legendre(k);
    return v;
  }();
  if (n < 1 || n > max_gauss_nodes) throw QuadratureError("Gauss-Legendre order out of range: " + std::to_string(n));
  return rules[n];
}

template <class F>
double gauss_integrate(F&& f, double a, double b, int n) {
  const GaussRule& g = gauss_legendre(n);
  double half = 0.5 * (b - a), mid = 0.5 * (a + b), sum = 0.0;
  for (int i = 0; i < n; ++i) sum += g.w[i] * f(mid + half * g.x[i]);
  return sum * half;
}

enum class QuadRule { gauss_legendre };

struct QuadSpec {
  QuadRule rule = QuadRule::gauss_legendre;
  int nodes = 20;             ///< per panel, at least 16
  double panel_width = 1.0;
  double truncation = 60.0;   ///< plain mode: integrate over [0, truncation]
  double abel_eta = 0.0;      ///< > 0 switches on damping e^{-eta u}
  int extrapolation_order = 4;
  double tolerance = 1e-6;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;       ///< total uncertainty estimate
  double tail = 0.0;        ///< truncation part of the estimate
};

namespace detail {

template <class F>
QuadResult panel_sum(F& f, double length, const QuadSpec& spec) {
  const int n = spec.nodes;
  const int n_low = n - std::max(4, n / 4);
  int panels = std::max(1, static_cast<int>(std::ceil(length / spec.panel_width)));
  double w = length / panels;
  double hi = 0.0, lo = 0.0, mag = 0.0, last = 0.0;
  for (int p = 0; p < panels; ++p) {
    double a = p * w, b = a + w;
    double absum = 0.0;
    double ph = gauss_integrate(
        [&](double u) {
          double v = f(u);
          absum += std::abs(v);
          return v;
        },
        a, b, n);
    double pl = gauss_integrate(f, a, b, n_low);
    hi += ph;
    lo += pl;
    mag += absum * w / n;
    last = ph;
  }
  QuadResult r;
  r.value = hi;
  r.tail = std::abs(last) + std::abs(f(length)) * w;
  r.error = std::abs(hi - lo) + r.tail + 64.0 * std::numeric_limits<double>::epsilon() * mag;
  return r;
}

}  // namespace detail

/// Composite Gauss-Legendre quadrature of f over [0, inf). With abel_eta > 0
/// the integrand is damped by e^{-eta u} for a halving sequence of eta and the
/// results are extrapolated to eta = 0 by Neville's scheme.
template <class F>
QuadResult semiinf_quad(F&& f, const QuadSpec& spec) {
  if (spec.nodes < 16) throw QuadratureError("QuadSpec: at least 16 nodes per panel required");
  if (spec.abel_eta <= 0.0) {
    QuadResult r = detail::panel_sum(f, spec.truncation, spec);
    if (r.tail > spec.tolerance) {
      std::ostringstream os;
      os << "semi-infinite quadrature: tail estimate " << r.tail << " exceeds tolerance " << spec.tolerance
         << " at truncation " << spec.truncation;
      throw QuadratureError(os.str());
    }
    return r;
  }
  const int m = std::max(1, spec.extrapolation_order);
  std::vector<double> eta(m + 1), table(m + 1);
  double discretization = 0.0;
  for (int i = 0; i <= m; ++i) {
    eta[i] = spec.abel_eta / std::pow(2.0, i);
    double e = eta[i];
    auto damped = [&](double u) { return f(u) * std::exp(-e * u); };
    double length = 40.0 / e;
    QuadResult r = detail::panel_sum(damped, length, spec);
    table[i] = r.value;
    discretization = std::max(discretization, r.error);
  }
  // Neville: table[i] ends as the value of the polynomial through points i-j..i
  double previous = table[m];
  for (int j = 1; j <= m; ++j) {
    previous = table[m];
    for (int i = m; i >= j; --i)
      table[i] = (eta[i - j] * table[i] - eta[i] * table[i - 1]) / (eta[i - j] - eta[i]);
  }
  QuadResult r;
  r.value = table[m];
  r.tail = std::abs(table[m] - previous);
  r.error = r.tail + discretization;
  if (r.error > spec.tolerance) {
    std::ostringstream os;
    os << "Abel-extrapolated quadrature: uncertainty " << r.error << " exceeds tolerance " << spec.tolerance;
    throw QuadratureError(os.str());
  }
  return r;
}

// ------------------------------------------------------------------- Bessel

namespace detail {

inline void bessel_series(double x, int nmax, double* out) {
  double h = 0.5 * x, q = -h * h;
  double lead = 1.0;  // (x/2)^n / n!
  for (int n = 0; n <= nmax; ++n) {
    double term = lead, sum = term;
    for (int k = 1; k < 60; ++k) {
      term *= q / (k * double(n + k));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    out[n] = sum;
    lead *= h / (n + 1);
  }
}

inline void bessel_miller(double x, int nmax, double* out) {
  int top = std::max(nmax, static_cast<int>(x));
  int m = 2 * ((top + 20 + static_cast<int>(std::sqrt(40.0 * (top + 1)))) / 2);
  std::vector<double> j(m + 2, 0.0);
  j[m + 1] = 0.0;
  j[m] = 1e-30;
  double norm = 0.0;
  for (int k = m; k >= 1; --k) {
    j[k - 1] = 2.0 * k / x * j[k] - j[k + 1];
    if (std::abs(j[k - 1]) > 1e250) {
      for (int i = k - 1; i <= m; ++i) j[i] *= 1e-250;
      norm *= 1e-250;
    }
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * j[k - 1];
  }
  norm += j[0];
  for (int n = 0; n <= nmax; ++n) out[n] = j[n] / norm;
}

inline double hankel_j(int nu, double x) {
  double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0, term = 1.0, prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
    if (std::abs(term) > std::abs(prev) || std::abs(term) < 1e-18) break;
    prev = term;
    int sign = ((k / 2) % 2 == 0) ? 1 : -1;
    if (k % 2 == 0)
      p += sign * term;
    else
      q += sign * term;
  }
  double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

/// J_0(x) ... J_nmax(x) written to out[0..nmax].
inline void bessel_jn(double x, int nmax, double* out) {
  double ax = std::abs(x);
  if (ax < 2.0)
    detail::bessel_series(ax, nmax, out);
  else if (ax <= 25.0)
    detail::bessel_miller(ax, nmax, out);
  else {
    out[0] = detail::hankel_j(0, ax);
    if (nmax >= 1) out[1] = detail::hankel_j(1, ax);
    for (int n = 1; n < nmax; ++n) out[n + 1] = 2.0 * n / ax * out[n] - out[n - 1];
  }
  if (x < 0)
    for (int n = 1; n <= nmax; n += 2) out[n] = -out[n];
}

inline double bessel_j0(double x) {
  double j[2];
  bessel_jn(x, 1, j);
  return j[0];
}

inline double bessel_j1(double x) {
  double j[2];
  bessel_jn(x, 1, j);
  return j[1];
}

/// A_m(z) = J_m(sqrt z) / sqrt(z)^m for z >= 0, m = 0..mmax; entire in z.
inline void bessel_scaled(double z, int mmax, double* out) {
  if (z < 4.0) {
    double q = -0.25 * z, lead = 1.0;  // 1 / (2^m m!)
    for (int m = 0; m <= mmax; ++m) {
      double term = lead, sum = term;
      for (int k = 1; k < 60; ++k) {
        term *= q / (k * double(m + k));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      }
      out[m] = sum;
      lead /= 2.0 * (m + 1);
    }
    return;
  }
  double x = std::sqrt(z);
  bessel_jn(x, mmax, out);
  double p = 1.0;
  for (int m = 1; m <= mmax; ++m) {
    p *= x;
    out[m] /= p;
  }
}

// ------------------------------------------------------------ Mittag-Leffler

enum class MLRegime { series, contour, asymptotic };

inline const char* to_string(MLRegime r) {
  switch (r) {
    case MLRegime::series: return "series";
    case MLRegime::contour: return "contour";
    case MLRegime::asymptotic: return "asymptotic";
  }
  return "?";
}

/// E and its first three z-derivatives.
using MLDerivs = std::array<cplx, 4>;

inline constexpr double ml_series_limit = 10.0;      ///< series while |z|^rho <= this
inline constexpr double ml_asymptotic_limit = 40.0;  ///< asymptotic once |z|^rho >= this
inline constexpr double ml_overflow_exponent = 700.0;

inline MLRegime ml_regime(double rho, cplx z) {
  double ar = std::pow(std::abs(z), rho);
  if (ar <= ml_series_limit || rho < 1.0) return MLRegime::series;
  if (ar >= ml_asymptotic_limit) return MLRegime::asymptotic;
  return MLRegime::contour;
}

namespace detail {

inline double recip_gamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

/// rho * exp(z^rho) and its derivatives.
inline MLDerivs ml_exponential_part(double rho, cplx z) {
  using CJ = Jet<cplx, 1, 3>;
  CJ v = CJ::variable(0, z);
  CJ e = exp(pow(v, rho)) * cplx(rho);
  return {e.derivative({0}), e.derivative({1}), e.derivative({2}), e.derivative({3})};
}

inline void ml_guard(double rho, cplx z) {
  cplx zr = std::pow(z, rho);
  if (zr.real() > ml_overflow_exponent) {
    std::ostringstream os;
    os << "Mittag-Leffler overflow: z = " << z << " lies in the growth sector |arg z| < pi/(2 rho) = "
       << std::numbers::pi / (2.0 * rho) << " with Re z^rho = " << zr.real() << " > " << ml_overflow_exponent;
    throw OverflowError(os.str());
  }
}

}  // namespace detail

namespace detail {

/// 1/Gamma(1 + j/rho) for j = 0..n-1, cached per thread for the last order.
inline const std::vector<long double>& ml_coefficients(double rho, std::size_t n) {
  thread_local double cached_rho = -1.0;
  thread_local std::vector<long double> c;
  if (cached_rho != rho || c.size() < n) {
    c.resize(std::max(n, c.size()));
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = std::exp(-std::lgamma(1.0L + static_cast<long double>(j) / rho));
    cached_rho = rho;
  }
  return c;
}

}  // namespace detail

inline MLDerivs ml_series(double rho, cplx zin) {
  using L = long double;
  using LC = std::complex<L>;
  LC z(zin.real(), zin.imag());
  L az = std::abs(z);
  std::array<LC, 4> sum{};
  std::array<LC, 4> zp{LC(1), LC(0), LC(0), LC(0)};  // zp[n] = z^(j-n) once j >= n
  L peak = rho * std::pow(az, static_cast<L>(rho)) + 10;
  const int jmax = 4000;
  const auto& coefs = detail::ml_coefficients(rho, static_cast<std::size_t>(std::min<L>(peak * 3 + 200, jmax + 1)));
  L azp = 1;  // |z|^(j-3) once j >= 3
  for (int j = 0; j <= jmax; ++j) {
    L coef = static_cast<std::size_t>(j) < coefs.size() ? coefs[j] : std::exp(-std::lgamma(1.0L + L(j) / rho));
    L falling = 1;
    for (int n = 0; n <= 3 && n <= j; ++n) {
      sum[n] += falling * coef * zp[n];
      falling *= L(j - n);
    }
    if (j > 3) azp *= az;
    L bound = coef * azp * (L(j) + 1) * (L(j) + 1) * (L(j) + 1);
    if (j > peak && bound < 1e-22L * std::max<L>(1, std::abs(sum[0]))) {
      MLDerivs d;
      for (int n = 0; n <= 3; ++n) d[n] = cplx(double(sum[n].real()), double(sum[n].imag()));
      return d;
    }
    for (int n = 3; n >= 0; --n) {
      if (j + 1 == n)
        zp[n] = LC(1);
      else if (j + 1 > n)
        zp[n] *= z;
    }
  }
  std::ostringstream os;
  os << "Mittag-Leffler series did not converge: rho = " << rho << ", z = " << zin << " (regime series)";
  throw QuadratureError(os.str());
}

inline MLDerivs ml_asymptotic(double rho, cplx z) {
  MLDerivs d{};
  double arg = std::abs(std::arg(z));
  if (rho * arg < std::numbers::pi || rho == 1.0) {
    detail::ml_guard(rho, z);
    d = detail::ml_exponential_part(rho, z);
  }
  cplx inv = 1.0 / z;
  cplx zk = 1.0;  // z^{-k}
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 400; ++k) {
    zk *= inv;
    double c = detail::recip_gamma(1.0 - k / rho);
    if (c == 0.0) continue;
    double mag = std::abs(c) * std::abs(zk);
    if (mag > prev) break;
    prev = mag;
    cplx t = c * zk;
    double falling = 1.0;  // (-k)(-k-1)...(-k-n+1)
    cplx zn = 1.0;
    for (int n = 0; n <= 3; ++n) {
      d[n] -= falling * t * zn;
      falling *= double(-k - n);
      zn *= inv;
    }
    if (mag < 1e-18) break;
  }
  return d;
}

/// Dzhrbashyan's integral representation on the contour made of the rays
/// arg = -+sigma (|zeta| >= eps) and the arc |zeta| = eps.
inline MLDerivs ml_contour(double rho, cplx z) {
  if (rho < 1.0) {
    std::ostringstream os;
    os << "Mittag-Leffler contour regime requires rho >= 1 (rho = " << rho << ", z = " << z << ")";
    throw QuadratureError(os.str());
  }
  const double pi = std::numbers::pi;
  double hi = std::min(pi, pi / rho);
  double az = std::abs(z), argz = std::abs(std::arg(z));
  // steepest ray first; step towards pi/(2 rho) only when z sits close to it
  double sigma = hi, best = -1.0;
  for (double f : {1.0, 0.85, 0.7, 0.6}) {
    double s = f * hi, dist = std::abs(s - argz);
    if (dist >= 0.1 * hi) {
      sigma = s;
      break;
    }
    if (dist > best) {
      best = dist;
      sigma = s;
    }
  }
  double eps = std::min(0.5 * az, 1.0);
  MLDerivs d{};
  bool inside = argz < sigma;
  if (inside) {
    detail::ml_guard(rho, z);
    d = detail::ml_exponential_part(rho, z);
  }
  std::array<cplx, 4> acc{};
  auto add_exp = [&](cplx zeta, cplx ez, cplx dzeta) {
    cplx e = ez * dzeta;
    cplx inv = 1.0 / (zeta - z);
    cplx p = inv;
    double fact = 1.0;
    for (int n = 0; n <= 3; ++n) {
      acc[n] += fact * e * p;
      p *= inv;
      fact *= n + 1;
    }
  };
  // rays: zeta = r e^{+-i sigma}; decay exp(r^rho cos(rho sigma))
  double decay = -std::cos(rho * sigma);
  double rmax = std::pow(46.0 / std::max(decay, 1e-3), 1.0 / rho);
  rmax = std::max(rmax, eps + 1.0);
  double closest = az * std::sin(std::min(std::abs(argz - sigma), pi / 2));
  const GaussRule& g = gauss_legendre(16);
  double cs = std::cos(rho * sigma), sn = std::sin(rho * sigma);
  for (int side = -1; side <= 1; side += 2) {
    cplx dir = std::polar(1.0, side * sigma);
    double a = eps;
    while (a < rmax) {
      // panels shrink where the ray passes close to z
      double gap = std::max(std::abs(a - az) - 0.5 * closest, 0.0);
      double width = std::clamp(0.5 * closest + 0.5 * gap, 0.05, 2.0);
      double phase_rate = rho * std::pow(a + 0.5 * width, rho - 1.0);
      width = std::min({width, 6.0 / phase_rate, rmax - a});
      double half = 0.5 * width, mid = a + half;
      for (int i = 0; i < 16; ++i) {
        double r = mid + half * g.x[i];
        double rr = std::pow(r, rho);
        cplx e = std::exp(rr * cs) * cplx(std::cos(rr * sn), side * std::sin(rr * sn));
        // orientation: the lower ray runs inward, the upper ray outward
        add_exp(r * dir, e, double(side) * dir * (g.w[i] * half));
      }
      a += width;
    }
  }
  // arc from -sigma to +sigma
  int arc_panels = std::max(2, static_cast<int>(std::ceil(2.0 * sigma * eps / 0.5)));
  double dphi = 2.0 * sigma / arc_panels;
  for (int p = 0; p < arc_panels; ++p) {
    double half = 0.5 * dphi, mid = -sigma + (p + 0.5) * dphi;
    for (int i = 0; i < 16; ++i) {
      double phi = mid + half * g.x[i];
      cplx zeta = std::polar(eps, phi);
      add_exp(zeta, std::exp(std::pow(zeta, rho)), cplx(0, 1) * zeta * (g.w[i] * half));
    }
  }
  cplx scale = rho / (2.0 * pi * cplx(0, 1));
  for (int n = 0; n <= 3; ++n) d[n] += scale * acc[n];
  return d;
}

/// E_rho(z) = sum z^j / Gamma(1 + j/rho) with derivatives up to third order,
/// dispatched over the series, contour and asymptotic regimes.
inline MLDerivs ml_derivatives(double rho, cplx z) {
  if (!(rho >= 0.5)) throw QuadratureError("Mittag-Leffler order must be >= 1/2");
  switch (ml_regime(rho, z)) {
    case MLRegime::series: return ml_series(rho, z);
    case MLRegime::asymptotic: return ml_asymptotic(rho, z);
    case MLRegime::contour: return ml_contour(rho, z);
  }
  return {};
}

inline cplx mittag_leffler(double rho, cplx z) { return ml_derivatives(rho, z)[0]; }
inline cplx ml_deriv(double rho, cplx z) { return ml_derivatives(rho, z)[1]; }

/// Classical index convention E_a(z) = sum z^j / Gamma(1 + a j), i.e. E_rho
/// with rho = 1/a.
inline cplx mittag_leffler_classical(double a, cplx z) { return mittag_leffler(1.0 / a, z); }

// ------------------------------------------------------------- point kernels

/// e^{-kr} / (4 pi r): solves (Delta - k^2) phi = -delta in three dimensions.
inline double yukawa_kernel(double k, double r) {
  if (!(r > 0.0)) throw SingularityError("yukawa_kernel: r must be positive");
  if (k < 0.0) throw BranchPointError("yukawa_kernel: k must be non-negative");
  return std::exp(-k * r) / (4.0 * std::numbers::pi * r);
}

/// Closed form of int_0^inf sin(tau sqrt(u^2+s)) / sqrt(u^2+s) cos(ku) du.
inline double weber_disc(double tau, double k, double s) {
  if (tau == k) throw BranchPointError("weber_disc: tau == k is a branch point");
  if (s < 0.0) throw GeometryError("weber_disc: s must be non-negative");
  if (tau < k) return 0.0;
  return 0.5 * std::numbers::pi * bessel_j0(std::sqrt(s * (tau * tau - k * k)));
}

}  // namespace carleman
