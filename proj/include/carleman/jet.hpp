#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <type_traits>

namespace carleman {

namespace detail {

constexpr std::size_t binomial(std::size_t n, std::size_t k) {
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Graded enumeration of monomials in NV variables up to total degree ORD,
/// together with the product table used by jet multiplication.
template <std::size_t NV, std::size_t ORD>
struct MonomialTable {
  static constexpr std::size_t size = binomial(NV + ORD, NV);

  std::array<std::array<int, NV>, size> exps{};
  std::array<int, size> degree{};
  std::array<std::array<int, size>, size> product{};
  std::array<double, size> factorial_weight{};

  constexpr MonomialTable() {
    std::size_t n = 0;
    for (std::size_t d = 0; d <= ORD; ++d) {
      std::array<int, NV> e{};
      // odometer over [0, d]^NV keeping tuples whose sum is d
      while (true) {
        int sum = 0;
        for (std::size_t v = 0; v < NV; ++v) sum += e[v];
        if (sum == static_cast<int>(d)) {
          exps[n] = e;
          degree[n] = static_cast<int>(d);
          ++n;
        }
        std::size_t v = 0;
        while (v < NV && e[v] == static_cast<int>(d)) {
          e[v] = 0;
          ++v;
        }
        if (v == NV) break;
        ++e[v];
      }
    }
    for (std::size_t i = 0; i < size; ++i) {
      double w = 1.0;
      for (std::size_t v = 0; v < NV; ++v)
        for (int f = 2; f <= exps[i][v]; ++f) w *= f;
      factorial_weight[i] = w;
      for (std::size_t j = 0; j < size; ++j) {
        std::array<int, NV> e{};
        for (std::size_t v = 0; v < NV; ++v) e[v] = exps[i][v] + exps[j][v];
        product[i][j] = index_of(e);
      }
    }
  }

  constexpr int index_of(const std::array<int, NV>& e) const {
    int sum = 0;
    for (std::size_t v = 0; v < NV; ++v) sum += e[v];
    if (sum > static_cast<int>(ORD)) return -1;
    for (std::size_t i = 0; i < size; ++i) {
      bool same = true;
      for (std::size_t v = 0; v < NV; ++v) same = same && exps[i][v] == e[v];
      if (same) return static_cast<int>(i);
    }
    return -1;
  }
};

template <std::size_t NV, std::size_t ORD>
inline constexpr MonomialTable<NV, ORD> monomials{};

}  // namespace detail

/// Truncated multivariate Taylor polynomial: c[i] is the coefficient of the
/// i-th monomial, so a partial derivative is c[i] times the multi-factorial.
template <class T, std::size_t NV, std::size_t ORD>
struct Jet {
  static constexpr std::size_t size = detail::MonomialTable<NV, ORD>::size;
  static constexpr const auto& table = detail::monomials<NV, ORD>;

  std::array<T, size> c{};

  Jet() = default;
  explicit Jet(T value) { c[0] = value; }

  static Jet variable(std::size_t v, T value) {
    Jet j(value);
    std::array<int, NV> e{};
    e[v] = 1;
    j.c[table.index_of(e)] = T(1);
    return j;
  }

  T value() const { return c[0]; }

  /// Partial derivative for multi-index e (e[v] = order in variable v).
  T derivative(const std::array<int, NV>& e) const {
    int i = table.index_of(e);
    return i < 0 ? T(0) : c[i] * T(table.factorial_weight[i]);
  }

  Jet& operator+=(const Jet& o) {
    for (std::size_t i = 0; i < size; ++i) c[i] += o.c[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t i = 0; i < size; ++i) c[i] -= o.c[i];
    return *this;
  }
  Jet& operator*=(T s) {
    for (auto& v : c) v *= s;
    return *this;
  }
  Jet& operator+=(T s) {
    c[0] += s;
    return *this;
  }
  Jet& operator-=(T s) {
    c[0] -= s;
    return *this;
  }

  /// this += s * o, the hot accumulation in kernel sums.
  void axpy(T s, const Jet& o) {
    for (std::size_t i = 0; i < size; ++i) c[i] += s * o.c[i];
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (auto& v : a.c) v = -v;
    return a;
  }
  friend Jet operator*(Jet a, T s) { return a *= s; }
  friend Jet operator*(T s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, T s) { return a += s; }
  friend Jet operator-(Jet a, T s) { return a -= s; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (std::size_t i = 0; i < size; ++i) {
      if (a.c[i] == T(0)) continue;
      for (std::size_t j = 0; j < size; ++j) {
        int k = table.product[i][j];
        if (k >= 0) r.c[k] += a.c[i] * b.c[j];
      }
    }
    return r;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }

  /// f(g) where derivs[n] = f^{(n)}(g.value()).
  template <class D>
  Jet compose(const std::array<D, ORD + 1>& derivs) const {
    Jet delta = *this;
    delta.c[0] = T(0);
    double fact = 1.0;
    for (std::size_t n = 1; n <= ORD; ++n) fact *= double(n);
    Jet r(T(derivs[ORD] / fact));
    for (std::size_t n = ORD; n-- > 0;) {
      fact /= double(n + 1);
      r = r * delta;
      r.c[0] += T(derivs[n] / fact);
    }
    return r;
  }
};

template <class T, std::size_t NV, std::size_t ORD>
Jet<T, NV, ORD> exp(const Jet<T, NV, ORD>& g) {
  std::array<T, ORD + 1> d;
  d.fill(std::exp(g.value()));
  return g.compose(d);
}

template <class T, std::size_t NV, std::size_t ORD>
Jet<T, NV, ORD> inverse(const Jet<T, NV, ORD>& g) {
  std::array<T, ORD + 1> d;
  T inv = T(1) / g.value();
  T p = inv;
  double sign = 1.0, fact = 1.0;
  for (std::size_t n = 0; n <= ORD; ++n) {
    d[n] = T(sign * fact) * p;
    p *= inv;
    sign = -sign;
    fact *= double(n + 1);
  }
  return g.compose(d);
}

/// Generic power g^a for real exponent a (principal branch for complex g).
template <class T, std::size_t NV, std::size_t ORD>
Jet<T, NV, ORD> pow(const Jet<T, NV, ORD>& g, double a) {
  std::array<T, ORD + 1> d;
  T g0 = g.value();
  double coef = 1.0;
  for (std::size_t n = 0; n <= ORD; ++n) {
    d[n] = T(coef) * std::pow(g0, a - double(n));
    coef *= (a - double(n));
  }
  return g.compose(d);
}

template <class T, std::size_t NV, std::size_t ORD>
Jet<T, NV, ORD> sqrt(const Jet<T, NV, ORD>& g) {
  return pow(g, 0.5);
}

template <std::size_t NV, std::size_t ORD>
Jet<std::complex<double>, NV, ORD> to_complex(const Jet<double, NV, ORD>& g) {
  Jet<std::complex<double>, NV, ORD> r;
  for (std::size_t i = 0; i < g.size; ++i) r.c[i] = g.c[i];
  return r;
}

template <std::size_t NV, std::size_t ORD>
Jet<double, NV, ORD> imag_part(const Jet<std::complex<double>, NV, ORD>& g) {
  Jet<double, NV, ORD> r;
  for (std::size_t i = 0; i < g.size; ++i) r.c[i] = g.c[i].imag();
  return r;
}

/// Substitute jets (x_1..x_NI) into the Taylor polynomial p around their base
/// values: returns p(x - x0) as a jet in the outer variables.
template <class T, std::size_t NI, std::size_t NO, std::size_t ORD>
Jet<T, NO, ORD> substitute(const Jet<T, NI, ORD>& p, const std::array<Jet<T, NO, ORD>, NI>& x) {
  using Outer = Jet<T, NO, ORD>;
  std::array<std::array<Outer, ORD + 1>, NI> powers;
  for (std::size_t v = 0; v < NI; ++v) {
    Outer delta = x[v];
    delta.c[0] = T(0);
    powers[v][0] = Outer(T(1));
    for (std::size_t n = 1; n <= ORD; ++n) powers[v][n] = powers[v][n - 1] * delta;
  }
  Outer r;
  const auto& tab = Jet<T, NI, ORD>::table;
  for (std::size_t i = 0; i < p.size; ++i) {
    if (p.c[i] == T(0)) continue;
    Outer term(p.c[i]);
    for (std::size_t v = 0; v < NI; ++v)
      if (tab.exps[i][v] > 0) term = term * powers[v][tab.exps[i][v]];
    r += term;
  }
  return r;
}

using Jet3 = Jet<double, 3, 3>;

/// Dense derivative tensors of a scalar field up to third order.
struct Derivs3 {
  double v = 0.0;
  std::array<double, 3> g{};
  std::array<std::array<double, 3>, 3> h{};
  std::array<std::array<std::array<double, 3>, 3>, 3> t{};

  static Derivs3 from(const Jet3& j) {
    Derivs3 d;
    d.v = j.value();
    for (int a = 0; a < 3; ++a) {
      std::array<int, 3> e{};
      e[a] = 1;
      d.g[a] = j.derivative(e);
      for (int b = 0; b < 3; ++b) {
        std::array<int, 3> e2 = e;
        ++e2[b];
        d.h[a][b] = j.derivative(e2);
        for (int c = 0; c < 3; ++c) {
          std::array<int, 3> e3 = e2;
          ++e3[c];
          d.t[a][b][c] = j.derivative(e3);
        }
      }
    }
    return d;
  }
};

}  // namespace carleman
