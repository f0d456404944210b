#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"

namespace carleman {

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class SurfacePart { S, Sigma };

inline const char* to_string(SurfacePart p) { return p == SurfacePart::S ? "S" : "Sigma"; }

struct SurfaceQuadrature {
  std::vector<Vec3> nodes;
  std::vector<double> weights;
  std::vector<Vec3> normals;
  std::vector<SurfacePart> part;

  std::size_t size() const { return nodes.size(); }

  void add(const Vec3& y, double w, const Vec3& n, SurfacePart p) {
    nodes.push_back(y);
    weights.push_back(w);
    normals.push_back(n);
    part.push_back(p);
  }

  void append(const SurfaceQuadrature& o) {
    for (std::size_t i = 0; i < o.size(); ++i) add(o.nodes[i], o.weights[i], o.normals[i], o.part[i]);
  }

  double area() const {
    double a = 0.0;
    for (double w : weights) a += w;
    return a;
  }
};

struct DomainSpec {
  Branch branch = Branch::cap;
  double radius = 1.0;   ///< cap: hemisphere radius
  double rho_e = 2.0;    ///< cone: Mittag-Leffler order
  double kappa = 1.0;    ///< cone: slope |y'| = kappa y3
  double height = 1.0;   ///< cone: radius of the closing spherical cap
  int resolution = 32;

  /// x3^0 = max over the domain of x3.
  double x3_top() const { return branch == Branch::cap ? radius : height; }
  double half_angle() const { return std::atan(kappa); }

  Vec3 centroid() const {
    if (branch == Branch::cap) return {0.0, 0.0, 3.0 * radius / 8.0};
    return {0.0, 0.0, 3.0 * height * (1.0 + std::cos(half_angle())) / 8.0};
  }

  double diameter() const {
    if (branch == Branch::cap) return 2.0 * radius;
    return std::max(height, 2.0 * height * std::sin(half_angle()));
  }

  /// Distance from an interior point to the boundary (negative outside).
  double boundary_distance(const Vec3& x) const {
    double r = norm(x), rp = std::hypot(x[0], x[1]);
    if (branch == Branch::cap) return std::min(radius - r, x[2]);
    return std::min(height - r, std::cos(half_angle()) * (kappa * x[2] - rp));
  }

  bool contains(const Vec3& x) const { return boundary_distance(x) > 0.0; }
};

/// Accessible part S and inaccessible part Sigma of the boundary.
struct DomainQuadrature {
  DomainSpec domain;
  SurfaceQuadrature S;
  SurfaceQuadrature Sigma;

  SurfaceQuadrature full() const {
    SurfaceQuadrature q = S;
    q.append(Sigma);
    return q;
  }
};

namespace detail {

inline void check_resolution(int n) {
  if (n < 3 || 2 * n * n < 16)
    throw ConfigError("mesh resolution " + std::to_string(n) + " gives fewer than 16 nodes per surface");
}

/// Spherical zone of radius R, polar angle in [0, theta_max], outward normal.
inline SurfaceQuadrature spherical_zone(double R, double theta_max, int n, SurfacePart part) {
  SurfaceQuadrature q;
  const GaussRule& g = gauss_legendre(n);
  int nphi = 2 * n;
  double dphi = 2.0 * std::numbers::pi / nphi;
  for (int i = 0; i < n; ++i) {
    double th = 0.5 * theta_max * (g.x[i] + 1.0);
    double wth = 0.5 * theta_max * g.w[i];
    for (int j = 0; j < nphi; ++j) {
      double ph = (j + 0.5) * dphi;
      Vec3 nrm{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
      q.add({R * nrm[0], R * nrm[1], R * nrm[2]}, R * R * std::sin(th) * wth * dphi, nrm, part);
    }
  }
  return q;
}

}  // namespace detail

inline DomainQuadrature make_cap(double radius, int resolution) {
  if (!(radius > 0.0)) throw ConfigError("cap radius must be positive");
  detail::check_resolution(resolution);
  DomainQuadrature dq;
  dq.domain.branch = Branch::cap;
  dq.domain.radius = radius;
  dq.domain.resolution = resolution;
  const int n = resolution;
  dq.S = detail::spherical_zone(radius, 0.5 * std::numbers::pi, n, SurfacePart::S);
  const GaussRule& g = gauss_legendre(n);
  int nphi = 2 * n;
  double dphi = 2.0 * std::numbers::pi / nphi;
  for (int i = 0; i < n; ++i) {
    double r = 0.5 * radius * (g.x[i] + 1.0);
    double wr = 0.5 * radius * g.w[i];
    for (int j = 0; j < nphi; ++j) {
      double ph = (j + 0.5) * dphi;
      dq.Sigma.add({r * std::cos(ph), r * std::sin(ph), 0.0}, r * wr * dphi, {0.0, 0.0, -1.0}, SurfacePart::Sigma);
    }
  }
  return dq;
}

inline DomainQuadrature make_cone(double rho_e, double height, int resolution) {
  if (!(rho_e > 1.0)) throw ConfigError("cone order rho_e must exceed 1");
  if (!(height > 0.0)) throw ConfigError("cone height must be positive");
  detail::check_resolution(resolution);
  DomainQuadrature dq;
  dq.domain.branch = Branch::cone;
  dq.domain.rho_e = rho_e;
  dq.domain.kappa = std::tan(std::numbers::pi / (2.0 * rho_e));
  dq.domain.height = height;
  dq.domain.resolution = resolution;
  const int n = resolution;
  const double tc = dq.domain.half_angle();
  dq.S = detail::spherical_zone(height, tc, n, SurfacePart::S);
  const GaussRule& g = gauss_legendre(n);
  int nphi = 2 * n;
  double dphi = 2.0 * std::numbers::pi / nphi;
  double st = std::sin(tc), ct = std::cos(tc);
  for (int i = 0; i < n; ++i) {
    double t = 0.5 * height * (g.x[i] + 1.0);  // slant distance from the apex
    double wt = 0.5 * height * g.w[i];
    for (int j = 0; j < nphi; ++j) {
      double ph = (j + 0.5) * dphi;
      Vec3 y{t * st * std::cos(ph), t * st * std::sin(ph), t * ct};
      Vec3 nrm{ct * std::cos(ph), ct * std::sin(ph), -st};
      dq.Sigma.add(y, t * st * wt * dphi, nrm, SurfacePart::Sigma);
    }
  }
  return dq;
}

/// Triangle mesh in ASCII OFF format as a one-point (centroid) quadrature.
/// Normals follow the vertex ordering of each face.
inline SurfaceQuadrature import_off(std::istream& in, SurfacePart part = SurfacePart::S) {
  std::string tok;
  auto next = [&]() -> std::string {
    while (in >> tok) {
      if (!tok.empty() && tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw GeometryError("OFF: unexpected end of input");
  };
  if (next() != "OFF") throw GeometryError("OFF: missing header");
  long nv = std::stol(next()), nf = std::stol(next());
  next();  // edge count
  if (nv < 3 || nf < 1) throw GeometryError("OFF: empty mesh");
  std::vector<Vec3> v(nv);
  for (auto& p : v)
    for (auto& c : p) c = std::stod(next());
  SurfaceQuadrature q;
  for (long f = 0; f < nf; ++f) {
    if (std::stol(next()) != 3) throw GeometryError("OFF: only triangular faces are supported");
    long a = std::stol(next()), b = std::stol(next()), c = std::stol(next());
    if (a < 0 || b < 0 || c < 0 || a >= nv || b >= nv || c >= nv) throw GeometryError("OFF: vertex index out of range");
    Vec3 e1 = v[b] - v[a], e2 = v[c] - v[a];
    Vec3 cr{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
    double len = norm(cr);
    if (len == 0.0) throw GeometryError("OFF: degenerate face " + std::to_string(f));
    Vec3 centre{(v[a][0] + v[b][0] + v[c][0]) / 3, (v[a][1] + v[b][1] + v[c][1]) / 3, (v[a][2] + v[b][2] + v[c][2]) / 3};
    q.add(centre, 0.5 * len, {cr[0] / len, cr[1] / len, cr[2] / len}, part);
  }
  return q;
}

/// U(x) = sum_j K(x, z_j) c_j with exterior sources z_j.
struct ManufacturedSolution {
  Medium medium;
  std::vector<Vec3> sources;
  std::vector<Vec6> strengths;

  /// Value and gradient of U at x.
  struct Sample {
    Vec6 u{};
    std::array<Vec6, 3> du{};
  };

  Sample sample(const Vec3& x) const {
    Sample s;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      KernelField f = kernel_field(scalar_kernels(x, sources[j], medium, KernelSpec::fundamental()), medium);
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
          s.u[r] += f.K[r][c] * strengths[j][c];
          for (int i = 0; i < 3; ++i) s.du[i][r] += f.dK[i][r][c] * strengths[j][c];
        }
    }
    return s;
  }

  Vec6 value(const Vec3& x) const { return sample(x).u; }

  /// T(d_x, n) U at x.
  Vec6 traction(const Vec3& x, const Vec3& n) const {
    check_normal(n);
    Sample s = sample(x);
    return stress_vector(s.u, s.du, n, medium.params);
  }
};

inline ManufacturedSolution manufacture(const DomainSpec& d, const Medium& medium, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("manufactured solution needs at least one source");
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) { return a + (b - a) * uniform01(rng); };
  ManufacturedSolution m;
  m.medium = medium;
  const double diam = d.diameter();
  for (int j = 0; j < count; ++j) {
    Vec3 z;
    if (d.branch == Branch::cap) {
      double r = 0.8 * d.radius * std::sqrt(uni(0.0, 1.0)), ph = uni(0.0, 2.0 * std::numbers::pi);
      z = {r * std::cos(ph), r * std::sin(ph), -uni(0.2, 0.4) * diam};
    } else {
      double tc = d.half_angle(), t = uni(0.3, 0.8) * d.height, ph = uni(0.0, 2.0 * std::numbers::pi);
      double dist = uni(0.2, 0.35) * diam;
      Vec3 p{t * std::sin(tc) * std::cos(ph), t * std::sin(tc) * std::sin(ph), t * std::cos(tc)};
      Vec3 n{std::cos(tc) * std::cos(ph), std::cos(tc) * std::sin(ph), -std::sin(tc)};
      z = {p[0] + dist * n[0], p[1] + dist * n[1], p[2] + dist * n[2]};
    }
    Vec6 c;
    for (auto& v : c) v = uni(-1.0, 1.0);
    m.sources.push_back(z);
    m.strengths.push_back(c);
  }
  return m;
}

/// Betti's reciprocity integral and the magnitude it is measured against.
struct BettiResult {
  double value = 0.0;
  double scale = 0.0;
  double relative() const { return std::abs(value) / scale; }
};

inline BettiResult betti(const ManufacturedSolution& u, const ManufacturedSolution& v, const SurfaceQuadrature& q) {
  BettiResult b;
  for (std::size_t i = 0; i < q.size(); ++i) {
    Vec6 uu = u.value(q.nodes[i]), vv = v.value(q.nodes[i]);
    Vec6 tu = u.traction(q.nodes[i], q.normals[i]), tv = v.traction(q.nodes[i], q.normals[i]);
    double a = 0.0, c = 0.0;
    for (int r = 0; r < 6; ++r) {
      a += vv[r] * tu[r];
      c += uu[r] * tv[r];
    }
    b.value += q.weights[i] * (a - c);
    b.scale += q.weights[i] * (std::abs(a) + std::abs(c));
  }
  return b;
}

}  // namespace carleman
