#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "carleman/reconstruct.hpp"

using namespace carleman;

namespace {

const Medium& medium() {
  static const Medium m = Medium::from({});
  return m;
}

struct CapFixture {
  DomainQuadrature dq = make_cap(1.0, 16);
  ManufacturedSolution u = manufacture(dq.domain, medium(), 4, 7);
  CauchyData data = cauchy_data(u, dq.S, 4);
};

const CapFixture& cap16() {
  static const CapFixture f;
  return f;
}

double rel_error(const Vec6& a, const Vec6& b) {
  Vec6 e;
  for (int c = 0; c < 6; ++c) e[c] = a[c] - b[c];
  return norm(e) / norm(b);
}

/// Smallest root of P_n by bisection on std::legendre, independent of the library's rule.
double smallest_legendre_root(unsigned n) {
  double a = -1.0, b = -1.0;
  while (std::legendre(n, b + 1e-4) * std::legendre(n, a) > 0) b += 1e-4;
  b += 1e-4;
  double fa = std::legendre(n, a);
  for (int i = 0; i < 200; ++i) {
    double c = 0.5 * (a + b), fc = std::legendre(n, c);
    if ((fc < 0) == (fa < 0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(CauchyData, ExactValuesAtNodes) {
  const auto& f = cap16();
  ASSERT_EQ(f.data.size(), f.dq.S.size());
  for (std::size_t i : {std::size_t{0}, std::size_t{100}, f.dq.S.size() - 1}) {
    EXPECT_EQ(f.data.f[i], f.u.value(f.dq.S.nodes[i]));
    EXPECT_EQ(f.data.g[i], f.u.traction(f.dq.S.nodes[i], f.dq.S.normals[i]));
  }
  EXPECT_EQ(f.data.delta, 0.0);
}

TEST(Noise, ZeroIsIdentity) {
  const auto& f = cap16();
  auto n = add_noise(f.data, 0.0, 3);
  EXPECT_EQ(n.f, f.data.f);
  EXPECT_EQ(n.g, f.data.g);
}

TEST(Noise, BudgetIsExactAndSeedDependent) {
  const auto& f = cap16();
  for (double delta : {1e-2, 1e-3, 0.5}) {
    auto a = add_noise(f.data, delta, 1), b = add_noise(f.data, delta, 2), c = add_noise(f.data, delta, 1);
    EXPECT_LE(noise_budget(f.data, a), delta);
    EXPECT_NEAR(noise_budget(f.data, a), delta * (1 - 1e-9), 1e-15);
    EXPECT_NEAR(noise_budget(f.data, b), noise_budget(f.data, a), 1e-15);
    EXPECT_NE(a.f, b.f);
    EXPECT_EQ(a.f, c.f);
    EXPECT_EQ(a.g, c.g);
    EXPECT_EQ(a.delta, delta);
    EXPECT_EQ(a.seed, 1u);
  }
  EXPECT_THROW(add_noise(f.data, 1.0, 1), ConfigError);
  EXPECT_THROW(add_noise(f.data, -1e-3, 1), ConfigError);
}

TEST(UTau, ZeroDataGivesZero) {
  const auto& f = cap16();
  CauchyData zero;
  zero.f.assign(f.dq.S.size(), Vec6{});
  zero.g.assign(f.dq.S.size(), Vec6{});
  Vec6 v = u_tau({0.0, 0.0, 0.5}, zero, f.dq.S, medium(), KernelSpec::cap(6.0));
  for (double c : v) EXPECT_EQ(c, 0.0);
}

TEST(UTau, LinearInTheData) {
  const auto& f = cap16();
  auto n = add_noise(f.data, 0.1, 9);
  const double a = 0.7, b = -1.9;
  CauchyData mix = f.data;
  for (std::size_t i = 0; i < mix.size(); ++i)
    for (int r = 0; r < 6; ++r) {
      mix.f[i][r] = a * f.data.f[i][r] + b * n.f[i][r];
      mix.g[i][r] = a * f.data.g[i][r] + b * n.g[i][r];
    }
  const Vec3 x{0.1, 0.0, 0.4};
  const auto spec = KernelSpec::cap(6.0);
  Vec6 u1 = u_tau(x, f.data, f.dq.S, medium(), spec), u2 = u_tau(x, n, f.dq.S, medium(), spec);
  Vec6 um = u_tau(x, mix, f.dq.S, medium(), spec);
  for (int c = 0; c < 6; ++c) EXPECT_NEAR(um[c], a * u1[c] + b * u2[c], 1e-12 * (norm(u1) + norm(u2)));
}

TEST(UTau, ResultDoesNotDependOnThreadCount) {
  const auto& f = cap16();
  const Vec3 x{0.1, 0.0, 0.4};
  auto a = boundary_sum(x, f.data, f.dq.S, medium(), KernelSpec::cap(8.0), 1);
  auto b = boundary_sum(x, f.data, f.dq.S, medium(), KernelSpec::cap(8.0), 5);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.mass, b.mass);
}

TEST(UTau, RejectsUnsuitableKernels) {
  const auto& f = cap16();
  const Vec3 x{0.0, 0.0, 0.5};
  EXPECT_THROW(u_tau(x, f.data, f.dq.S, medium(), KernelSpec::fundamental()), ConfigError);
  EXPECT_THROW(u_tau(x, f.data, f.dq.S, medium(), KernelSpec::cap(1.5)), ConfigError);
  EXPECT_THROW(u_tau_delta(x, f.data, f.dq.S, medium(), KernelSpec::cap(6.0)), ConfigError);
  CauchyData short_data = f.data;
  short_data.f.pop_back();
  short_data.g.pop_back();
  EXPECT_THROW(u_tau(x, short_data, f.dq.S, medium(), KernelSpec::cap(6.0)), ConfigError);
}

TEST(UTau, KernelFailuresCarryTheNodeIndex) {
  SurfaceQuadrature q;
  for (int i = 0; i < 5; ++i) q.add({0.1 * i, 0.0, 0.5}, 1.0, {0.0, 0.0, 1.0}, SurfacePart::S);
  CauchyData d;
  d.f.assign(5, Vec6{1, 0, 0, 0, 0, 0});
  d.g.assign(5, Vec6{});
  try {
    u_tau({0.1 * 3, 0.0, 0.5}, d, q, medium(), KernelSpec::cap(6.0));
    FAIL() << "expected a singularity";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("node 3 (S)"), std::string::npos) << e.what();
  }
}

TEST(UTauDelta, DeviationIsLinearInDelta) {
  const auto& f = cap16();
  const Vec3 x{0.0, 0.0, 0.5};
  const auto spec = KernelSpec::cap(6.0);
  Vec6 clean = u_tau(x, f.data, f.dq.S, medium(), spec);
  double prev = 0.0;
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    Vec6 v = u_tau_delta(x, add_noise(f.data, delta, 4), f.dq.S, medium(), spec);
    Vec6 e;
    for (int c = 0; c < 6; ++c) e[c] = v[c] - clean[c];
    double dev = norm(e);
    if (prev > 0.0) {
      EXPECT_NEAR(prev / dev, 10.0, 1e-6);
    }
    prev = dev;
    EXPECT_LE(dev, delta * boundary_sum(x, f.data, f.dq.S, medium(), spec).mass);
  }
}

TEST(Representation, FullBoundaryReproducesManufacturedSolution) {
  const auto& f = cap16();
  auto full = f.dq.full();
  auto data = cauchy_data(f.u, full, 4);
  for (Vec3 x : {Vec3{0.0, 0.0, 0.3}, Vec3{0.2, 0.1, 0.4}, Vec3{-0.3, 0.2, 0.5}})
    EXPECT_LE(rel_error(representation(x, data, full, medium(), 4), f.u.value(x)), 1e-3);
}

TEST(UTau, NoiseFreeErrorsDecreaseInTau) {
  auto dq = make_cap(1.0, 32);
  auto u = manufacture(dq.domain, medium(), 4, 7);
  auto data = cauchy_data(u, dq.S, 8);
  const Vec3 x{0.0, 0.0, 0.3};
  double prev = std::numeric_limits<double>::infinity();
  for (double tau : {4.0, 8.0, 16.0}) {
    double e = rel_error(u_tau(x, data, dq.S, medium(), KernelSpec::cap(tau), 8), u.value(x));
    EXPECT_LT(e, prev) << tau;
    prev = e;
  }
}

TEST(KernelMass, DecreasesOnSigmaForCap) {
  auto dq = make_cap(1.0, 16);
  const Vec3 x{0.0, 0.0, 0.4};
  std::vector<double> taus{4, 8, 16}, mass;
  for (double t : taus) mass.push_back(kernel_mass(x, dq.Sigma, medium(), KernelSpec::cap(t), 4));
  EXPECT_TRUE(strictly_decreasing(mass));
}

TEST(ChooseTau, CapRule) {
  auto wn = medium().wn;
  auto unit = make_cap(1.0, 8);
  auto c = choose_tau(1.0, std::exp(-2.0), unit, wn);
  EXPECT_NEAR(c.raw, 2.0, 1e-14);
  EXPECT_TRUE(c.floored);
  EXPECT_NEAR(c.floor, 1.25 * wn.k_max(), 1e-15);
  EXPECT_EQ(c.tau, c.floor);

  auto half = make_cap(0.5, 8);
  auto d = choose_tau(10.0, 1e-3, half, wn);
  EXPECT_NEAR(d.tau, 2.0 * std::log(1e4), 1e-12);
  EXPECT_NEAR(d.tau, 18.42, 5e-3);
  EXPECT_FALSE(d.floored);
}

TEST(ChooseTau, InvalidRatio) {
  auto dq = make_cap(1.0, 8);
  EXPECT_THROW(choose_tau(1.0, 1.0, dq, medium().wn), ConfigError);
  EXPECT_THROW(choose_tau(1.0, 2.0, dq, medium().wn), ConfigError);
  EXPECT_THROW(choose_tau(1.0, 0.0, dq, medium().wn), ConfigError);
}

TEST(ChooseTau, ConeRadiusFixture) {
  for (int n : {16, 32}) {
    auto dq = make_cone(2.0, 1.0, n);
    double th = 0.5 * (std::numbers::pi / 4) * (smallest_legendre_root(n) + 1.0);
    double r2 = std::cos(2 * th);
    EXPECT_NEAR(cone_r_power(dq.S, 2.0), r2, 1e-13);
    auto c = choose_tau(1.0, 1e-3, dq, medium().wn);
    EXPECT_NEAR(c.R, std::sqrt(r2), 1e-13);
    EXPECT_NEAR(c.tau, std::log(1e3) / (dq.domain.kappa * dq.domain.kappa * r2), 1e-12);
  }
  auto dq = make_cone(2.0, 1.0, 16);
  EXPECT_NEAR(choose_tau(1.0, 1e-3, dq, medium().wn).R, 0.99998267568239, 1e-13);
}

TEST(Audit, FitLineErrors) {
  std::vector<double> a{1, 2}, b{1, 2};
  EXPECT_THROW(fit_line(a, b), AuditError);
  std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(fit_line(x, y), AuditError);
  std::vector<double> x2{1, 2, 3}, y2{1, NAN, 3};
  EXPECT_THROW(fit_line(x2, y2), AuditError);
  std::vector<double> x3{1, 2, 3, 4}, y3{3, 5, 7, 9};
  auto f = fit_line(x3, y3);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
}

TEST(Audit, TauSweepOnSyntheticData) {
  std::vector<double> taus{4, 8, 16}, errs, mass;
  for (double t : taus) {
    errs.push_back(3.0 * std::exp(-0.4 * t));
    mass.push_back(2.0 * t * std::exp(-0.4 * t));
  }
  auto a = audit_tau({0, 0, 0.4}, taus, errs, {1e-9, 1e-9, 1e-9}, -0.4, 0, {});
  EXPECT_NEAR(a.slope, -0.4, 1e-12);
  EXPECT_TRUE(a.decreasing && a.slope_ok && a.ratio_ok);
  EXPECT_FALSE(a.floor_reached);
  auto m = audit_tau({0, 0, 0.4}, taus, mass, {}, -0.4, 1, {});
  EXPECT_NEAR(m.slope, -0.4, 1e-12);
  auto off = audit_tau({0, 0, 0.4}, taus, errs, {}, -0.8, 0, {});
  EXPECT_FALSE(off.slope_ok);
  EXPECT_THROW(audit_tau({0, 0, 0.4}, {4, 8}, {1, 0.5}, {}, -0.4, 0, {}), AuditError);
}

TEST(Audit, DeltaSweepOnSyntheticData) {
  const double M = 2.0;
  std::vector<double> deltas{1e-2, 1e-4, 1e-3}, taus{5, 9, 7}, errs;
  for (double d : deltas) errs.push_back(1.5 * std::pow(d, 0.4) * std::log(M / d));
  auto a = audit_delta({0, 0, 0.4}, M, deltas, taus, errs, 0.4, 1, {});
  EXPECT_EQ(a.deltas, (std::vector<double>{1e-4, 1e-3, 1e-2}));
  EXPECT_EQ(a.taus, (std::vector<double>{9, 7, 5}));
  EXPECT_NEAR(a.exponent_log_adjusted, 0.4, 1e-12);
  EXPECT_LT(a.exponent, 0.4);
  for (double c : a.constants) EXPECT_NEAR(c, 1.5, 1e-12);
  EXPECT_NEAR(a.constant_spread, 1.0, 1e-12);
  EXPECT_TRUE(a.error_monotone && a.bound_monotone && a.spread_ok);

  auto cone = audit_delta({0, 0, 0.5}, M, deltas, taus, errs, std::nan(""), 3, {});
  EXPECT_TRUE(cone.exponent_ok);
  std::vector<double> flat{1.0, 1.0, 1.0};
  EXPECT_FALSE(audit_delta({0, 0, 0.5}, M, deltas, taus, flat, std::nan(""), 3, {}).exponent_ok);
  EXPECT_THROW(audit_delta({0, 0, 0.5}, M, {1e-2, 1e-3}, {5, 7}, {1, 1}, 0.4, 1, {}), AuditError);
}
