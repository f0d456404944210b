#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "carleman/material.hpp"

using namespace carleman;

namespace {

bool has(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

/// Random admissible medium with well separated k_3, k_4.
MaterialParams random_medium(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.3, 3.0);
  MaterialParams p;
  p.lambda_c = u(rng);
  p.mu_c = u(rng);
  p.nu_c = u(rng);
  p.beta_c = u(rng);
  p.epsilon_c = u(rng);
  p.alpha_c = 0.2 * u(rng);
  p.rho_d = u(rng);
  p.theta_c = u(rng);
  p.sigma_f = 1.0 + u(rng);
  if (!(p.theta_c * p.sigma_f * p.sigma_f > 4 * p.alpha_c)) p.theta_c = 8 * p.alpha_c / (p.sigma_f * p.sigma_f);
  return p;
}

}  // namespace

TEST(Validate, DefaultMediumIsAdmissible) { EXPECT_TRUE(validate({}).empty()); }

TEST(Validate, NamesEachViolation) {
  MaterialParams p;
  p.mu_c = -1.0;
  auto v = validate(p);
  EXPECT_TRUE(has(v, "mu>0"));

  MaterialParams q;
  q.theta_c = 4 * q.alpha_c / (q.sigma_f * q.sigma_f);
  EXPECT_EQ(validate(q), std::vector<std::string>{"theta*sigma^2>4alpha"});

  MaterialParams r;
  r.alpha_c = 0.0;
  r.beta_c = -1.0;
  r.rho_d = 0.0;
  r.sigma_f = -2.0;
  r.lambda_c = -5.0;
  r.epsilon_c = 0.0;
  r.nu_c = 0.0;
  v = validate(r);
  for (const char* name : {"3lambda+2mu>0", "alpha>0", "epsilon>0", "beta>0", "rho>0", "sigma>0"})
    EXPECT_TRUE(has(v, name)) << name;
}

TEST(WaveNumbers, FixtureValues) {
  auto wn = wave_numbers({});
  EXPECT_NEAR(wn.sigma1_sq, 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(wn.sigma2_sq, 1.0, 1e-14);
  EXPECT_NEAR(wn.k_sq(0), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(wn.k_sq(1), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(wn.k_sq(2), 3.1547005383792515, 1e-14);
  EXPECT_NEAR(wn.k_sq(3), 0.8452994616207484, 1e-14);
  EXPECT_NEAR(wn.k_sq(2) + wn.k_sq(3), 4.0, 1e-14);
  EXPECT_NEAR(wn.k_sq(2) * wn.k_sq(3), 8.0 / 3.0, 1e-14);
  EXPECT_NEAR(wn.k_max(), 1.7761476679542305, 1e-14);
}

TEST(WaveNumbers, RejectsInvalidMedium) {
  MaterialParams p;
  p.mu_c = -1.0;
  try {
    wave_numbers(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("mu>0"), std::string::npos);
  }
}

TEST(WaveNumbers, DecouplingLimit) {
  MaterialParams p;
  p.alpha_c = 1e-9;
  auto wn = wave_numbers(p);
  EXPECT_NEAR(wn.k_sq(2), std::max(wn.sigma1_sq, wn.sigma2_sq), 1e-8);
  EXPECT_NEAR(wn.k_sq(3), std::min(wn.sigma1_sq, wn.sigma2_sq), 1e-8);
}

TEST(WaveNumbers, VietaRelationsAndOrderingForRandomMedia) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    MaterialParams p = random_medium(rng);
    ASSERT_TRUE(validate(p).empty());
    auto wn = wave_numbers(p);
    double coupling = 4 * p.alpha_c * p.alpha_c / ((p.mu_c + p.alpha_c) * (p.beta_c + p.nu_c));
    double sum = wn.k_sq(2) + wn.k_sq(3);
    EXPECT_NEAR(sum - wn.sigma1_sq - wn.sigma2_sq, coupling, 1e-12 * sum);
    EXPECT_NEAR(wn.k_sq(2) * wn.k_sq(3) / (wn.sigma1_sq * wn.sigma2_sq), 1.0, 1e-12);
    EXPECT_GE(wn.k[2], wn.k[3]);
    for (double k : wn.k) EXPECT_GT(k, 0.0);
  }
}

TEST(WaveNumbers, ScaleCovariantInDecoupledLimit) {
  MaterialParams p;
  p.alpha_c = 1e-12;
  p.theta_c = 2.0;
  auto a = wave_numbers(p);
  const double c = 1.7;
  p.sigma_f *= c;
  auto b = wave_numbers(p);
  EXPECT_NEAR(b.sigma1_sq, c * c * a.sigma1_sq, 1e-9);
  EXPECT_NEAR(b.sigma2_sq, c * c * a.sigma2_sq, 1e-9);
  for (int l = 0; l < 4; ++l) EXPECT_NEAR(b.k_sq(l), c * c * a.k_sq(l), 1e-9) << l;
}

TEST(KernelCoeffs, FixtureTable) {
  MaterialParams p;
  auto kc = kernel_coeffs(p, wave_numbers(p));
  const std::array<std::array<double, 4>, 5> want = {{
      {0.0, 0.0, 0.098995722315781116, 0.0071075730788157745},
      {-0.039788735772973834, 0.0, 0.031380386541107585, 0.0084083492318662493},
      {0.0, 0.0, 0.016816698463732499, 0.062760773082215169},
      {0.0, -0.079577471545947668, 0.0053306798091118308, 0.074246791736835837},
      {0.0, 0.0, -0.034458055963862003, 0.034458055963862003},
  }};
  const std::array<const std::array<double, 4>*, 5> got = {&kc.alpha_l, &kc.beta_l, &kc.gamma_l, &kc.delta_l,
                                                           &kc.eps_l};
  for (int a = 0; a < 5; ++a)
    for (int l = 0; l < 4; ++l) EXPECT_NEAR((*got[a])[l], want[a][l], 1e-15) << a << " " << l;
}

TEST(KernelCoeffs, SumRulesAndVanishingEntriesForRandomMedia) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    MaterialParams p = random_medium(rng);
    auto wn = wave_numbers(p);
    auto kc = kernel_coeffs(p, wn);
    double sb = 0, se = 0, sd = 0, mag = 0;
    for (int l = 0; l < 4; ++l) {
      sb += kc.beta_l[l];
      se += kc.eps_l[l];
      sd += kc.delta_l[l];
      mag = std::max({mag, std::abs(kc.beta_l[l]), std::abs(kc.delta_l[l]), std::abs(kc.eps_l[l])});
    }
    EXPECT_NEAR(sb, 0.0, 1e-12 * std::max(1.0, mag));
    EXPECT_NEAR(se, 0.0, 1e-12 * std::max(1.0, mag));
    EXPECT_NEAR(sd, 0.0, 1e-12 * std::max(1.0, mag));
    EXPECT_EQ(kc.alpha_l[0], 0.0);
    EXPECT_EQ(kc.alpha_l[1], 0.0);
    EXPECT_EQ(kc.gamma_l[0], 0.0);
    EXPECT_EQ(kc.gamma_l[1], 0.0);
  }
}

TEST(KernelCoeffs, DoubleRootIsDegenerate) {
  MaterialParams p;
  WaveNumbers wn = wave_numbers(p);
  wn.k[3] = wn.k[2];
  EXPECT_THROW(kernel_coeffs(p, wn), DegenerateMediumError);
}
