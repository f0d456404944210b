#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace carleman {

struct MaterialParams {
  double lambda_c = 1.0;
  double mu_c = 1.0;
  double nu_c = 1.0;
  double beta_c = 1.0;
  double epsilon_c = 1.0;
  double alpha_c = 0.5;
  double rho_d = 1.0;
  double theta_c = 1.0;
  double sigma_f = 2.0;
};

/// Names of every violated admissibility inequality; empty means valid.
inline std::vector<std::string> validate(const MaterialParams& p) {
  std::vector<std::string> v;
  if (!(p.mu_c > 0)) v.emplace_back("mu>0");
  if (!(3 * p.lambda_c + 2 * p.mu_c > 0)) v.emplace_back("3lambda+2mu>0");
  if (!(p.alpha_c > 0)) v.emplace_back("alpha>0");
  if (!(p.epsilon_c > 0)) v.emplace_back("epsilon>0");
  if (!(3 * p.epsilon_c + 2 * p.nu_c > 0)) v.emplace_back("3epsilon+2nu>0");
  if (!(p.beta_c > 0)) v.emplace_back("beta>0");
  if (!(p.rho_d > 0)) v.emplace_back("rho>0");
  if (!(p.sigma_f > 0)) v.emplace_back("sigma>0");
  if (!(p.theta_c * p.sigma_f * p.sigma_f > 4 * p.alpha_c)) v.emplace_back("theta*sigma^2>4alpha");
  return v;
}

struct WaveNumbers {
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  std::array<double, 4> k{};  ///< k_1..k_4, with k_3 >= k_4

  double k_sq(int l) const { return k[l] * k[l]; }
  double k_max() const { return std::max(std::max(k[0], k[1]), std::max(k[2], k[3])); }
};

inline WaveNumbers wave_numbers(const MaterialParams& p) {
  auto bad = validate(p);
  if (!bad.empty()) {
    std::string msg = "invalid material parameters:";
    for (auto& b : bad) msg += " " + b;
    throw ConfigError(msg);
  }
  const double s2 = p.sigma_f * p.sigma_f;
  WaveNumbers wn;
  wn.sigma1_sq = p.rho_d * s2 / (p.mu_c + p.alpha_c);
  wn.sigma2_sq = (p.theta_c * s2 - 4 * p.alpha_c) / (p.nu_c + p.beta_c);
  double k1sq = p.rho_d * s2 / (p.lambda_c + 2 * p.mu_c);
  double k2sq = (p.theta_c * s2 - 4 * p.alpha_c) / (p.epsilon_c + 2 * p.nu_c);
  double sum = wn.sigma1_sq + wn.sigma2_sq +
               4 * p.alpha_c * p.alpha_c / ((p.mu_c + p.alpha_c) * (p.beta_c + p.nu_c));
  double prod = wn.sigma1_sq * wn.sigma2_sq;
  double disc = sum * sum - 4 * prod;
  if (disc < 0) throw DegenerateMediumError("complex wave numbers k_3, k_4 (negative discriminant)");
  // stable quadratic roots
  double big = 0.5 * (sum + std::sqrt(disc));
  double small = prod / big;
  if (!(k1sq > 0 && k2sq > 0 && small > 0))
    throw DegenerateMediumError("non-positive squared wave number");
  wn.k = {std::sqrt(k1sq), std::sqrt(k2sq), std::sqrt(big), std::sqrt(small)};
  return wn;
}

struct KernelCoeffs {
  std::array<double, 4> alpha_l{};
  std::array<double, 4> beta_l{};
  std::array<double, 4> gamma_l{};
  std::array<double, 4> delta_l{};
  std::array<double, 4> eps_l{};
};

inline KernelCoeffs kernel_coeffs(const MaterialParams& p, const WaveNumbers& wn) {
  const double pi = std::numbers::pi;
  const double k3 = wn.k_sq(2), k4 = wn.k_sq(3);
  const double gap = k3 - k4;
  if (!(std::abs(gap) > 1e-12 * std::max(k3, 1.0)))
    throw DegenerateMediumError("double root k_3^2 = k_4^2: kernel coefficients undefined");
  const double s2 = p.sigma_f * p.sigma_f;
  KernelCoeffs kc;
  for (int i = 0; i < 4; ++i) {
    const int l = i + 1;
    const double sign = (l % 2 == 0) ? 1.0 : -1.0;
    const double pick = (l == 3 || l == 4) ? 1.0 : 0.0;
    const double ksq = wn.k_sq(i);
    kc.alpha_l[i] = sign * (wn.sigma2_sq - ksq) * pick / (2 * pi * (p.mu_c + p.alpha_c) * gap);
    kc.gamma_l[i] = sign * (wn.sigma1_sq - ksq) * pick / (2 * pi * (p.beta_c + p.nu_c) * gap);
    kc.eps_l[i] = sign * pick / (2 * pi * (p.beta_c + p.nu_c) * gap);
    kc.beta_l[i] = -(l == 1 ? 1.0 : 0.0) / (2 * pi * p.rho_d * s2) + kc.alpha_l[i] / ksq;
    kc.delta_l[i] = -(l == 2 ? 1.0 : 0.0) / (2 * pi * (p.theta_c * s2 - 4 * p.alpha_c)) + kc.gamma_l[i] / ksq;
  }
  return kc;
}

}  // namespace carleman
