#include <fmt/core.h>

#include "carleman/reconstruct.hpp"

/// Continues a manufactured solution from the hemisphere S into the cap and
/// prints the error at one probe for clean and noisy data.
int main() {
  using namespace carleman;
  const Medium medium = Medium::from({});
  const DomainQuadrature dq = make_cap(1.0, 24);
  const ManufacturedSolution u = manufacture(dq.domain, medium, 4, 7);
  const CauchyData clean = cauchy_data(u, dq.S, default_threads());
  const double M = data_bound(u, make_cap(1.0, 48).Sigma, default_threads());

  const Vec3 x{0.0, 0.0, 0.5};
  const Vec6 truth = u.value(x);
  auto error = [&](const Vec6& v) {
    Vec6 e;
    for (int c = 0; c < 6; ++c) e[c] = v[c] - truth[c];
    return norm(e) / norm(truth);
  };

  fmt::print("nodes on S: {}, M = {:.4f}, max k = {:.4f}\n", dq.S.size(), M, medium.wn.k_max());
  for (double tau : {4.0, 8.0, 16.0}) {
    Vec6 v = u_tau(x, clean, dq.S, medium, KernelSpec::cap(tau), default_threads());
    fmt::print("clean data   tau = {:6.3f}  relative error {:.3e}\n", tau, error(v));
  }
  for (double delta : {1e-2, 1e-3, 1e-4}) {
    TauChoice tc = choose_tau(M, delta, dq, medium.wn);
    CauchyData noisy = add_noise(clean, delta, 1);
    Vec6 v = u_tau_delta(x, noisy, dq.S, medium, KernelSpec::cap(tc.tau), default_threads());
    fmt::print("delta = {:.0e}  tau = {:6.3f}  relative error {:.3e}\n", delta, tc.tau, error(v));
  }
}
