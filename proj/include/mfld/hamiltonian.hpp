#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include "mfld/entropy.hpp"
#include "mfld/problem.hpp"

namespace mfld {

// dH0/dm(x, y, m, a) = dPhi/dm(x, m, a) . y + dF/dm(x, m, a). With constant
// diffusion the trace term has no measure dependence and drops out.
inline double flat_hamiltonian(const ProblemSpec& spec, double t, ConstVec x, ConstVec y,
                               const CloudView& m, ConstVec a) {
  thread_local std::vector<double> fd;
  fd.resize(spec.state_dim);
  spec.flat_drift(t, x, m, a, fd);
  double v = spec.flat_cost(t, x, m, a);
  for (std::size_t r = 0; r < spec.state_dim; ++r) v += fd[r] * y[r];
  return v;
}

// dH0/dm at every row of `points` (n x p).
inline void flat_hamiltonian_points(const ProblemSpec& spec, double t, ConstVec x, ConstVec y,
                                    const CloudView& m, ConstVec points, OutVec out) {
  if (spec.hamiltonian_flat_points) {
    spec.hamiltonian_flat_points(t, x, y, m, points, out);
    return;
  }
  const std::size_t p = spec.action_dim;
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = flat_hamiltonian(spec, t, x, y, m, points.subspan(l * p, p));
}

// grad_a dH0/dm = (grad_a dPhi/dm)^T y + grad_a dF/dm.
inline void flat_hamiltonian_gradient(const ProblemSpec& spec, double t, ConstVec x, ConstVec y,
                                      const CloudView& m, ConstVec a, OutVec out) {
  require_constant_diffusion(spec, "flat_hamiltonian_gradient");
  const std::size_t d = spec.state_dim, p = spec.action_dim;
  thread_local std::vector<double> jac;
  jac.resize(d * p);
  spec.flat_drift_agrad(t, x, m, a, jac);
  spec.flat_cost_agrad(t, x, m, a, out);
  for (std::size_t c = 0; c < p; ++c)
    for (std::size_t r = 0; r < d; ++r) out[c] += jac[r * p + c] * y[r];
}

// Gradient at every particle of m (out is N x p).
inline void flat_hamiltonian_gradient_cloud(const ProblemSpec& spec, double t, ConstVec x, ConstVec y,
                                            const CloudView& m, OutVec out) {
  if (spec.hamiltonian_agrad_cloud) {
    spec.hamiltonian_agrad_cloud(t, x, y, m, out);
    return;
  }
  const std::size_t p = spec.action_dim;
  for (std::size_t i = 0; i < m.size(); ++i)
    flat_hamiltonian_gradient(spec, t, x, y, m, m.point(i), out.subspan(i * p, p));
}

// dH0/dm + (sigma^2/2)(U(a) + log nu(a) + 1). Not a flat derivative of H^sigma
// (entropy has none), but constant in a exactly at the first-order condition.
inline double flat_hamiltonian_sigma(const ProblemSpec& spec, double t, ConstVec x, ConstVec y,
                                     const CloudView& m, ConstVec a, double sigma,
                                     const std::function<double(ConstVec)>& log_density) {
  const double base = flat_hamiltonian(spec, t, x, y, m, a);
  if (sigma == 0.0) return base;
  const double logd = std::max(kLogDensityFloor, log_density(a));
  return base + 0.5 * sigma * sigma * (spec.prior_potential(a) + logd + 1.0);
}

// H^sigma = Phi . y + tr(Gamma^T z) + F + (sigma^2/2) Ent(m); +inf when the
// entropy estimate reports a singular cloud.
inline double hamiltonian_value(const ProblemSpec& spec, double t, ConstVec x, ConstVec y, ConstVec z,
                                const CloudView& m, double sigma) {
  const std::size_t d = spec.state_dim, w = spec.noise_dim;
  std::vector<double> phi(d);
  spec.drift(t, x, m, phi);
  double h = spec.running_cost(t, x, m);
  for (std::size_t r = 0; r < d; ++r) h += phi[r] * y[r];
  std::vector<double> gamma = spec.diffusion;
  if (!spec.has_constant_diffusion()) spec.state_diffusion(t, x, m, gamma);
  for (std::size_t e = 0; e < d * w; ++e) h += gamma[e] * z[e];
  if (sigma != 0.0) {
    const double ent = entropy_estimate(m, spec.prior_potential);
    if (!std::isfinite(ent)) return std::numeric_limits<double>::infinity();
    h += 0.5 * sigma * sigma * ent;
  }
  return h;
}

}  // namespace mfld
