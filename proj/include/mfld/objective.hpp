#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfld/adjoint.hpp"
#include "mfld/entropy.hpp"
#include "mfld/forward.hpp"
#include "mfld/hamiltonian.hpp"

namespace mfld {

// Monte Carlo estimate over outer paths.
struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::vector<double> per_path;
  bool singular = false;  // some entropy term was +inf
};

inline McEstimate summarize(std::vector<double> per_path) {
  McEstimate e;
  const double n = static_cast<double>(per_path.size());
  double s = 0.0;
  for (double v : per_path) s += v;
  e.value = s / n;
  double ss = 0.0;
  for (double v : per_path) ss += (v - e.value) * (v - e.value);
  e.stderr_ = per_path.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  e.per_path = std::move(per_path);
  if (!std::isfinite(e.value)) {
    e.singular = true;
    e.value = std::numeric_limits<double>::infinity();
  }
  return e;
}

// Standard error of the path-wise difference of two estimates that share
// their outer noise.
inline double paired_stderr(const McEstimate& a, const McEstimate& b) {
  std::vector<double> diff(a.per_path.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = a.per_path[j] - b.per_path[j];
  return summarize(std::move(diff)).stderr_;
}

// J^sigma = E[ sum_k (F(t_k, X_k, nu_k) + (sigma^2/2) Ent(nu_k)) dt + g(X_K) ].
template <ControlSource Source>
McEstimate evaluate_objective(const ProblemSpec& spec, const Source& source, const BrownianBundle& noise,
                              ConstVec xi, double sigma) {
  require(sigma >= 0.0, "objective: sigma must be >= 0");
  const std::size_t m = noise.outer_count, kk = noise.grid.steps;
  const double dt = noise.grid.dt();
  std::vector<double> running(m, 0.0);
  const double half_s2 = 0.5 * sigma * sigma;
  auto tb = simulate_forward_visit(spec, source, noise, xi,
                                   [&](std::size_t j, std::size_t, double t, ConstVec x, const CloudView& cl) {
                                     double v = spec.running_cost(t, x, cl);
                                     if (half_s2 > 0.0) v += half_s2 * entropy_estimate(cl, spec.prior_potential);
                                     running[j] += v * dt;
                                   });
  std::vector<double> per_path(m);
  for (std::size_t j = 0; j < m; ++j) per_path[j] = running[j] + spec.terminal_cost(tb.at(j, kk));
  return summarize(std::move(per_path));
}

inline McEstimate evaluate_objective(const ProblemSpec& spec, const ParticleControl& control,
                                     const BrownianBundle& noise, ConstVec xi, double sigma) {
  return evaluate_objective(spec, FixedControl{control}, noise, xi, sigma);
}

// The mixture nu + eps (mu - nu) per (j, k), held exactly as a weighted
// cloud: the nu particles with weight (1 - eps) / N followed by the mu
// particles with weight eps / N. This is the same measure as an equal-weight
// resample of N / eps particles whenever N / eps is an integer.
struct MixtureControl {
  const ParticleControl& nu;
  const ParticleControl& mu;
  double eps;

  std::size_t outer_count() const { return nu.outer_count; }
  std::size_t steps() const { return nu.steps(); }
  std::size_t action_dim() const { return nu.action_dim; }

  CloudView cloud_at(std::size_t j, std::size_t k, ConstVec, EmpiricalCloud& scratch) const {
    const std::size_t n = nu.particles;
    const ConstVec src_nu = nu.cloud(j, k).data(), src_mu = mu.cloud(j, k).data();
    scratch.dim = nu.action_dim;
    scratch.points.assign(src_nu.begin(), src_nu.end());
    scratch.points.insert(scratch.points.end(), src_mu.begin(), src_mu.end());
    scratch.weights.assign(2 * n, eps / static_cast<double>(n));
    std::fill(scratch.weights.begin(), scratch.weights.begin() + static_cast<std::ptrdiff_t>(n),
              (1.0 - eps) / static_cast<double>(n));
    return scratch.view();
  }
};

// (J^0(nu + eps (mu - nu)) - J^0(nu)) / eps with common random numbers. The
// baseline is evaluated on the same weighted representation (mixing nu with
// itself) so both sides share their summation structure.
inline McEstimate directional_derivative_fd(const ProblemSpec& spec, const ParticleControl& nu,
                                            const ParticleControl& mu, const BrownianBundle& noise,
                                            ConstVec xi, double eps) {
  require(eps > 0.0 && eps < 1.0, "directional derivative: eps must lie in (0, 1)");
  require_same_shape(nu, mu);
  const auto j_mix = evaluate_objective(spec, MixtureControl{nu, mu, eps}, noise, xi, 0.0);
  const auto j_base = evaluate_objective(spec, MixtureControl{nu, nu, eps}, noise, xi, 0.0);
  std::vector<double> per_path(j_mix.per_path.size());
  for (std::size_t j = 0; j < per_path.size(); ++j)
    per_path[j] = (j_mix.per_path[j] - j_base.per_path[j]) / eps;
  return summarize(std::move(per_path));
}

// E sum_k [ int dH0/dm(X_k, Y_k, nu_k, a) (mu_k - nu_k)(da) ] dt with (X, Y)
// solved under nu.
inline McEstimate hamiltonian_pairing(const ProblemSpec& spec, const ParticleControl& nu,
                                      const ParticleControl& mu, const BrownianBundle& noise, ConstVec xi,
                                      AdjointMode mode = AdjointMode::regression) {
  require_same_shape(nu, mu);
  require_constant_diffusion(spec, "hamiltonian_pairing");
  const auto tb = simulate_forward(spec, nu, noise, xi);
  const auto ab = solve_adjoint(spec, mode, tb, nu, noise);
  const std::size_t m = nu.outer_count, kk = nu.steps();
  const double dt = nu.grid.dt();
  std::vector<double> per_path(m, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    std::vector<double> on_mu(mu.particles), on_nu(nu.particles);
    for (std::size_t k = 0; k < kk; ++k) {
      const double t = nu.grid.node(k);
      const auto x = tb.at(j, k);
      const auto y = ab.y(j, k);
      const auto cnu = nu.cloud(j, k), cmu = mu.cloud(j, k);
      flat_hamiltonian_points(spec, t, x, y, cnu, cmu.data(), on_mu);
      flat_hamiltonian_points(spec, t, x, y, cnu, cnu.data(), on_nu);
      // Term by term, so that mu = nu cancels exactly.
      double diff = 0.0;
      for (std::size_t i = 0; i < on_mu.size(); ++i) diff += cmu.weight(i) * on_mu[i] - cnu.weight(i) * on_nu[i];
      acc += diff * dt;
    }
    per_path[j] = acc;
  }
  return summarize(std::move(per_path));
}

}  // namespace mfld
