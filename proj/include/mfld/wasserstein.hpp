#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfld/particle_control.hpp"

namespace mfld {

inline constexpr std::size_t kSlicedProjections = 64;
inline constexpr std::uint64_t kSlicedSeed = 0x51ced5eedULL;

namespace detail {

inline double sorted_cost(std::vector<double>& x, std::vector<double>& y, double q) {
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double acc = 0.0;
  if (q == 2.0) {
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i] - y[i]), q);
  }
  return acc / static_cast<double>(x.size());
}

// Fixed unit directions in R^p, identical on every call.
inline std::vector<double> sliced_directions(std::size_t p) {
  std::vector<double> dirs(kSlicedProjections * p);
  const CounterRng rng(kSlicedSeed, Stream::projection);
  rng.fill_normals(dirs, dirs.size(), static_cast<std::uint32_t>(p), 0u, 0u);
  for (std::size_t l = 0; l < kSlicedProjections; ++l) {
    double n = 0.0;
    for (std::size_t c = 0; c < p; ++c) n += dirs[l * p + c] * dirs[l * p + c];
    n = std::sqrt(n);
    for (std::size_t c = 0; c < p; ++c) dirs[l * p + c] /= n;
  }
  return dirs;
}

}  // namespace detail

// W_q(a, b)^q between equal-size uniform clouds. Exact (sorted coupling) for
// p = 1; sliced Wasserstein over 64 fixed projections for p > 1.
inline double wasserstein_q_pow(const CloudView& a, const CloudView& b, double q) {
  require(a.size() == b.size() && a.dim() == b.dim() && a.size() > 0,
          "wasserstein: clouds must have equal size and dimension");
  require(!a.weighted() && !b.weighted(), "wasserstein: weighted clouds are not supported");
  const std::size_t n = a.size(), p = a.dim();
  std::vector<double> x(n), y(n);
  if (p == 1) {
    std::copy(a.data().begin(), a.data().end(), x.begin());
    std::copy(b.data().begin(), b.data().end(), y.begin());
    return detail::sorted_cost(x, y, q);
  }
  static thread_local std::vector<double> dirs;
  static thread_local std::size_t dirs_dim = 0;
  if (dirs_dim != p) {
    dirs = detail::sliced_directions(p);
    dirs_dim = p;
  }
  double acc = 0.0;
  for (std::size_t l = 0; l < kSlicedProjections; ++l) {
    const double* u = dirs.data() + l * p;
    for (std::size_t i = 0; i < n; ++i) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        sx += u[c] * a(i, c);
        sy += u[c] * b(i, c);
      }
      x[i] = sx;
      y[i] = sy;
    }
    acc += detail::sorted_cost(x, y, q);
  }
  return acc / static_cast<double>(kSlicedProjections);
}

// (int_0^T W_q(mu_t, nu_t)^q dt)^(1/q) on outer path j, left Riemann sum.
inline double wasserstein_qT(const ParticleControl& mu, const ParticleControl& nu, std::size_t j) {
  require_same_shape(mu, nu);
  require(mu.q_metric == nu.q_metric, "wasserstein: q_metric mismatch");
  require(j < mu.outer_count, "wasserstein: outer index out of range");
  const double dt = mu.grid.dt();
  double acc = 0.0;
  for (std::size_t k = 0; k < mu.steps(); ++k)
    acc += wasserstein_q_pow(mu.cloud(j, k), nu.cloud(j, k), mu.q_metric) * dt;
  return std::pow(acc, 1.0 / mu.q_metric);
}

// (E^W[(W_q^T)^q])^(1/q) with the expectation over outer paths.
inline double rho_q(const ParticleControl& mu, const ParticleControl& nu) {
  require_same_shape(mu, nu);
  require(mu.q_metric == nu.q_metric, "wasserstein: q_metric mismatch");
  const std::size_t m = mu.outer_count;
  std::vector<double> per_path(m);
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) per_path[j] = std::pow(wasserstein_qT(mu, nu, j), mu.q_metric);
  double acc = 0.0;
  for (double v : per_path) acc += v;
  return std::pow(acc / static_cast<double>(m), 1.0 / mu.q_metric);
}

}  // namespace mfld
