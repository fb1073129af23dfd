#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "mfld/adjoint.hpp"
#include "mfld/entropy.hpp"
#include "mfld/flow_state.hpp"
#include "mfld/hamiltonian.hpp"

namespace mfld {

struct GibbsGrid {
  double lo = -8.0;
  double hi = 8.0;
  std::size_t nodes = 1024;
};

struct GibbsResidual {
  std::vector<double> per_cell;  // [j][k]
  double aggregate = 0.0;
};

// Total variation between the KDE of each cloud and the Gibbs density
// proportional to exp(-(2/sigma^2) dH0/dm(a, cloud) - U(a)), both binned on a
// uniform grid. The target is normalised by quadrature on the grid.
inline GibbsResidual gibbs_residual(const ProblemSpec& spec, const ParticleControl& control,
                                    const TrajectoryBundle& traj, const AdjointBundle& adjoint,
                                    double sigma, const GibbsGrid& grid = {}) {
  require(spec.action_dim == 1, "gibbs_residual: grid quadrature needs p = 1");
  require(sigma > 0.0, "gibbs_residual: sigma must be > 0");
  require(grid.nodes >= 2 && grid.hi > grid.lo, "gibbs_residual: bad grid");
  const std::size_t m = control.outer_count, kk = control.steps(), n = grid.nodes;
  const double delta = (grid.hi - grid.lo) / static_cast<double>(n);
  std::vector<double> nodes(n), prior(n);
  for (std::size_t b = 0; b < n; ++b) {
    nodes[b] = grid.lo + (static_cast<double>(b) + 0.5) * delta;
    prior[b] = spec.prior_potential(ConstVec(&nodes[b], 1));
  }
  const double scale = 2.0 / (sigma * sigma);
  GibbsResidual out;
  out.per_cell.assign(m * kk, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> target(n);
    for (std::size_t k = 0; k < kk; ++k) {
      const auto cl = control.cloud(j, k);
      flat_hamiltonian_points(spec, control.grid.node(k), traj.at(j, k), adjoint.y(j, k), cl, nodes, target);
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < n; ++b) {
        target[b] = -scale * target[b] - prior[b];
        top = std::max(top, target[b]);
      }
      double z = 0.0;
      for (std::size_t b = 0; b < n; ++b) z += (target[b] = std::exp(target[b] - top));
      const auto kde = GaussianKde(cl).grid_masses(grid.lo, grid.hi, n);
      double tv = kde.outside;
      for (std::size_t b = 0; b < n; ++b) tv += std::abs(kde.cells[b] - target[b] / z);
      out.per_cell[j * kk + k] = 0.5 * tv;
    }
  }
  out.aggregate = std::accumulate(out.per_cell.begin(), out.per_cell.end(), 0.0) /
                  static_cast<double>(out.per_cell.size());
  return out;
}

inline GibbsResidual gibbs_residual(const ProblemSpec& spec, const FlowState& state, double sigma,
                                    const GibbsGrid& grid = {}) {
  return gibbs_residual(spec, state.control, state.traj, state.adjoint, sigma, grid);
}

inline const std::vector<double>& default_probe_quantiles() {
  static const std::vector<double> q{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  return q;
}

// Log-density of the control law at (j, k), used instead of the KDE.
using CellLogDensity = std::function<double(std::size_t j, std::size_t k, ConstVec a)>;

// Standard deviation over probe particles of dH^sigma/dm, averaged over
// (j, k). Probes are the particles at the given quantile ranks of the first
// coordinate. +inf if some cloud is degenerate and no density is supplied.
inline double foc_flatness(const ProblemSpec& spec, const ParticleControl& control,
                           const TrajectoryBundle& traj, const AdjointBundle& adjoint, double sigma,
                           const std::vector<double>& quantiles = default_probe_quantiles(),
                           const CellLogDensity& log_density = {}) {
  require(sigma > 0.0, "foc_flatness: sigma must be > 0");
  require(quantiles.size() >= 2, "foc_flatness: need at least two probes");
  for (double q : quantiles) require(q >= 0.0 && q <= 1.0, "foc_flatness: quantiles must lie in [0, 1]");
  const std::size_t m = control.outer_count, kk = control.steps(), n = control.particles,
                    p = control.action_dim, np = quantiles.size();
  const double half_s2 = 0.5 * sigma * sigma;
  std::vector<double> spread(m * kk);
  bool degenerate = false;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> order(n);
    std::vector<double> probes(np * p), values(np);
    for (std::size_t k = 0; k < kk; ++k) {
      const auto cl = control.cloud(j, k);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cl(a, 0) < cl(b, 0); });
      for (std::size_t l = 0; l < np; ++l) {
        const auto rank = static_cast<std::size_t>(std::floor(quantiles[l] * static_cast<double>(n - 1)));
        const auto a = cl.point(order[rank]);
        std::copy(a.begin(), a.end(), probes.begin() + static_cast<std::ptrdiff_t>(l * p));
      }
      flat_hamiltonian_points(spec, control.grid.node(k), traj.at(j, k), adjoint.y(j, k), cl, probes, values);
      if (log_density) {
        for (std::size_t l = 0; l < np; ++l) {
          const ConstVec a(probes.data() + l * p, p);
          values[l] += half_s2 * (spec.prior_potential(a) + std::max(kLogDensityFloor, log_density(j, k, a)) + 1.0);
        }
      } else {
        const GaussianKde kde(cl);
        if (kde.degenerate()) {
#pragma omp critical
          degenerate = true;
          continue;
        }
        for (std::size_t l = 0; l < np; ++l) {
          const ConstVec a(probes.data() + l * p, p);
          values[l] += half_s2 * (spec.prior_potential(a) + kde.log_density(a) + 1.0);
        }
      }
      const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(np);
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      spread[j * kk + k] = std::sqrt(ss / static_cast<double>(np - 1));
    }
  }
  if (degenerate) return std::numeric_limits<double>::infinity();
  return std::accumulate(spread.begin(), spread.end(), 0.0) / static_cast<double>(spread.size());
}

inline double foc_flatness(const ProblemSpec& spec, const FlowState& state, double sigma,
                           const std::vector<double>& quantiles = default_probe_quantiles(),
                           const CellLogDensity& log_density = {}) {
  return foc_flatness(spec, state.control, state.traj, state.adjoint, sigma, quantiles, log_density);
}

}  // namespace mfld
