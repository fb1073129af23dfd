#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfld/cloud.hpp"
#include "mfld/noise.hpp"
#include "mfld/rng.hpp"

namespace mfld {

// Measure-valued control: for each outer path j and grid node k < K a cloud
// of N particles in R^p, stored as theta[j][k][i][c].
struct ParticleControl {
  TimeGrid grid;
  std::size_t outer_count = 0;  // M
  std::size_t particles = 0;    // N
  std::size_t action_dim = 1;   // p
  double q_metric = 2.0;
  std::vector<double> theta;

  std::size_t steps() const { return grid.steps; }
  std::size_t cell_size() const { return particles * action_dim; }
  std::size_t offset(std::size_t j, std::size_t k) const {
    return (j * grid.steps + k) * cell_size();
  }
  CloudView cloud(std::size_t j, std::size_t k) const {
    return {ConstVec(theta).subspan(offset(j, k), cell_size()), action_dim};
  }
  OutVec cloud_data(std::size_t j, std::size_t k) {
    return OutVec(theta).subspan(offset(j, k), cell_size());
  }
};

inline ParticleControl make_control(const TimeGrid& grid, std::size_t outer_count,
                                    std::size_t particles, std::size_t action_dim,
                                    double q_metric = 2.0) {
  require(outer_count >= 1, "control: M must be >= 1");
  require(particles >= 2, "control: N must be >= 2");
  require(action_dim >= 1, "control: p must be >= 1");
  require(q_metric >= 1.0, "control: q_metric must be >= 1");
  ParticleControl pc{grid, outer_count, particles, action_dim, q_metric, {}};
  pc.theta.assign(outer_count * grid.steps * particles * action_dim, 0.0);
  return pc;
}

// A distribution on R^p given as a map from p standard normals to a sample.
struct Sampler {
  std::size_t dim = 1;
  std::function<void(ConstVec z, OutVec a)> transform;
};

inline Sampler point_mass_sampler(std::vector<double> at) {
  const std::size_t p = at.size();
  return {p, [at = std::move(at)](ConstVec, OutVec a) {
            for (std::size_t c = 0; c < a.size(); ++c) a[c] = at[c];
          }};
}

// Independent coordinates N(mean_c, sd^2).
inline Sampler gaussian_sampler(std::vector<double> mean, double sd) {
  const std::size_t p = mean.size();
  return {p, [mean = std::move(mean), sd](ConstVec z, OutVec a) {
            for (std::size_t c = 0; c < a.size(); ++c) a[c] = mean[c] + sd * z[c];
          }};
}

inline Sampler prior_sampler(std::size_t p) { return gaussian_sampler(std::vector<double>(p, 0.0), 1.0); }

// I.i.d. particles per (j, k). The draws use the init stream indexed by
// (j, k) only: no dependence on the Brownian increments at all.
inline ParticleControl init_control(const Sampler& sampler, const TimeGrid& grid,
                                    std::size_t outer_count, std::size_t particles,
                                    std::uint64_t seed, double q_metric = 2.0) {
  auto pc = make_control(grid, outer_count, particles, sampler.dim, q_metric);
  const CounterRng rng(seed, Stream::init);
  const std::size_t p = sampler.dim;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < outer_count; ++j) {
    std::vector<double> z(particles * p);
    for (std::size_t k = 0; k < grid.steps; ++k) {
      rng.fill_normals(z, z.size(), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k), 0u);
      auto cell = pc.cloud_data(j, k);
      for (std::size_t i = 0; i < particles; ++i)
        sampler.transform(ConstVec(z).subspan(i * p, p), cell.subspan(i * p, p));
    }
  }
  return pc;
}

inline void require_same_shape(const ParticleControl& a, const ParticleControl& b) {
  require(a.outer_count == b.outer_count && a.particles == b.particles &&
              a.action_dim == b.action_dim && a.grid.steps == b.grid.steps &&
              a.grid.horizon == b.grid.horizon,
          "control: shape mismatch");
}

inline void require_finite(const ParticleControl& pc) {
  for (std::size_t idx = 0; idx < pc.theta.size(); ++idx) {
    if (!std::isfinite(pc.theta[idx])) {
      const std::size_t i = (idx / pc.action_dim) % pc.particles;
      const std::size_t cell = idx / pc.cell_size();
      throw NumericalError("non-finite particle at j=" + std::to_string(cell / pc.steps()) +
                           " k=" + std::to_string(cell % pc.steps()) + " i=" + std::to_string(i));
    }
  }
}

}  // namespace mfld
