#pragma once

#include <concepts>
#include <string>
#include <vector>

#include "mfld/noise.hpp"
#include "mfld/particle_control.hpp"
#include "mfld/problem.hpp"

namespace mfld {

// X[j][k] in R^d for k = 0..K.
struct TrajectoryBundle {
  TimeGrid grid;
  std::size_t outer_count = 0;
  std::size_t state_dim = 1;
  std::vector<double> xi;
  std::vector<double> X;  // [j][k][c]

  ConstVec at(std::size_t j, std::size_t k) const {
    return ConstVec(X).subspan((j * (grid.steps + 1) + k) * state_dim, state_dim);
  }
  OutVec at(std::size_t j, std::size_t k) {
    return OutVec(X).subspan((j * (grid.steps + 1) + k) * state_dim, state_dim);
  }
};

// Anything that can hand out the control cloud used at (j, k). The current
// state is passed so that feedback controls can be expressed; open-loop
// sources ignore it. `scratch` is per-caller storage the source may fill.
template <class S>
concept ControlSource = requires(const S& s, std::size_t j, std::size_t k, ConstVec x,
                                 EmpiricalCloud& scratch) {
  { s.outer_count() } -> std::convertible_to<std::size_t>;
  { s.steps() } -> std::convertible_to<std::size_t>;
  { s.action_dim() } -> std::convertible_to<std::size_t>;
  { s.cloud_at(j, k, x, scratch) } -> std::same_as<CloudView>;
};

// Open-loop particle control.
struct FixedControl {
  const ParticleControl& control;
  std::size_t outer_count() const { return control.outer_count; }
  std::size_t steps() const { return control.steps(); }
  std::size_t action_dim() const { return control.action_dim; }
  CloudView cloud_at(std::size_t j, std::size_t k, ConstVec, EmpiricalCloud&) const {
    return control.cloud(j, k);
  }
};

// Euler-Maruyama: X_{k+1} = X_k + Phi(t_k, X_k, nu_k) dt + Gamma dW_k.
// `visit(j, k, t, x, cloud)` is called at every step before X_{k+1} is formed,
// with the cloud the source produced for that step. Paths are visited in
// parallel; visitors must only write per-path state.
template <ControlSource Source, class Visitor>
TrajectoryBundle simulate_forward_visit(const ProblemSpec& spec, const Source& source,
                                        const BrownianBundle& noise, ConstVec xi, Visitor&& visit) {
  require(xi.size() == spec.state_dim, "forward: xi has wrong dimension");
  require(source.action_dim() == spec.action_dim, "forward: control dimension mismatch");
  require(source.steps() == noise.grid.steps, "forward: control and noise grids differ");
  require(source.outer_count() == noise.outer_count, "forward: control and noise path counts differ");
  require(noise.noise_dim == spec.noise_dim, "forward: noise dimension mismatch");
  const std::size_t m = noise.outer_count, kk = noise.grid.steps, d = spec.state_dim,
                    w = spec.noise_dim;
  const double dt = noise.grid.dt();

  TrajectoryBundle tb{noise.grid, m, d, std::vector<double>(xi.begin(), xi.end()), {}};
  tb.X.resize(m * (kk + 1) * d);
  bool failed = false;
  std::string where;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) {
    EmpiricalCloud scratch;
    std::vector<double> phi(d), gamma(spec.has_constant_diffusion() ? 0 : d * w);
    auto x0 = tb.at(j, 0);
    std::copy(xi.begin(), xi.end(), x0.begin());
    for (std::size_t k = 0; k < kk; ++k) {
      const auto x = ConstVec(tb.at(j, k));
      auto next = tb.at(j, k + 1);
      const double t = noise.grid.node(k);
      const CloudView cl = source.cloud_at(j, k, x, scratch);
      visit(j, k, t, x, cl);
      spec.drift(t, x, cl, phi);
      const double* dw = noise.at(j, k);
      const double* g = spec.diffusion.data();
      if (!spec.has_constant_diffusion()) {
        spec.state_diffusion(t, x, cl, gamma);
        g = gamma.data();
      }
      bool ok = true;
      for (std::size_t r = 0; r < d; ++r) {
        double v = x[r] + phi[r] * dt;
        for (std::size_t l = 0; l < w; ++l) v += g[r * w + l] * dw[l];
        next[r] = v;
        ok = ok && std::isfinite(v);
      }
      if (!ok) {
#pragma omp critical
        if (!failed) {
          failed = true;
          where = "forward: non-finite state at j=" + std::to_string(j) + " k=" + std::to_string(k + 1);
        }
        break;
      }
    }
  }
  if (failed) throw NumericalError(where);
  return tb;
}

template <ControlSource Source>
TrajectoryBundle simulate_forward(const ProblemSpec& spec, const Source& source,
                                  const BrownianBundle& noise, ConstVec xi) {
  return simulate_forward_visit(spec, source, noise, xi,
                                [](std::size_t, std::size_t, double, ConstVec, const CloudView&) {});
}

inline TrajectoryBundle simulate_forward(const ProblemSpec& spec, const ParticleControl& control,
                                         const BrownianBundle& noise, ConstVec xi) {
  return simulate_forward(spec, FixedControl{control}, noise, xi);
}

}  // namespace mfld
