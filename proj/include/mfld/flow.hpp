#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfld/fixed_point.hpp"
#include "mfld/flow_state.hpp"
#include "mfld/moments.hpp"
#include "mfld/objective.hpp"
#include "mfld/wasserstein.hpp"

namespace mfld {

// One checkpoint. Columns that were not computed hold NaN.
struct FlowRow {
  double s = 0.0;
  double J_sigma = 0.0;
  double J_stderr = 0.0;
  double moment_q = 0.0;
  double foc_spread = std::numeric_limits<double>::quiet_NaN();
  double gibbs_residual = std::numeric_limits<double>::quiet_NaN();
  double rho_to_ref = std::numeric_limits<double>::quiet_NaN();
  double moment_stderr = 0.0;
  double mean = 0.0;
  double mean_stderr = 0.0;
  double variance = 0.0;
  double variance_stderr = 0.0;
};

struct FlowTrace {
  std::vector<FlowRow> rows;
};

// Recomputes X under the current control and (Y, Z) per the adjoint mode.
inline void refresh(FlowState& state, const ProblemSpec& spec, const FlowConfig& cfg,
                    const BrownianBundle& noise, ConstVec xi) {
  state.traj = simulate_forward(spec, state.control, noise, xi);
  state.adjoint = solve_adjoint(spec, cfg.adjoint_mode, state.traj, state.control, noise);
}

inline FlowState make_flow_state(const ProblemSpec& spec, const FlowConfig& cfg, const BrownianBundle& noise,
                                 ParticleControl init, ConstVec xi) {
  validate(cfg, true);
  FlowState state{0, cfg.ds, std::move(init), {}, {}};
  refresh(state, spec, cfg, noise, xi);
  return state;
}

// theta <- theta - ds (grad_a dH0/dm + (sigma^2/2) grad U) + sigma sqrt(ds) xi
// for every particle, against the (X, Y) of the last refresh. The gradient of
// a cell is taken before any of its particles moves. Inner noise is addressed
// by (j, k, step), so the result does not depend on the thread count.
inline void langevin_step(FlowState& state, const ProblemSpec& spec, const FlowConfig& cfg) {
  require_constant_diffusion(spec, "langevin_step");
  require(state.step < (std::uint64_t{1} << 32), "langevin_step: step counter exhausted");
  ParticleControl& pc = state.control;
  const std::size_t m = pc.outer_count, kk = pc.steps(), cell = pc.cell_size(), p = pc.action_dim;
  const double ds = cfg.ds, half_s2 = 0.5 * cfg.sigma * cfg.sigma, noise_scale = cfg.sigma * std::sqrt(ds);
  const CounterRng rng(cfg.inner_seed, Stream::inner);
  const auto step = static_cast<std::uint32_t>(state.step);
  bool failed = false;
  std::string where;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> grad(cell), prior(cell), xi(cell);
    for (std::size_t k = 0; k < kk; ++k) {
      const auto cl = pc.cloud(j, k);
      flat_hamiltonian_gradient_cloud(spec, pc.grid.node(k), state.traj.at(j, k), state.adjoint.y(j, k), cl,
                                      grad);
      if (spec.prior_grad_cloud) {
        spec.prior_grad_cloud(cl.data(), prior);
      } else {
        for (std::size_t i = 0; i < pc.particles; ++i)
          spec.prior_grad(cl.point(i), OutVec(prior).subspan(i * p, p));
      }
      if (noise_scale > 0.0)
        rng.fill_normals(xi, cell, static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k), step);
      auto theta = pc.cloud_data(j, k);
      bool ok = true;
      for (std::size_t e = 0; e < cell; ++e) {
        double v = theta[e] - ds * (grad[e] + half_s2 * prior[e]);
        if (noise_scale > 0.0) v += noise_scale * xi[e];
        theta[e] = v;
        ok = ok && std::isfinite(v);
      }
      if (!ok) {
        std::size_t e = 0;
        while (std::isfinite(theta[e])) ++e;
#pragma omp critical
        if (!failed) {
          failed = true;
          where = "langevin: non-finite particle at j=" + std::to_string(j) + " k=" + std::to_string(k) +
                  " i=" + std::to_string(e / p);
        }
        break;
      }
    }
  }
  if (failed) throw NumericalError(where);
  ++state.step;
}

struct FlowOptions {
  const ParticleControl* reference = nullptr;  // rho_to_ref column when set
  std::function<double(std::size_t j, std::size_t k, ConstVec a)> foc_log_density;  // KDE when empty
  std::function<void(const FlowState&, const FlowRow&)> on_checkpoint;
};

// Diagnostics for the current control. Works on a freshly refreshed copy of
// the forward/backward processes and leaves the state untouched.
inline FlowRow checkpoint_row(const FlowState& state, const ProblemSpec& spec, const FlowConfig& cfg,
                              const BrownianBundle& noise, ConstVec xi, const FlowOptions& opts = {}) {
  FlowRow row;
  row.s = state.s();
  const auto j = evaluate_objective(spec, state.control, noise, xi, cfg.sigma);
  row.J_sigma = j.value;
  row.J_stderr = j.stderr_;
  const auto mom = cloud_moments(state.control, state.control.q_metric);
  row.moment_q = mom.aggregate;
  row.moment_stderr = mom.stderr_;
  row.mean = mom.mean;
  row.mean_stderr = mom.mean_stderr;
  row.variance = mom.variance;
  row.variance_stderr = mom.variance_stderr;
  if (cfg.record_fixed_point && cfg.sigma > 0.0) {
    const auto tb = simulate_forward(spec, state.control, noise, xi);
    const auto ab = solve_adjoint(spec, cfg.adjoint_mode, tb, state.control, noise);
    row.foc_spread =
        foc_flatness(spec, state.control, tb, ab, cfg.sigma, default_probe_quantiles(), opts.foc_log_density);
    if (spec.action_dim == 1) row.gibbs_residual = gibbs_residual(spec, state.control, tb, ab, cfg.sigma).aggregate;
  }
  if (opts.reference) row.rho_to_ref = rho_q(state.control, *opts.reference);
  return row;
}

// Advances `state` to step round(total_s / ds), refreshing every
// refresh_stride steps (counted on the global step) and checkpointing at the
// start, every checkpoint_stride steps and at the end. Resuming from a
// returned state continues the same trajectory bit for bit.
inline FlowTrace run_flow(FlowState& state, const ProblemSpec& spec, const FlowConfig& cfg,
                          const BrownianBundle& noise, ConstVec xi, const FlowOptions& opts = {}) {
  validate(cfg, true);
  require(state.ds == cfg.ds, "run_flow: state was produced with a different ds");
  const std::uint64_t target = cfg.total_steps();
  require(target >= state.step, "run_flow: state is already past total_s");
  FlowTrace trace;
  auto record = [&] {
    trace.rows.push_back(checkpoint_row(state, spec, cfg, noise, xi, opts));
    if (opts.on_checkpoint) opts.on_checkpoint(state, trace.rows.back());
  };
  try {
    record();
    while (state.step < target) {
      if (state.step % cfg.refresh_stride == 0) refresh(state, spec, cfg, noise, xi);
      langevin_step(state, spec, cfg);
      const bool at_stride = cfg.checkpoint_stride > 0 && state.step % cfg.checkpoint_stride == 0;
      if (at_stride || state.step == target) record();
    }
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (s=" + std::to_string(state.s()) + ")");
  }
  return trace;
}

struct FlowResult {
  FlowTrace trace;
  FlowState state;
};

inline FlowResult run_flow(const ProblemSpec& spec, const FlowConfig& cfg, const BrownianBundle& noise,
                           ParticleControl init, ConstVec xi, const FlowOptions& opts = {}) {
  validate(cfg);
  FlowResult out{{}, make_flow_state(spec, cfg, noise, std::move(init), xi)};
  out.trace = run_flow(out.state, spec, cfg, noise, xi, opts);
  return out;
}

}  // namespace mfld
