#pragma once

#include <cmath>

#include "mfld/problem.hpp"

namespace mfld {

namespace detail {

// No range checks: lets tests build deliberately unstable instances.
inline ProblemSpec build_lq_problem_unchecked(const LqParams& prm) {
  ProblemSpec s;
  s.name = "lq";
  s.state_dim = s.action_dim = s.noise_dim = 1;
  s.diffusion = {prm.gamma_const};
  s.lq = prm;

  s.drift = [prm](double, ConstVec x, const CloudView& m, OutVec out) {
    out[0] = prm.b * x[0] + prm.c * m.mean(0);
  };
  s.running_cost = [prm](double, ConstVec x, const CloudView& m) {
    return 0.5 * prm.q_run * x[0] * x[0] + 0.5 * prm.r_run * m.second_moment();
  };
  s.terminal_cost = [prm](ConstVec x) {
    return 0.5 * prm.g_term_quad * x[0] * x[0] + prm.g_term_lin * x[0];
  };
  s.prior_potential = gaussian_prior_potential;
  s.prior_grad = gaussian_prior_grad;
  s.prior_grad_cloud = gaussian_prior_grad_cloud;

  s.grad_x_drift = [prm](double, ConstVec, const CloudView&, OutVec out) { out[0] = prm.b; };
  s.grad_x_cost = [prm](double, ConstVec x, const CloudView&, OutVec out) {
    out[0] = prm.q_run * x[0];
  };
  s.grad_x_terminal = [prm](ConstVec x, OutVec out) {
    out[0] = prm.g_term_quad * x[0] + prm.g_term_lin;
  };

  s.flat_drift = [prm](double, ConstVec, const CloudView& m, ConstVec a, OutVec out) {
    out[0] = prm.c * (a[0] - m.mean(0));
  };
  s.flat_cost = [prm](double, ConstVec, const CloudView& m, ConstVec a) {
    return 0.5 * prm.r_run * (a[0] * a[0] - m.second_moment());
  };
  s.flat_drift_agrad = [prm](double, ConstVec, const CloudView&, ConstVec, OutVec out) {
    out[0] = prm.c;
  };
  s.flat_cost_agrad = [prm](double, ConstVec, const CloudView&, ConstVec a, OutVec out) {
    out[0] = prm.r_run * a[0];
  };
  s.hamiltonian_agrad_cloud = [prm](double, ConstVec, ConstVec y, const CloudView& m, OutVec out) {
    const double shift = prm.c * y[0];
    const ConstVec pts = m.data();
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = shift + prm.r_run * pts[i];
  };
  s.hamiltonian_flat_points = [prm](double, ConstVec, ConstVec y, const CloudView& m, ConstVec points,
                                    OutVec out) {
    const double mean = m.mean(0), second = m.second_moment();
    for (std::size_t l = 0; l < points.size(); ++l) {
      const double a = points[l];
      out[l] = prm.c * (a - mean) * y[0] + 0.5 * prm.r_run * (a * a - second);
    }
  };
  return s;
}

}  // namespace detail

inline void validate(const LqParams& prm) {
  require(std::isfinite(prm.b) && std::isfinite(prm.c) && std::isfinite(prm.q_run) &&
              std::isfinite(prm.g_term_quad) && std::isfinite(prm.g_term_lin),
          "lq: parameters must be finite");
  require(prm.r_run > 0.0, "lq: r_run must be > 0");
  require(prm.gamma_const > 0.0, "lq: gamma_const must be > 0");
  require(prm.q_run >= 0.0, "lq: q_run must be >= 0");
  require(prm.g_term_quad >= 0.0, "lq: g_term_quad must be >= 0");
}

inline ProblemSpec build_lq_problem(const LqParams& prm) {
  validate(prm);
  return detail::build_lq_problem_unchecked(prm);
}

}  // namespace mfld
