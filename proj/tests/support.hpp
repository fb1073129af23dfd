#pragma once

#include <cstdint>
#include <vector>

#include "mfld/lq_problem.hpp"
#include "mfld/particle_control.hpp"

namespace mfld::testing {

inline LqParams lq(double b, double c, double q, double r, double gq, double gl, double gamma = 1.0) {
  LqParams p;
  p.b = b, p.c = c, p.q_run = q, p.r_run = r, p.g_term_quad = gq, p.g_term_lin = gl, p.gamma_const = gamma;
  return p;
}

// Phi = 0, F = 0, g = 0 with diffusion gamma; standard Gaussian prior.
inline ProblemSpec zero_problem(double gamma = 1.0) {
  return detail::build_lq_problem_unchecked(lq(0, 0, 0, 0, 0, 0, gamma));
}

// The acceptance instance: Y = 1 and Gibbs law N(-2/3, 1/3) at sigma = 1.
inline ProblemSpec frozen_y_problem() { return build_lq_problem(lq(0, 1, 0, 1, 0, 1)); }

inline ParticleControl point_mass_control(const TimeGrid& grid, std::size_t m, std::size_t n, double at) {
  return init_control(point_mass_sampler({at}), grid, m, n, 1);
}

inline std::vector<double> test_normals(std::size_t n, std::uint32_t tag, double mean = 0.0, double sd = 1.0) {
  std::vector<double> z(n);
  CounterRng(31, Stream::test).fill_normals(z, n, tag, 0, 0);
  for (double& v : z) v = mean + sd * v;
  return z;
}

}  // namespace mfld::testing
