#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mfld/cloud.hpp"
#include "mfld/errors.hpp"

namespace mfld {

// Scalar linear-quadratic instance (d = p = 1):
//   drift   b x + c E_m[a]
//   cost    (q_run/2) x^2 + (r_run/2) E_m[a^2]
//   terminal (g_term_quad/2) x^2 + g_term_lin x
//   prior   standard Gaussian
struct LqParams {
  double b = 0.0;
  double c = 1.0;
  double q_run = 0.0;
  double r_run = 1.0;
  double g_term_quad = 0.0;
  double g_term_lin = 1.0;
  double gamma_const = 1.0;
};

// Coefficients of the relaxed control problem and their derivatives.
//
// Shapes: x in R^d, a in R^p, W in R^noise_dim. Matrices are row-major:
// grad_x_drift is d x d with entry (r, c) = dPhi_r/dx_c; flat_drift_agrad is
// d x p with entry (r, c) = d/da_c (dPhi_r/dm). Flat derivatives are
// centered: their integral against m is zero.
//
// Immutable after construction; safe to share read-only across threads.
struct ProblemSpec {
  using VecField = std::function<void(double t, ConstVec x, const CloudView& m, OutVec out)>;
  using ScalarField = std::function<double(double t, ConstVec x, const CloudView& m)>;
  using FlatVec = std::function<void(double t, ConstVec x, const CloudView& m, ConstVec a, OutVec out)>;
  using FlatScalar = std::function<double(double t, ConstVec x, const CloudView& m, ConstVec a)>;
  using CloudGradient =
      std::function<void(double t, ConstVec x, ConstVec y, const CloudView& m, OutVec out)>;

  std::string name;
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::size_t noise_dim = 1;

  // Constant d x noise_dim diffusion.
  std::vector<double> diffusion;
  // Optional state/measure dependent diffusion. Forward simulation honours
  // it; the adjoint and Langevin solvers reject problems that set it.
  std::function<void(double t, ConstVec x, const CloudView& m, OutVec out)> state_diffusion;

  VecField drift;
  ScalarField running_cost;
  std::function<double(ConstVec x)> terminal_cost;
  std::function<double(ConstVec a)> prior_potential;
  std::function<void(ConstVec a, OutVec out)> prior_grad;
  // Optional fast path: prior_grad applied to every row of an N x p block.
  std::function<void(ConstVec points, OutVec out)> prior_grad_cloud;

  VecField grad_x_drift;
  VecField grad_x_cost;
  std::function<void(ConstVec x, OutVec out)> grad_x_terminal;

  FlatVec flat_drift;
  FlatScalar flat_cost;
  FlatVec flat_drift_agrad;
  FlatVec flat_cost_agrad;

  // Optional fast path: grad_a dH0/dm evaluated at every point of m at once
  // (out is N x p). When empty the solvers loop over the per-point callables.
  CloudGradient hamiltonian_agrad_cloud;
  // Optional fast path: dH0/dm(x, y, m, a_l) for each row a_l of `points`
  // (n x p), written to out (n). Measure summaries are computed once.
  std::function<void(double t, ConstVec x, ConstVec y, const CloudView& m, ConstVec points, OutVec out)>
      hamiltonian_flat_points;

  // Present only for problems built by build_lq_problem.
  std::optional<LqParams> lq;

  bool has_constant_diffusion() const { return !state_diffusion; }
};

// Standard Gaussian prior potential normalised so that exp(-U) is a density.
inline double gaussian_prior_potential(ConstVec a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return 0.5 * s + 0.5 * static_cast<double>(a.size()) * std::log(2.0 * std::numbers::pi);
}

inline void gaussian_prior_grad(ConstVec a, OutVec out) {
  for (std::size_t c = 0; c < a.size(); ++c) out[c] = a[c];
}

inline void gaussian_prior_grad_cloud(ConstVec points, OutVec out) {
  std::copy(points.begin(), points.end(), out.begin());
}

inline void validate(const ProblemSpec& spec) {
  require(spec.state_dim > 0 && spec.action_dim > 0 && spec.noise_dim > 0,
          "problem: dimensions must be positive");
  require(spec.diffusion.size() == spec.state_dim * spec.noise_dim,
          "problem: diffusion must be a d x noise_dim matrix");
  require(all_finite(spec.diffusion), "problem: diffusion has non-finite entries");
  require(spec.drift && spec.running_cost && spec.terminal_cost && spec.prior_potential &&
              spec.prior_grad && spec.grad_x_drift && spec.grad_x_cost && spec.grad_x_terminal &&
              spec.flat_drift && spec.flat_cost && spec.flat_drift_agrad && spec.flat_cost_agrad,
          "problem: missing coefficient callable");
}

inline void require_constant_diffusion(const ProblemSpec& spec, const char* who) {
  if (!spec.has_constant_diffusion())
    throw ConfigError(std::string(who) + ": requires a constant diffusion coefficient");
}

}  // namespace mfld
