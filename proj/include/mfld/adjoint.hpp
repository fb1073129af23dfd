#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mfld/forward.hpp"

namespace mfld {

// Y[j][k] in R^d and Z[j][k] in R^{d x noise_dim} (row-major), k = 0..K.
struct AdjointBundle {
  TimeGrid grid;
  std::size_t outer_count = 0;
  std::size_t state_dim = 1;
  std::size_t noise_dim = 1;
  std::vector<double> Y;
  std::vector<double> Z;
  // Time slices where the regression design was rank deficient and only the
  // ridge term made it solvable (k = 0 always qualifies: X_0 = xi on every path).
  std::vector<std::size_t> ridge_fallback_slices;

  std::size_t index(std::size_t j, std::size_t k) const { return j * (grid.steps + 1) + k; }
  ConstVec y(std::size_t j, std::size_t k) const {
    return ConstVec(Y).subspan(index(j, k) * state_dim, state_dim);
  }
  OutVec y(std::size_t j, std::size_t k) { return OutVec(Y).subspan(index(j, k) * state_dim, state_dim); }
  ConstVec z(std::size_t j, std::size_t k) const {
    return ConstVec(Z).subspan(index(j, k) * state_dim * noise_dim, state_dim * noise_dim);
  }
  OutVec z(std::size_t j, std::size_t k) {
    return OutVec(Z).subspan(index(j, k) * state_dim * noise_dim, state_dim * noise_dim);
  }
};

inline AdjointBundle make_adjoint(const TimeGrid& grid, std::size_t m, std::size_t d, std::size_t w) {
  AdjointBundle ab{grid, m, d, w, {}, {}, {}};
  ab.Y.assign(m * (grid.steps + 1) * d, 0.0);
  ab.Z.assign(m * (grid.steps + 1) * d * w, 0.0);
  return ab;
}

inline constexpr int kRegressionDegree = 3;
inline constexpr double kRegressionRidge = 1e-8;

namespace detail {

// Exponent tuples of all monomials in d variables with total degree <= deg.
inline std::vector<std::vector<int>> monomials(std::size_t d, int deg) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(d, 0);
  auto rec = [&](auto&& self, std::size_t var, int left) -> void {
    if (var == d) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[var] = e;
      self(self, var + 1, left - e);
    }
    cur[var] = 0;
  };
  rec(rec, 0, deg);
  return out;
}

// Least squares on standardised polynomial features of X_k with a small
// ridge. The products of those features with the increments dW_k enter the
// design as control variates: they are orthogonal to every function of X_k,
// so they leave the conditional expectation unchanged while absorbing the
// martingale part Z dW of the target. Returns the fitted values of the
// X_k part only (rows = paths, cols = targets).
inline Eigen::MatrixXd regress_on_state(const TrajectoryBundle& tb, const BrownianBundle& noise, std::size_t k,
                                        const std::vector<std::vector<int>>& basis,
                                        const Eigen::MatrixXd& targets, bool& rank_deficient) {
  const std::size_t m = tb.outer_count, d = tb.state_dim, nb = basis.size(), w = noise.noise_dim;
  const std::size_t cols = nb * (1 + w);
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < d; ++c) mean[c] += tb.at(j, k)[c];
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t c = 0; c < d; ++c) {
      const double e = tb.at(j, k)[c] - mean[c];
      sd[c] += e * e;
    }
  for (std::size_t c = 0; c < d; ++c) {
    sd[c] = std::sqrt(sd[c] / static_cast<double>(m));
    if (sd[c] <= 1e-12 * (1.0 + std::abs(mean[c]))) sd[c] = 0.0;
  }

  Eigen::MatrixXd A(m, cols);
  std::vector<double> z(d);
  const double inv_sqrt_dt = 1.0 / std::sqrt(tb.grid.dt());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t c = 0; c < d; ++c) z[c] = sd[c] > 0.0 ? (tb.at(j, k)[c] - mean[c]) / sd[c] : 0.0;
    const auto row = static_cast<Eigen::Index>(j);
    const double* dw = noise.at(j, k);
    for (std::size_t b = 0; b < nb; ++b) {
      double v = 1.0;
      for (std::size_t c = 0; c < d; ++c)
        for (int e = 0; e < basis[b][c]; ++e) v *= z[c];
      A(row, static_cast<Eigen::Index>(b)) = v;
      for (std::size_t l = 0; l < w; ++l)
        A(row, static_cast<Eigen::Index>(nb * (1 + l) + b)) = v * dw[l] * inv_sqrt_dt;
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  const auto x_part = A.leftCols(static_cast<Eigen::Index>(nb));
  const Eigen::MatrixXd x_gram = (x_part.transpose() * x_part) * inv_m;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x_gram, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  rank_deficient = ev.minCoeff() <= 1e-10 * std::max(ev.maxCoeff(), 1e-300);
  Eigen::MatrixXd gram = (A.transpose() * A) * inv_m;
  gram.diagonal().array() += kRegressionRidge;
  const Eigen::MatrixXd coef = gram.ldlt().solve((A.transpose() * targets) * inv_m);
  return x_part * coef.topRows(static_cast<Eigen::Index>(nb));
}

}  // namespace detail

// Least-squares Monte Carlo solution of the adjoint equation
//   dY = -(grad_x Phi^T Y + grad_x F) dt + Z dW,  Y_T = grad_x g(X_T),
// backward in k with one explicit step per slice: first E[Y_{k+1} | X_k] by
// regression, then the driver at that conditional mean. Z_k is the
// regression of Y_{k+1} dW_k^T on X_k, divided by dt.
template <ControlSource Source>
AdjointBundle solve_adjoint_regression(const ProblemSpec& spec, const TrajectoryBundle& tb,
                                       const Source& source, const BrownianBundle& noise) {
  require_constant_diffusion(spec, "adjoint");
  const std::size_t m = tb.outer_count, kk = tb.grid.steps, d = spec.state_dim, w = spec.noise_dim;
  const auto basis = detail::monomials(d, kRegressionDegree);
  require(m >= 10 * basis.size(), "adjoint: need at least 10 outer paths per basis function (M >= " +
                                      std::to_string(10 * basis.size()) + ")");
  require(noise.outer_count == m && noise.grid.steps == kk && noise.noise_dim == w,
          "adjoint: noise shape mismatch");
  const double dt = tb.grid.dt();
  auto ab = make_adjoint(tb.grid, m, d, w);

  for (std::size_t j = 0; j < m; ++j) spec.grad_x_terminal(tb.at(j, kk), ab.y(j, kk));

  Eigen::MatrixXd targets(m, d + d * w);
  std::vector<double> jac(d * d), fx(d);
  EmpiricalCloud scratch;
  for (std::size_t k = kk; k-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto y1 = ab.y(j, k + 1);
      const double* dw = noise.at(j, k);
      const auto row = static_cast<Eigen::Index>(j);
      for (std::size_t r = 0; r < d; ++r) {
        targets(row, static_cast<Eigen::Index>(r)) = y1[r];
        for (std::size_t l = 0; l < w; ++l)
          targets(row, static_cast<Eigen::Index>(d + r * w + l)) = y1[r] * dw[l];
      }
    }
    bool deficient = false;
    const Eigen::MatrixXd fit = detail::regress_on_state(tb, noise, k, basis, targets, deficient);
    if (deficient) ab.ridge_fallback_slices.push_back(k);

    const double t = tb.grid.node(k);
    for (std::size_t j = 0; j < m; ++j) {
      const auto x = tb.at(j, k);
      const CloudView cl = source.cloud_at(j, k, x, scratch);
      spec.grad_x_drift(t, x, cl, jac);
      spec.grad_x_cost(t, x, cl, fx);
      const auto row = static_cast<Eigen::Index>(j);
      auto y = ab.y(j, k);
      for (std::size_t c = 0; c < d; ++c) {
        double driver = fx[c];
        for (std::size_t r = 0; r < d; ++r) driver += jac[r * d + c] * fit(row, static_cast<Eigen::Index>(r));
        y[c] = fit(row, static_cast<Eigen::Index>(c)) + driver * dt;
        if (!std::isfinite(y[c]))
          throw NumericalError("adjoint: non-finite Y at j=" + std::to_string(j) + " k=" + std::to_string(k));
      }
      auto z = ab.z(j, k);
      for (std::size_t e = 0; e < d * w; ++e) z[e] = fit(row, static_cast<Eigen::Index>(d + e)) / dt;
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto src = ab.z(j, kk - 1);
    auto dst = ab.z(j, kk);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return ab;
}

inline AdjointBundle solve_adjoint_regression(const ProblemSpec& spec, const TrajectoryBundle& tb,
                                              const ParticleControl& control, const BrownianBundle& noise) {
  return solve_adjoint_regression(spec, tb, FixedControl{control}, noise);
}

// RK4 substeps per grid interval in the Riccati oracle.
inline constexpr int kRiccatiSubsteps = 4;

// Backward RK4 for P' = -2 b P - q_run, P_T = g_term_quad on the grid nodes.
inline std::vector<double> riccati_gain(const LqParams& prm, const TimeGrid& grid) {
  const double h = grid.dt() / kRiccatiSubsteps;
  std::vector<double> P(grid.steps + 1);
  P[grid.steps] = prm.g_term_quad;
  // In reversed time tau = T - t the equation reads dP/dtau = 2 b P + q.
  auto f = [&](double v) { return 2.0 * prm.b * v + prm.q_run; };
  double v = prm.g_term_quad;
  for (std::size_t k = grid.steps; k-- > 0;) {
    for (int sub = 0; sub < kRiccatiSubsteps; ++sub) {
      const double k1 = f(v), k2 = f(v + 0.5 * h * k1), k3 = f(v + 0.5 * h * k2), k4 = f(v + h * k3);
      v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    P[k] = v;
  }
  return P;
}

// Closed-form adjoint of the scalar LQ problem: Y = P_t X + p_t with
//   P' = -2 b P - q_run,             P_T = g_term_quad,
//   p' = -b p - P c mean(nu_t),      p_T = g_term_lin,
// integrated jointly by RK4 per outer path (mean(nu_t) is piecewise constant
// on the grid, four substeps per interval); Z = P_t Gamma.
template <ControlSource Source>
AdjointBundle solve_adjoint_riccati(const LqParams& prm, const TrajectoryBundle& tb, const Source& source) {
  require(tb.state_dim == 1 && source.action_dim() == 1, "riccati: scalar LQ problems only");
  require(source.outer_count() == tb.outer_count && source.steps() == tb.grid.steps,
          "riccati: control shape mismatch");
  const std::size_t m = tb.outer_count, kk = tb.grid.steps;
  const double h = tb.grid.dt() / kRiccatiSubsteps;
  auto ab = make_adjoint(tb.grid, m, 1, 1);
  using State = std::array<double, 2>;
  EmpiricalCloud scratch;
  for (std::size_t j = 0; j < m; ++j) {
    State s{prm.g_term_quad, prm.g_term_lin};
    ab.y(j, kk)[0] = s[0] * tb.at(j, kk)[0] + s[1];
    ab.z(j, kk)[0] = s[0] * prm.gamma_const;
    for (std::size_t k = kk; k-- > 0;) {
      const double mean = source.cloud_at(j, k, tb.at(j, k), scratch).mean(0);
      auto f = [&](const State& v) -> State {
        return {2.0 * prm.b * v[0] + prm.q_run, prm.b * v[1] + v[0] * prm.c * mean};
      };
      auto axpy = [](const State& v, double a, const State& dv) -> State {
        return {v[0] + a * dv[0], v[1] + a * dv[1]};
      };
      for (int sub = 0; sub < kRiccatiSubsteps; ++sub) {
        const State k1 = f(s), k2 = f(axpy(s, 0.5 * h, k1)), k3 = f(axpy(s, 0.5 * h, k2)),
                    k4 = f(axpy(s, h, k3));
        for (int c = 0; c < 2; ++c) s[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
      }
      ab.y(j, k)[0] = s[0] * tb.at(j, k)[0] + s[1];
      ab.z(j, k)[0] = s[0] * prm.gamma_const;
    }
  }
  return ab;
}

inline AdjointBundle solve_adjoint_riccati(const ProblemSpec& spec, const TrajectoryBundle& tb,
                                           const ParticleControl& control) {
  if (!spec.lq) throw ConfigError("riccati: problem is not a linear-quadratic instance");
  return solve_adjoint_riccati(*spec.lq, tb, FixedControl{control});
}

enum class AdjointMode { riccati, regression };

inline AdjointBundle solve_adjoint(const ProblemSpec& spec, AdjointMode mode, const TrajectoryBundle& tb,
                                   const ParticleControl& control, const BrownianBundle& noise) {
  if (mode == AdjointMode::riccati) return solve_adjoint_riccati(spec, tb, control);
  return solve_adjoint_regression(spec, tb, control, noise);
}

}  // namespace mfld
