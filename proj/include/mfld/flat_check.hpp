#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfld/problem.hpp"

namespace mfld {

struct FlatCheckResult {
  double cost = 0.0;           // |F(m') - F(m) - quadrature|
  std::vector<double> drift;   // same per drift coordinate
  double worst() const {
    double w = cost;
    for (double v : drift) w = std::max(w, v);
    return w;
  }
};

// Checks the defining identity of a flat derivative,
//   F(m') - F(m) = int_0^1 int dF/dm(m + l (m' - m), a) (m' - m)(da) dl,
// for the running cost and each drift coordinate, using the midpoint rule in l.
// The interpolated measure is represented exactly as a weighted union.
inline FlatCheckResult check_flat_derivative(const ProblemSpec& spec, const CloudView& m,
                                             const CloudView& m_prime, double t, ConstVec x,
                                             int n_lambda) {
  require(m.size() > 0 && m.size() == m_prime.size(), "flat check: clouds must have equal size");
  require(m.dim() == spec.action_dim && m_prime.dim() == spec.action_dim,
          "flat check: cloud dimension mismatch");
  require(n_lambda >= 1, "flat check: n_lambda must be >= 1");
  const std::size_t n = m.size(), p = spec.action_dim, d = spec.state_dim;

  std::vector<double> pts(2 * n * p);
  std::copy(m.data().begin(), m.data().end(), pts.begin());
  std::copy(m_prime.data().begin(), m_prime.data().end(), pts.begin() + static_cast<long>(n * p));
  std::vector<double> w(2 * n);

  std::vector<double> drift_m(d), drift_mp(d), fd(d);
  spec.drift(t, x, m, drift_m);
  spec.drift(t, x, m_prime, drift_mp);
  const double cost_lhs = spec.running_cost(t, x, m_prime) - spec.running_cost(t, x, m);

  double cost_rhs = 0.0;
  std::vector<double> drift_rhs(d, 0.0);
  for (int l = 0; l < n_lambda; ++l) {
    const double lam = (l + 0.5) / n_lambda;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = m.weight(i) * (1.0 - lam);
      w[n + i] = m_prime.weight(i) * lam;
    }
    const CloudView mix(pts, p, w);
    for (std::size_t i = 0; i < n; ++i) {
      cost_rhs += (m_prime.weight(i) * spec.flat_cost(t, x, mix, m_prime.point(i)) -
                   m.weight(i) * spec.flat_cost(t, x, mix, m.point(i))) /
                  n_lambda;
      spec.flat_drift(t, x, mix, m_prime.point(i), fd);
      for (std::size_t r = 0; r < d; ++r) drift_rhs[r] += m_prime.weight(i) * fd[r] / n_lambda;
      spec.flat_drift(t, x, mix, m.point(i), fd);
      for (std::size_t r = 0; r < d; ++r) drift_rhs[r] -= m.weight(i) * fd[r] / n_lambda;
    }
  }

  FlatCheckResult res;
  res.cost = std::abs(cost_lhs - cost_rhs);
  res.drift.resize(d);
  for (std::size_t r = 0; r < d; ++r)
    res.drift[r] = std::abs(drift_mp[r] - drift_m[r] - drift_rhs[r]);
  return res;
}

// Test-only finite-difference estimates of grad_a dF/dm(m, a_i): moving
// particle i by h changes F by approximately w_i * grad_a dF/dm(a_i) * h.
inline std::vector<double> fd_flat_cost_agrad(const ProblemSpec& spec, double t, ConstVec x,
                                              const CloudView& m, std::size_t i, double h = 1e-5) {
  const std::size_t p = m.dim();
  std::vector<double> pts(m.data().begin(), m.data().end());
  std::vector<double> w(m.weights().begin(), m.weights().end());
  std::vector<double> grad(p);
  for (std::size_t c = 0; c < p; ++c) {
    const double orig = pts[i * p + c];
    pts[i * p + c] = orig + h;
    const double up = spec.running_cost(t, x, CloudView(pts, p, w));
    pts[i * p + c] = orig - h;
    const double down = spec.running_cost(t, x, CloudView(pts, p, w));
    pts[i * p + c] = orig;
    grad[c] = (up - down) / (2.0 * h * m.weight(i));
  }
  return grad;
}

// d x p matrix, same construction applied to each drift coordinate.
inline std::vector<double> fd_flat_drift_agrad(const ProblemSpec& spec, double t, ConstVec x,
                                               const CloudView& m, std::size_t i, double h = 1e-5) {
  const std::size_t p = m.dim(), d = spec.state_dim;
  std::vector<double> pts(m.data().begin(), m.data().end());
  std::vector<double> w(m.weights().begin(), m.weights().end());
  std::vector<double> up(d), down(d), jac(d * p);
  for (std::size_t c = 0; c < p; ++c) {
    const double orig = pts[i * p + c];
    pts[i * p + c] = orig + h;
    spec.drift(t, x, CloudView(pts, p, w), up);
    pts[i * p + c] = orig - h;
    spec.drift(t, x, CloudView(pts, p, w), down);
    pts[i * p + c] = orig;
    for (std::size_t r = 0; r < d; ++r) jac[r * p + c] = (up[r] - down[r]) / (2.0 * h * m.weight(i));
  }
  return jac;
}

}  // namespace mfld
