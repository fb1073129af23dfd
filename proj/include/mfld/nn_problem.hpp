#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "mfld/problem.hpp"

namespace mfld {

// Activation phi(x; theta) : R^d x R^p -> R^out_dim of a mean-field single
// layer network alpha(x) = int phi(x; theta) m(dtheta).
struct Activation {
  std::size_t state_dim = 1;
  std::size_t param_dim = 1;
  std::size_t out_dim = 1;
  bool differentiable = true;
  std::function<void(ConstVec x, ConstVec theta, OutVec out)> value;       // out_dim
  std::function<void(ConstVec x, ConstVec theta, OutVec out)> grad_theta;  // out_dim x p
  std::function<void(ConstVec x, ConstVec theta, OutVec out)> grad_x;      // out_dim x d
};

// Base (non-relaxed) control problem  dX = b(X, alpha) dt + Gamma dW,  cost f(X, alpha), g(X).
struct NnPolicyParts {
  std::size_t state_dim = 1;
  std::size_t policy_dim = 1;
  std::function<void(ConstVec x, ConstVec alpha, OutVec out)> base_drift;         // d
  std::function<void(ConstVec x, ConstVec alpha, OutVec out)> base_drift_dx;      // d x d
  std::function<void(ConstVec x, ConstVec alpha, OutVec out)> base_drift_dalpha;  // d x policy_dim
  std::function<double(ConstVec x, ConstVec alpha)> base_cost;
  std::function<void(ConstVec x, ConstVec alpha, OutVec out)> base_cost_dx;      // d
  std::function<void(ConstVec x, ConstVec alpha, OutVec out)> base_cost_dalpha;  // policy_dim
  std::function<double(ConstVec x)> terminal;
  std::function<void(ConstVec x, OutVec out)> terminal_grad;
};

inline Activation linear_activation(std::size_t state_dim, std::size_t param_dim) {
  Activation act;
  act.state_dim = state_dim;
  act.param_dim = act.out_dim = param_dim;
  act.value = [](ConstVec, ConstVec th, OutVec out) {
    for (std::size_t c = 0; c < th.size(); ++c) out[c] = th[c];
  };
  act.grad_theta = [param_dim](ConstVec, ConstVec, OutVec out) {
    for (std::size_t r = 0; r < param_dim; ++r)
      for (std::size_t c = 0; c < param_dim; ++c) out[r * param_dim + c] = r == c ? 1.0 : 0.0;
  };
  act.grad_x = [](ConstVec, ConstVec, OutVec out) {
    for (double& v : out) v = 0.0;
  };
  return act;
}

// tanh(w . x + bias) with theta = (w, bias) in R^{d+1}.
inline Activation tanh_activation(std::size_t state_dim) {
  Activation act;
  act.state_dim = state_dim;
  act.param_dim = state_dim + 1;
  act.out_dim = 1;
  auto pre = [state_dim](ConstVec x, ConstVec th) {
    double z = th[state_dim];
    for (std::size_t c = 0; c < state_dim; ++c) z += th[c] * x[c];
    return z;
  };
  act.value = [pre](ConstVec x, ConstVec th, OutVec out) { out[0] = std::tanh(pre(x, th)); };
  act.grad_theta = [pre, state_dim](ConstVec x, ConstVec th, OutVec out) {
    const double t = std::tanh(pre(x, th));
    const double slope = 1.0 - t * t;
    for (std::size_t c = 0; c < state_dim; ++c) out[c] = slope * x[c];
    out[state_dim] = slope;
  };
  act.grad_x = [pre, state_dim](ConstVec x, ConstVec th, OutVec out) {
    const double t = std::tanh(pre(x, th));
    const double slope = 1.0 - t * t;
    for (std::size_t c = 0; c < state_dim; ++c) out[c] = slope * th[c];
  };
  return act;
}

// max(0, w . x + bias); not differentiable at the kink, so the builder refuses it.
inline Activation relu_activation(std::size_t state_dim) {
  Activation act;
  act.state_dim = state_dim;
  act.param_dim = state_dim + 1;
  act.out_dim = 1;
  act.differentiable = false;
  act.value = [state_dim](ConstVec x, ConstVec th, OutVec out) {
    double z = th[state_dim];
    for (std::size_t c = 0; c < state_dim; ++c) z += th[c] * x[c];
    out[0] = z > 0.0 ? z : 0.0;
  };
  return act;
}

namespace detail {

// Per-(x, m) quantities shared by every flat-derivative evaluation.
struct NnContext {
  std::vector<double> alpha;     // int phi dm            (a)
  std::vector<double> dalpha_x;  // int grad_x phi dm     (a x d)
  std::vector<double> b_alpha;   // d_alpha b(x, alpha)   (d x a)
  std::vector<double> f_alpha;   // d_alpha f(x, alpha)   (a)
};

struct NnModel {
  NnPolicyParts parts;
  Activation act;

  std::size_t d() const { return parts.state_dim; }
  std::size_t a() const { return act.out_dim; }
  std::size_t p() const { return act.param_dim; }

  void mean_activation(ConstVec x, const CloudView& m, std::vector<double>& alpha,
                       std::vector<double>* dalpha_x) const {
    alpha.assign(a(), 0.0);
    std::vector<double> phi(a());
    std::vector<double> gx(dalpha_x ? a() * d() : 0);
    if (dalpha_x) dalpha_x->assign(a() * d(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double w = m.weight(i);
      act.value(x, m.point(i), phi);
      for (std::size_t r = 0; r < a(); ++r) alpha[r] += w * phi[r];
      if (dalpha_x) {
        act.grad_x(x, m.point(i), gx);
        for (std::size_t r = 0; r < gx.size(); ++r) (*dalpha_x)[r] += w * gx[r];
      }
    }
  }

  NnContext context(ConstVec x, const CloudView& m) const {
    NnContext ctx;
    mean_activation(x, m, ctx.alpha, nullptr);
    ctx.b_alpha.assign(d() * a(), 0.0);
    ctx.f_alpha.assign(a(), 0.0);
    parts.base_drift_dalpha(x, ctx.alpha, ctx.b_alpha);
    parts.base_cost_dalpha(x, ctx.alpha, ctx.f_alpha);
    return ctx;
  }
};

}  // namespace detail

// Mean-field network policy: Phi(x, m) = b(x, int phi(x; theta) m(dtheta)) and
// likewise for F. Flat derivatives follow from the chain rule, e.g.
//   dPhi/dm(x, m, theta) = d_alpha b(x, alpha(x)) (phi(x; theta) - alpha(x)).
inline ProblemSpec build_nn_policy_problem(const NnPolicyParts& parts, const Activation& act,
                                           std::vector<double> diffusion, std::size_t noise_dim) {
  require(act.differentiable && act.value && act.grad_theta && act.grad_x,
          "nn: activation must be differentiable in theta and x");
  require(parts.base_drift && parts.base_drift_dx && parts.base_drift_dalpha && parts.base_cost &&
              parts.base_cost_dx && parts.base_cost_dalpha && parts.terminal && parts.terminal_grad,
          "nn: base functions and their derivatives are required");
  require(act.state_dim == parts.state_dim, "nn: activation state_dim mismatch");
  require(act.out_dim == parts.policy_dim, "nn: activation out_dim must equal policy_dim");

  auto model = std::make_shared<const detail::NnModel>(detail::NnModel{parts, act});
  const std::size_t d = parts.state_dim, na = act.out_dim, p = act.param_dim;

  ProblemSpec s;
  s.name = "nn";
  s.state_dim = d;
  s.action_dim = p;
  s.noise_dim = noise_dim;
  s.diffusion = std::move(diffusion);
  s.prior_potential = gaussian_prior_potential;
  s.prior_grad = gaussian_prior_grad;
  s.prior_grad_cloud = gaussian_prior_grad_cloud;
  s.terminal_cost = parts.terminal;
  s.grad_x_terminal = parts.terminal_grad;

  s.drift = [model](double, ConstVec x, const CloudView& m, OutVec out) {
    std::vector<double> alpha;
    model->mean_activation(x, m, alpha, nullptr);
    model->parts.base_drift(x, alpha, out);
  };
  s.running_cost = [model](double, ConstVec x, const CloudView& m) {
    std::vector<double> alpha;
    model->mean_activation(x, m, alpha, nullptr);
    return model->parts.base_cost(x, alpha);
  };
  s.grad_x_drift = [model, d, na](double, ConstVec x, const CloudView& m, OutVec out) {
    std::vector<double> alpha, dax;
    model->mean_activation(x, m, alpha, &dax);
    std::vector<double> bx(d * d), ba(d * na);
    model->parts.base_drift_dx(x, alpha, bx);
    model->parts.base_drift_dalpha(x, alpha, ba);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        double v = bx[r * d + c];
        for (std::size_t l = 0; l < na; ++l) v += ba[r * na + l] * dax[l * d + c];
        out[r * d + c] = v;
      }
  };
  s.grad_x_cost = [model, d, na](double, ConstVec x, const CloudView& m, OutVec out) {
    std::vector<double> alpha, dax;
    model->mean_activation(x, m, alpha, &dax);
    std::vector<double> fx(d), fa(na);
    model->parts.base_cost_dx(x, alpha, fx);
    model->parts.base_cost_dalpha(x, alpha, fa);
    for (std::size_t c = 0; c < d; ++c) {
      double v = fx[c];
      for (std::size_t l = 0; l < na; ++l) v += fa[l] * dax[l * d + c];
      out[c] = v;
    }
  };

  s.flat_drift = [model, d, na](double, ConstVec x, const CloudView& m, ConstVec th, OutVec out) {
    const auto ctx = model->context(x, m);
    std::vector<double> phi(na);
    model->act.value(x, th, phi);
    for (std::size_t r = 0; r < d; ++r) {
      double v = 0.0;
      for (std::size_t l = 0; l < na; ++l) v += ctx.b_alpha[r * na + l] * (phi[l] - ctx.alpha[l]);
      out[r] = v;
    }
  };
  s.flat_cost = [model, na](double, ConstVec x, const CloudView& m, ConstVec th) {
    const auto ctx = model->context(x, m);
    std::vector<double> phi(na);
    model->act.value(x, th, phi);
    double v = 0.0;
    for (std::size_t l = 0; l < na; ++l) v += ctx.f_alpha[l] * (phi[l] - ctx.alpha[l]);
    return v;
  };
  s.flat_drift_agrad = [model, d, na, p](double, ConstVec x, const CloudView& m, ConstVec th,
                                         OutVec out) {
    const auto ctx = model->context(x, m);
    std::vector<double> gt(na * p);
    model->act.grad_theta(x, th, gt);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < p; ++c) {
        double v = 0.0;
        for (std::size_t l = 0; l < na; ++l) v += ctx.b_alpha[r * na + l] * gt[l * p + c];
        out[r * p + c] = v;
      }
  };
  s.flat_cost_agrad = [model, na, p](double, ConstVec x, const CloudView& m, ConstVec th,
                                     OutVec out) {
    const auto ctx = model->context(x, m);
    std::vector<double> gt(na * p);
    model->act.grad_theta(x, th, gt);
    for (std::size_t c = 0; c < p; ++c) {
      double v = 0.0;
      for (std::size_t l = 0; l < na; ++l) v += ctx.f_alpha[l] * gt[l * p + c];
      out[c] = v;
    }
  };
  // grad_theta phi^T (d_alpha b^T y + d_alpha f), with the measure integrals done once.
  s.hamiltonian_agrad_cloud = [model, d, na, p](double, ConstVec x, ConstVec y, const CloudView& m,
                                                OutVec out) {
    const auto ctx = model->context(x, m);
    std::vector<double> co(na, 0.0);
    for (std::size_t l = 0; l < na; ++l) {
      double v = ctx.f_alpha[l];
      for (std::size_t r = 0; r < d; ++r) v += ctx.b_alpha[r * na + l] * y[r];
      co[l] = v;
    }
    std::vector<double> gt(na * p);
    for (std::size_t i = 0; i < m.size(); ++i) {
      model->act.grad_theta(x, m.point(i), gt);
      for (std::size_t c = 0; c < p; ++c) {
        double v = 0.0;
        for (std::size_t l = 0; l < na; ++l) v += gt[l * p + c] * co[l];
        out[i * p + c] = v;
      }
    }
  };
  validate(s);
  return s;
}

// One-dimensional network-policy instance: dX = alpha dt + gamma dW with
// running cost (q/2) x^2 + (r/2) alpha^2 and the LQ terminal cost, tanh units.
inline ProblemSpec build_default_nn_problem(const LqParams& prm) {
  NnPolicyParts parts;
  parts.state_dim = 1;
  parts.policy_dim = 1;
  parts.base_drift = [](ConstVec, ConstVec al, OutVec out) { out[0] = al[0]; };
  parts.base_drift_dx = [](ConstVec, ConstVec, OutVec out) { out[0] = 0.0; };
  parts.base_drift_dalpha = [](ConstVec, ConstVec, OutVec out) { out[0] = 1.0; };
  parts.base_cost = [prm](ConstVec x, ConstVec al) {
    return 0.5 * prm.q_run * x[0] * x[0] + 0.5 * prm.r_run * al[0] * al[0];
  };
  parts.base_cost_dx = [prm](ConstVec x, ConstVec, OutVec out) { out[0] = prm.q_run * x[0]; };
  parts.base_cost_dalpha = [prm](ConstVec, ConstVec al, OutVec out) {
    out[0] = prm.r_run * al[0];
  };
  parts.terminal = [prm](ConstVec x) {
    return 0.5 * prm.g_term_quad * x[0] * x[0] + prm.g_term_lin * x[0];
  };
  parts.terminal_grad = [prm](ConstVec x, OutVec out) {
    out[0] = prm.g_term_quad * x[0] + prm.g_term_lin;
  };
  auto s = build_nn_policy_problem(parts, tanh_activation(1), {prm.gamma_const}, 1);
  return s;
}

}  // namespace mfld
