#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mfld/flow.hpp"

namespace mfld {

inline constexpr double kRhoFloor = 1e-12;

struct ContractionResult {
  std::vector<double> s;
  std::vector<double> rho;
  double rate = std::numeric_limits<double>::quiet_NaN();  // NaN when fewer than two usable points
  std::size_t fit_points = 0;
};

// Least-squares slope of log rho against s over points with
// rho in [lo, hi_fraction * rho(0)]; returns minus the slope.
inline double fit_log_rate(const std::vector<double>& s, const std::vector<double>& rho, double lo,
                           double hi_fraction, std::size_t* used = nullptr) {
  require(s.size() == rho.size(), "fit_log_rate: length mismatch");
  std::vector<double> xs, ys;
  if (!rho.empty()) {
    const double hi = hi_fraction * rho.front();
    for (std::size_t l = 0; l < s.size(); ++l) {
      if (rho[l] < kRhoFloor) break;
      if (rho[l] >= lo && rho[l] <= hi) {
        xs.push_back(s[l]);
        ys.push_back(std::log(rho[l]));
      }
    }
  }
  if (used) *used = xs.size();
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t l = 0; l < xs.size(); ++l) mx += xs[l], my += ys[l];
  mx /= n, my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t l = 0; l < xs.size(); ++l) {
    sxy += (xs[l] - mx) * (ys[l] - my);
    sxx += (xs[l] - mx) * (xs[l] - mx);
  }
  return -sxy / sxx;
}

// Two flows from init_a and init_b driven by the same outer and inner noise,
// advanced in lockstep; rho_q between them at each probe time (rounded to
// the step grid). The rate is fitted where rho lies in [1e-6, rho(0) / 2].
inline ContractionResult contraction_estimate(const ProblemSpec& spec, const FlowConfig& cfg,
                                              const BrownianBundle& noise, const ParticleControl& init_a,
                                              const ParticleControl& init_b, ConstVec xi,
                                              const std::vector<double>& probe_times) {
  validate(cfg);
  require_same_shape(init_a, init_b);
  std::vector<std::uint64_t> probes;
  for (double t : probe_times) {
    require(t >= 0.0, "contraction: probe times must be >= 0");
    probes.push_back(static_cast<std::uint64_t>(std::llround(t / cfg.ds)));
  }
  std::sort(probes.begin(), probes.end());
  probes.erase(std::unique(probes.begin(), probes.end()), probes.end());

  auto a = make_flow_state(spec, cfg, noise, init_a, xi);
  auto b = make_flow_state(spec, cfg, noise, init_b, xi);
  ContractionResult out;
  for (std::uint64_t target : probes) {
    while (a.step < target) {
      if (a.step % cfg.refresh_stride == 0) {
        refresh(a, spec, cfg, noise, xi);
        refresh(b, spec, cfg, noise, xi);
      }
      langevin_step(a, spec, cfg);
      langevin_step(b, spec, cfg);
    }
    out.s.push_back(a.s());
    out.rho.push_back(rho_q(a.control, b.control));
  }
  out.rate = fit_log_rate(out.s, out.rho, 1e-6, 0.5, &out.fit_points);
  return out;
}

struct MonotonicityReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double max_violation = 0.0;   // worst J_{i+1} - J_i - 2 (se_i + se_{i+1}), floored at 0
  double max_normalized = 0.0;  // worst (J_{i+1} - J_i) / (se_i + se_{i+1}), floored at 0
};

// A pair violates monotonicity if J(s_{i+1}) > J(s_i) + 2 (se_i + se_{i+1}).
inline MonotonicityReport monotonicity_report(const FlowTrace& trace) {
  MonotonicityReport r;
  for (std::size_t l = 0; l + 1 < trace.rows.size(); ++l) {
    const auto& u = trace.rows[l];
    const auto& v = trace.rows[l + 1];
    const double band = u.J_stderr + v.J_stderr;
    const double rise = v.J_sigma - u.J_sigma;
    ++r.pairs;
    if (rise > 2.0 * band) {
      ++r.violations;
      r.max_violation = std::max(r.max_violation, rise - 2.0 * band);
    }
    if (rise > 0.0) {
      const double norm = band > 0.0 ? rise / band : std::numeric_limits<double>::infinity();
      r.max_normalized = std::max(r.max_normalized, norm);
    }
  }
  return r;
}

struct MomentTrace {
  std::vector<double> series;
  double plateau = 0.0;  // max(initial, max over the first 10% of rows)
  bool flagged = false;  // some value exceeds 2 * plateau
};

inline MomentTrace moment_trace(const FlowTrace& trace) {
  MomentTrace out;
  for (const auto& row : trace.rows) out.series.push_back(row.moment_q);
  if (out.series.empty()) return out;
  const std::size_t early =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(out.series.size()))));
  out.plateau = *std::max_element(out.series.begin(), out.series.begin() + static_cast<std::ptrdiff_t>(early));
  for (double v : out.series)
    if (!(v <= 2.0 * out.plateau)) out.flagged = true;
  return out;
}

inline constexpr double kProjectionPrune = 1e-12;

struct ProjectedCloud {
  EmpiricalCloud cloud;  // weighted pooled cloud
  bool fallback = false;  // every kernel weight underflowed; nearest path used
};

// Silverman bandwidth of X at node k, per state coordinate (0 for constant ones).
inline std::vector<double> silverman_state_bandwidth(const TrajectoryBundle& traj, std::size_t k) {
  const std::size_t m = traj.outer_count, d = traj.state_dim;
  const double factor = std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(m)),
                                 1.0 / (static_cast<double>(d) + 4.0));
  std::vector<double> h(d);
  for (std::size_t c = 0; c < d; ++c) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = traj.at(j, k)[c];
      s1 += v, s2 += v * v;
    }
    const double mean = s1 / static_cast<double>(m);
    h[c] = std::sqrt(std::max(0.0, s2 / static_cast<double>(m) - mean * mean)) * factor;
  }
  return h;
}

// nu_hat_k(. | x): the path clouds at node k pooled with Nadaraya-Watson
// weights w_j proportional to exp(-|X_jk - x|^2 / (2 h^2)). A zero bandwidth
// coordinate carries no information and is ignored. Paths whose relative
// weight is below 1e-12 are dropped.
inline ProjectedCloud markov_projection(const ParticleControl& control, const TrajectoryBundle& traj,
                                        std::size_t k, ConstVec x, const std::vector<double>& bandwidth) {
  const std::size_t m = control.outer_count, n = control.particles, p = control.action_dim,
                    d = traj.state_dim;
  require(traj.outer_count == m && traj.grid.steps == control.steps(), "markov_projection: shape mismatch");
  require(k < control.steps(), "markov_projection: node out of range");
  require(x.size() == d && bandwidth.size() == d, "markov_projection: state dimension mismatch");
  std::vector<double> w(m), dist(m);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double e = 0.0, r2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = traj.at(j, k)[c] - x[c];
      r2 += diff * diff;
      if (bandwidth[c] > 0.0) e += diff * diff / (2.0 * bandwidth[c] * bandwidth[c]);
    }
    dist[j] = r2;
    w[j] = std::exp(-e);
    total += w[j];
  }
  ProjectedCloud out;
  out.cloud.dim = p;
  if (!(total > 0.0)) {
    out.fallback = true;
    const auto nearest = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    std::fill(w.begin(), w.end(), 0.0);
    w[nearest] = total = 1.0;
  }
  const double top = *std::max_element(w.begin(), w.end());
  double kept = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    if (w[j] >= kProjectionPrune * top) kept += w[j];
  for (std::size_t j = 0; j < m; ++j) {
    if (w[j] < kProjectionPrune * top) continue;
    const auto cl = control.cloud(j, k);
    const double share = w[j] / kept;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = cl.point(i);
      out.cloud.points.insert(out.cloud.points.end(), a.begin(), a.end());
      out.cloud.weights.push_back(share * cl.weight(i));
    }
  }
  return out;
}

// Feedback control x -> nu_hat_k(. | x) built from a reference control and
// the trajectories it generated. Bandwidths default to Silverman per node.
struct MarkovControl {
  const ParticleControl& control;
  const TrajectoryBundle& traj;
  std::vector<std::vector<double>> bandwidth;  // [k][c]

  MarkovControl(const ParticleControl& c, const TrajectoryBundle& t) : control(c), traj(t) {
    require(c.outer_count >= 32, "markov_projection: need M >= 32");
    for (std::size_t k = 0; k < c.steps(); ++k) bandwidth.push_back(silverman_state_bandwidth(t, k));
  }

  std::size_t outer_count() const { return control.outer_count; }
  std::size_t steps() const { return control.steps(); }
  std::size_t action_dim() const { return control.action_dim; }
  CloudView cloud_at(std::size_t, std::size_t k, ConstVec x, EmpiricalCloud& scratch) const {
    scratch = markov_projection(control, traj, k, x, bandwidth[k]).cloud;
    return scratch.view();
  }
};

}  // namespace mfld
