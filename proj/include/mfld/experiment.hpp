#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfld/config.hpp"
#include "mfld/csv.hpp"
#include "mfld/diagnostics.hpp"
#include "mfld/lq_problem.hpp"
#include "mfld/nn_problem.hpp"

namespace mfld {

// measured must satisfy |measured - target| <= tol (two-sided) or
// measured <= target + tol (upper), with tol already scaled.
struct CheckResult {
  std::string name;
  int criterion = 0;  // acceptance criterion number, 0 for extra run checks
  double measured = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool two_sided = false;
  bool pass = false;
};

inline CheckResult make_check(std::string name, int criterion, double measured, double target, double tol,
                              bool two_sided, double scale) {
  CheckResult c{std::move(name), criterion, measured, target, tol * scale, two_sided, false};
  c.pass = two_sided ? std::abs(measured - target) <= c.tolerance : measured <= target + c.tolerance;
  return c;
}

inline bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

inline void print_checks(std::ostream& os, const std::vector<CheckResult>& checks) {
  os << std::left << std::setw(30) << "check" << std::right << std::setw(16) << "measured" << std::setw(16)
     << "target" << std::setw(14) << "tolerance" << "  result\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(30) << c.name << std::right << std::setw(16) << std::setprecision(6) << c.measured
       << std::setw(16) << c.target << std::setw(14) << c.tolerance << (c.two_sided ? "  +-  " : "  <=  ")
       << (c.pass ? "PASS" : "FAIL") << '\n';
  }
}

inline ProblemSpec build_problem(const ExperimentConfig& cfg) {
  if (cfg.problem == "nn") return build_default_nn_problem(cfg.lq);
  return build_lq_problem(cfg.lq);
}

// Stationary control law of the LQ flow when Y is deterministic and constant
// (b = q_run = g_term_quad = 0, so Y = g_term_lin):
// N(-c Y / (r + sigma^2/2), sigma^2 / (2 r + sigma^2)).
struct GaussianLaw {
  double mean = 0.0;
  double variance = 1.0;
};

inline std::optional<GaussianLaw> lq_gibbs_law(const LqParams& prm, double sigma) {
  if (prm.b != 0.0 || prm.q_run != 0.0 || prm.g_term_quad != 0.0) return std::nullopt;
  const double half_s2 = 0.5 * sigma * sigma;
  return GaussianLaw{-prm.c * prm.g_term_lin / (prm.r_run + half_s2), half_s2 / (prm.r_run + half_s2)};
}

inline std::optional<GaussianLaw> config_gibbs_law(const ExperimentConfig& cfg) {
  if (cfg.problem != "lq") return std::nullopt;
  return lq_gibbs_law(cfg.lq, cfg.sigma);
}

inline ParticleControl initial_control(const ExperimentConfig& cfg, const TimeGrid& grid) {
  auto pc = init_control(prior_sampler(cfg.p), grid, cfg.M, cfg.N, cfg.seed, cfg.q_metric);
  for (double& v : pc.theta) v += cfg.init_shift;
  return pc;
}

inline ParticleControl sample_law_control(const GaussianLaw& law, const TimeGrid& grid, std::size_t m,
                                          std::size_t n, std::uint64_t seed, double q_metric) {
  return init_control(gaussian_sampler({law.mean}, std::sqrt(law.variance)), grid, m, n, seed, q_metric);
}

struct FlowRun {
  ProblemSpec spec;
  BrownianBundle noise;
  FlowTrace trace;
  FlowState state;
  double seconds = 0.0;
};

// The configured flow from prior-sampled particles. When the Gibbs law is
// known in closed form, rho_to_ref measures the distance to a sample of it.
inline FlowRun run_configured_flow(const ExperimentConfig& cfg, const FlowOptions& extra = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  FlowRun run{build_problem(cfg), {}, {}, {}, 0.0};
  const auto grid = make_time_grid(cfg.T, cfg.K);
  run.noise = sample_brownian(cfg.seed, grid, cfg.M, run.spec.noise_dim);
  const auto fcfg = cfg.flow();
  validate(fcfg);
  FlowOptions opts = extra;
  std::optional<ParticleControl> reference;
  if (const auto law = config_gibbs_law(cfg)) {
    reference = sample_law_control(*law, grid, cfg.M, cfg.N, cfg.seed + 1, cfg.q_metric);
    opts.reference = &*reference;
  }
  run.state = make_flow_state(run.spec, fcfg, run.noise, initial_control(cfg, grid), cfg.xi);
  run.trace = run_flow(run.state, run.spec, fcfg, run.noise, cfg.xi, opts);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

// Checks that follow from a flow trace alone (criteria 1, 2, 6, 7).
inline std::vector<CheckResult> flow_checks(const ExperimentConfig& cfg, const FlowTrace& trace) {
  std::vector<CheckResult> out;
  const double sc = cfg.tolerance_scale;
  if (trace.rows.size() < 2) return out;
  const auto& first = trace.rows.front();
  const auto& last = trace.rows.back();
  if (const auto law = config_gibbs_law(cfg)) {
    out.push_back(make_check("gibbs_mean", 1, last.mean, law->mean, 3.0 * last.mean_stderr, true, sc));
    out.push_back(
        make_check("gibbs_variance", 1, last.variance, law->variance, 3.0 * last.variance_stderr, true, sc));
  }
  if (std::isfinite(last.gibbs_residual))
    out.push_back(make_check("gibbs_residual", 1, last.gibbs_residual, 0.0, 0.08, false, sc));
  const auto mono = monotonicity_report(trace);
  out.push_back(make_check("monotone_violation_frac", 2,
                           static_cast<double>(mono.violations) / static_cast<double>(mono.pairs), 0.0, 0.05,
                           false, sc));
  out.push_back(make_check("monotone_max_excess_se", 2, mono.max_normalized, 0.0, 4.0, false, sc));
  const auto mom = moment_trace(trace);
  if (const auto law = config_gibbs_law(cfg); law && cfg.q_metric == 2.0)
    out.push_back(make_check("moment_limit", 6, last.moment_q, law->mean * law->mean + law->variance,
                             3.0 * last.moment_stderr, true, sc));
  double peak = 0.0;
  for (double v : mom.series) peak = std::max(peak, v);
  out.push_back(make_check("moment_peak_over_plateau", 6, peak / mom.plateau, 0.0, 2.0, false, sc));
  if (std::isfinite(first.foc_spread) && std::isfinite(last.foc_spread))
    out.push_back(make_check("foc_final_over_initial", 7, last.foc_spread / first.foc_spread, 0.0, 0.1, false, sc));
  return out;
}

struct ExperimentResult {
  FlowRun run;
  std::vector<CheckResult> checks;
};

inline void write_summary(const ExperimentConfig& cfg, const FlowRun& run, const std::vector<CheckResult>& checks,
                          const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("summary: cannot open " + path + " for writing");
  const auto& last = run.trace.rows.back();
  os << "problem " << cfg.problem << "  T=" << cfg.T << " K=" << cfg.K << " M=" << cfg.M << " N=" << cfg.N
     << " sigma=" << cfg.sigma << " ds=" << cfg.ds << " total_s=" << cfg.total_s << " seed=" << cfg.seed << '\n';
  os << "checkpoints " << run.trace.rows.size() << "  final s=" << format_double(last.s) << '\n';
  os << "J_sigma " << format_double(last.J_sigma) << " +- " << format_double(last.J_stderr) << '\n';
  os << "pooled mean " << format_double(last.mean) << " +- " << format_double(last.mean_stderr) << '\n';
  os << "pooled variance " << format_double(last.variance) << " +- " << format_double(last.variance_stderr) << '\n';
  os << "moment_q " << format_double(last.moment_q) << " +- " << format_double(last.moment_stderr) << '\n';
  os << "foc_spread " << format_double(last.foc_spread) << '\n';
  os << "gibbs_residual " << format_double(last.gibbs_residual) << '\n';
  os << "rho_to_ref " << format_double(last.rho_to_ref) << '\n';
  os << '\n';
  if (checks.empty()) os << "no checks (fewer than two checkpoints)\n";
  else print_checks(os, checks);
  if (!os) throw IoError("summary: write failed for " + path);
}

// Runs the configured flow and writes flow_trace.csv, clouds.csv (final
// control) and summary.txt into out_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
  ExperimentResult res{run_configured_flow(cfg), {}};
  res.checks = flow_checks(cfg, res.run.trace);
  const std::filesystem::path dir(out_dir);
  write_flow_trace(res.run.trace, (dir / "flow_trace.csv").string());
  write_clouds(res.run.state.control, (dir / "clouds.csv").string());
  write_summary(cfg, res.run, res.checks, (dir / "summary.txt").string());
  return res;
}

// ---- acceptance battery -------------------------------------------------

inline bool check_enabled(const ExperimentConfig& cfg, const std::string& name) {
  return cfg.checks.empty() || cfg.checks.count(name) > 0;
}

inline std::vector<double> uniform_draws(std::uint64_t seed, std::uint32_t tag, std::size_t count) {
  const CounterRng rng(seed, Stream::experiment);
  std::vector<double> out;
  for (std::uint32_t block = 0; out.size() < count; ++block)
    for (double u : rng.uniform4(block, tag, 0u, 0u)) out.push_back(u);
  out.resize(count);
  return out;
}

// Synchronously coupled flows from the prior and from the prior shifted by
// +2 under the frozen-Y instance (b = q_run = g_term_quad = 0).
inline ContractionResult run_contraction(const ExperimentConfig& cfg) {
  LqParams prm = cfg.lq;
  prm.b = prm.q_run = prm.g_term_quad = 0.0;
  const auto spec = build_lq_problem(prm);
  const auto grid = make_time_grid(cfg.T, cfg.K);
  const auto noise = sample_brownian(cfg.seed, grid, cfg.M, 1);
  auto fcfg = cfg.flow();
  fcfg.total_s = 4.0;
  auto a = init_control(prior_sampler(1), grid, cfg.M, cfg.N, cfg.seed, cfg.q_metric);
  auto b = a;
  for (double& v : b.theta) v += 2.0;
  std::vector<double> probes;
  for (int l = 0; l <= 40; ++l) probes.push_back(0.1 * l);
  return contraction_estimate(spec, fcfg, noise, a, b, cfg.xi, probes);
}

struct IdentityCase {
  LqParams prm;
  double fd = 0.0, pairing = 0.0, stderr_ = 0.0, allowed = 0.0;
};

// Random LQ instances with Gaussian nu and mu clouds; the finite-difference
// derivative of J^0 against the Hamiltonian pairing, both under CRN.
inline std::vector<IdentityCase> run_derivative_identity(const ExperimentConfig& cfg, std::size_t pairs = 20,
                                                         double eps = 1e-3) {
  const auto grid = make_time_grid(cfg.T, cfg.K);
  const auto noise = sample_brownian(cfg.seed, grid, cfg.M, 1);
  std::vector<IdentityCase> out;
  for (std::size_t l = 0; l < pairs; ++l) {
    const auto u = uniform_draws(cfg.seed, static_cast<std::uint32_t>(l), 12);
    IdentityCase c;
    c.prm.b = -0.3 + 0.6 * u[0];
    c.prm.c = 0.5 + u[1];
    c.prm.q_run = 0.5 * u[2];
    c.prm.r_run = 0.5 + u[3];
    c.prm.g_term_quad = u[4];
    c.prm.g_term_lin = (u[5] < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * u[6]);
    const auto spec = build_lq_problem(c.prm);
    const auto nu = init_control(gaussian_sampler({-1.0 + 2.0 * u[7]}, 0.3 + 0.7 * u[8]), grid, cfg.M, cfg.N,
                                 cfg.seed + 2 * l + 1, cfg.q_metric);
    const auto mu = init_control(gaussian_sampler({-1.0 + 2.0 * u[9]}, 0.3 + 0.7 * u[10]), grid, cfg.M, cfg.N,
                                 cfg.seed + 2 * l + 2, cfg.q_metric);
    const auto fd = directional_derivative_fd(spec, nu, mu, noise, cfg.xi, eps);
    const auto pr = hamiltonian_pairing(spec, nu, mu, noise, cfg.xi, cfg.adjoint_mode);
    c.fd = fd.value;
    c.pairing = pr.value;
    c.stderr_ = paired_stderr(fd, pr);
    c.allowed = std::max(0.05 * std::abs(c.pairing), 3.0 * c.stderr_);
    out.push_back(c);
  }
  return out;
}

struct RegressionFidelity {
  double max_rel_error = 0.0;
  TrajectoryBundle traj;
  AdjointBundle regression;
  AdjointBundle riccati;
};

// Regression adjoint against the Riccati one on b = 0.3, q_run = 0.5,
// g_term_quad = 1 with M = 10^4 paths. The control is the same prior sample
// on every path, so the Riccati solution is exact for each path.
inline RegressionFidelity run_regression_fidelity(const ExperimentConfig& cfg, std::size_t m = 10000) {
  LqParams prm = cfg.lq;
  prm.b = 0.3;
  prm.q_run = 0.5;
  prm.g_term_quad = 1.0;
  const auto spec = build_lq_problem(prm);
  const auto grid = make_time_grid(cfg.T, cfg.K);
  const auto noise = sample_brownian(cfg.seed, grid, m, 1);
  const auto shared = init_control(prior_sampler(1), grid, 1, cfg.N, cfg.seed, cfg.q_metric);
  auto control = make_control(grid, m, cfg.N, 1, cfg.q_metric);
  for (std::size_t j = 0; j < m; ++j)
    std::copy(shared.theta.begin(), shared.theta.end(),
              control.theta.begin() + static_cast<std::ptrdiff_t>(j * shared.theta.size()));
  RegressionFidelity out;
  out.traj = simulate_forward(spec, control, noise, cfg.xi);
  out.regression = solve_adjoint_regression(spec, out.traj, control, noise);
  out.riccati = solve_adjoint_riccati(spec, out.traj, control);
  for (std::size_t k = 0; k <= grid.steps; ++k) {
    double err = 0.0, ref = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      err += std::abs(out.regression.y(j, k)[0] - out.riccati.y(j, k)[0]);
      ref += std::abs(out.riccati.y(j, k)[0]);
    }
    out.max_rel_error = std::max(out.max_rel_error, err / ref);
  }
  return out;
}

// KDE entropy of N(-2/3, 1/3) relative to the standard Gaussian prior.
inline double run_entropy_calibration(std::uint64_t seed, std::size_t n = 4096) {
  const CounterRng rng(seed, Stream::experiment);
  std::vector<double> pts(n);
  rng.fill_normals(pts, n, 0xE7u, 0u, 0u);
  for (double& v : pts) v = -2.0 / 3.0 + std::sqrt(1.0 / 3.0) * v;
  return entropy_estimate(CloudView(pts, 1), gaussian_prior_potential);
}

inline bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

// Repeats a short flow and the regression dump with the same seed and
// compares the CSV bytes. Returns the number of differing files.
inline int run_determinism(const ExperimentConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  ExperimentConfig small = cfg;
  small.total_s = std::min(cfg.total_s, 0.2);
  small.checkpoint_stride = 50;
  int differing = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const std::string tag = std::to_string(rep);
    const auto run = run_configured_flow(small);
    write_flow_trace(run.trace, dir + "/flow_trace_" + tag + ".csv");
    write_clouds(run.state.control, dir + "/clouds_" + tag + ".csv");
    const auto fid = run_regression_fidelity(cfg, 2000);
    write_paths(fid.traj, fid.regression, dir + "/paths_" + tag + ".csv");
    std::ofstream(dir + "/fidelity_" + tag + ".csv", std::ios::binary)
        << "max_rel_error\n" << format_double(fid.max_rel_error) << '\n';
  }
  for (const char* name : {"flow_trace", "clouds", "paths", "fidelity"})
    if (!files_identical(dir + "/" + name + "_0.csv", dir + "/" + name + "_1.csv")) ++differing;
  return differing;
}

// The LQ acceptance battery. Artifacts land in out_dir when it is non-empty.
inline std::vector<CheckResult> verify_lq(const ExperimentConfig& cfg, const std::string& out_dir = {},
                                          std::ostream* log = nullptr) {
  require(cfg.problem == "lq", "verify-lq: needs problem = lq");
  require(config_gibbs_law(cfg).has_value(),
          "verify-lq: the Gibbs oracle needs b = 0, q_run = 0 and g_term_quad = 0");
  const double sc = cfg.tolerance_scale;
  std::vector<CheckResult> out;
  const std::filesystem::path dir = out_dir.empty()
                                        ? std::filesystem::temp_directory_path() / ("mfld_verify_" + std::to_string(cfg.seed))
                                        : std::filesystem::path(out_dir);
  std::filesystem::create_directories(dir);
  auto note = [&](const std::string& what, double seconds) {
    if (log) *log << what << " done in " << std::fixed << std::setprecision(1) << seconds << " s\n" << std::defaultfloat;
  };
  auto timed = [](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (check_enabled(cfg, "flow")) {
    const auto run = run_configured_flow(cfg);
    note("acceptance flow", run.seconds);
    write_flow_trace(run.trace, (dir / "flow_trace.csv").string());
    write_clouds(run.state.control, (dir / "clouds.csv").string());
    for (auto& c : flow_checks(cfg, run.trace)) out.push_back(std::move(c));
    out.push_back(make_check("flow_runtime_s", 1, run.seconds, 0.0, 120.0, false, 1.0));
  }
  if (check_enabled(cfg, "contraction")) {
    ContractionResult con;
    const double secs = timed([&] { con = run_contraction(cfg); });
    note("contraction", secs);
    write_contraction(con, (dir / "contraction.csv").string());
    double at2 = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t l = 0; l < con.s.size(); ++l)
      if (std::abs(con.s[l] - 2.0) < 1e-9) at2 = con.rho[l];
    out.push_back(make_check("contraction_rate", 3, con.rate, 1.5, 0.225, true, sc));
    out.push_back(make_check("contraction_ratio_s2", 3, at2 / con.rho.front(), 0.0, 0.1, false, sc));
    out.push_back(make_check("contraction_runtime_s", 3, secs, 0.0, 120.0, false, 1.0));
  }
  if (check_enabled(cfg, "identity")) {
    std::vector<IdentityCase> cases;
    const double secs = timed([&] { cases = run_derivative_identity(cfg); });
    note("derivative identity", secs);
    double worst = 0.0;
    for (const auto& c : cases) worst = std::max(worst, std::abs(c.fd - c.pairing) / c.allowed);
    out.push_back(make_check("identity_worst_over_allowed", 4, worst, 0.0, 1.0, false, sc));
    out.push_back(make_check("identity_runtime_s", 4, secs, 0.0, 180.0, false, 1.0));
  }
  if (check_enabled(cfg, "regression")) {
    RegressionFidelity fid;
    const double secs = timed([&] { fid = run_regression_fidelity(cfg); });
    note("regression fidelity", secs);
    out.push_back(make_check("bsde_max_rel_error", 5, fid.max_rel_error, 0.0, 0.02, false, sc));
    out.push_back(make_check("bsde_runtime_s", 5, secs, 0.0, 60.0, false, 1.0));
  }
  if (check_enabled(cfg, "entropy")) {
    const double ent = run_entropy_calibration(cfg.seed);
    const double exact = 0.5 * (1.0 / 3.0 + 4.0 / 9.0 - 1.0 + std::log(3.0));
    out.push_back(make_check("entropy_kde", 8, ent, exact, 0.05, true, sc));
  }
  if (check_enabled(cfg, "determinism")) {
    int differing = 0;
    const double secs = timed([&] { differing = run_determinism(cfg, (dir / "determinism").string()); });
    note("determinism", secs);
    out.push_back(make_check("determinism_differing_files", 9, differing, 0.0, 0.0, false, 1.0));
  }
  return out;
}

}  // namespace mfld
