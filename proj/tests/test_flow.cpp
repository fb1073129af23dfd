#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "mfld/flow.hpp"
#include "support.hpp"

using namespace mfld;
using namespace mfld::testing;

namespace {

const std::vector<double> kXi0{0.0};

FlowConfig small_config(double total_s, double ds = 1e-3) {
  FlowConfig cfg;
  cfg.ds = ds;
  cfg.total_s = total_s;
  cfg.checkpoint_stride = 0;
  cfg.adjoint_mode = AdjointMode::riccati;
  cfg.record_fixed_point = false;
  cfg.inner_seed = 5;
  return cfg;
}

double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

}  // namespace

TEST(LangevinStep, ZeroSigmaZeroDriftOnlyAdvancesS) {
  const auto spec = zero_problem();
  const auto grid = make_time_grid(1.0, 3);
  const auto noise = sample_brownian(1, grid, 4, 1);
  auto cfg = small_config(0.01);
  cfg.sigma = 0.0;
  auto state = make_flow_state(spec, cfg, noise, init_control(prior_sampler(1), grid, 4, 8, 1), kXi0);
  const auto before = state.control.theta;
  const auto trace = run_flow(state, spec, cfg, noise, kXi0);
  EXPECT_EQ(state.control.theta, before);
  EXPECT_EQ(state.step, 10u);
  EXPECT_DOUBLE_EQ(trace.rows.back().s, 0.01);
}

TEST(LangevinStep, SmallStepDisplacementIsMinusDrift) {
  // sigma = 0 on the frozen-Y instance: drift c Y + r a with Y = 1.
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(2, grid, 3, 1);
  const auto init = init_control(prior_sampler(1), grid, 3, 8, 2);
  std::vector<std::vector<double>> rate;
  for (double ds : {1e-6, 1e-7}) {
    auto cfg = small_config(ds, ds);
    cfg.sigma = 0.0;
    auto state = make_flow_state(spec, cfg, noise, init, kXi0);
    langevin_step(state, spec, cfg);
    std::vector<double> r(init.theta.size());
    for (std::size_t e = 0; e < r.size(); ++e) r[e] = (state.control.theta[e] - init.theta[e]) / ds;
    rate.push_back(r);
  }
  for (std::size_t e = 0; e < init.theta.size(); ++e) {
    const double drift = 1.0 + init.theta[e];
    EXPECT_NEAR(rate[0][e], -drift, 1e-8);
    EXPECT_NEAR(rate[1][e] / rate[0][e], 1.0, 1e-6);
  }
}

TEST(LangevinStep, NonFiniteParticleReportsLocation) {
  auto spec = frozen_y_problem();
  spec.prior_grad_cloud = [](ConstVec points, OutVec out) {
    for (std::size_t e = 0; e < points.size(); ++e) out[e] = points[e];
    out[5] = std::numeric_limits<double>::quiet_NaN();
  };
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(3, grid, 2, 1);
  const auto cfg = small_config(0.01);
  try {
    run_flow(spec, cfg, noise, init_control(prior_sampler(1), grid, 2, 8, 3), kXi0);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("j=0 k=0 i=5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(s=0"), std::string::npos) << msg;
  }
}

TEST(LangevinStep, IndependentOfThreadCount) {
#ifdef _OPENMP
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 4);
  const auto noise = sample_brownian(4, grid, 6, 1);
  const auto init = init_control(prior_sampler(1), grid, 6, 16, 4);
  const auto cfg = small_config(0.02);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto one = run_flow(spec, cfg, noise, init, kXi0);
  omp_set_num_threads(3);
  const auto three = run_flow(spec, cfg, noise, init, kXi0);
  omp_set_num_threads(saved);
  EXPECT_EQ(one.state.control.theta, three.state.control.theta);
#else
  GTEST_SKIP() << "built without OpenMP";
#endif
}

TEST(RunFlow, ZeroHorizonHasOnlyInitialCheckpoint) {
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(5, grid, 2, 1);
  const auto init = init_control(prior_sampler(1), grid, 2, 8, 5);
  const auto out = run_flow(spec, small_config(0.0), noise, init, kXi0);
  ASSERT_EQ(out.trace.rows.size(), 1u);
  EXPECT_EQ(out.trace.rows[0].s, 0.0);
  EXPECT_EQ(out.state.control.theta, init.theta);
}

TEST(RunFlow, CheckpointsAtStrideAndEnd) {
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(5, grid, 2, 1);
  auto cfg = small_config(0.025);
  cfg.checkpoint_stride = 10;
  const auto out = run_flow(spec, cfg, noise, init_control(prior_sampler(1), grid, 2, 8, 5), kXi0);
  ASSERT_EQ(out.trace.rows.size(), 4u);
  EXPECT_NEAR(out.trace.rows[1].s, 0.01, 1e-15);
  EXPECT_NEAR(out.trace.rows[3].s, 0.025, 1e-15);
}

TEST(RunFlow, IdenticalSeedsGiveIdenticalTraces) {
  const auto spec = build_lq_problem(lq(0.2, 1, 0.5, 1, 0.5, 1));
  const auto grid = make_time_grid(1.0, 4);
  const auto noise = sample_brownian(6, grid, 40, 1);
  auto cfg = small_config(0.02);
  cfg.adjoint_mode = AdjointMode::regression;
  cfg.checkpoint_stride = 5;
  cfg.record_fixed_point = true;
  const auto init = init_control(prior_sampler(1), grid, 40, 16, 6);
  const auto a = run_flow(spec, cfg, noise, init, kXi0);
  const auto b = run_flow(spec, cfg, noise, init, kXi0);
  ASSERT_EQ(a.trace.rows.size(), b.trace.rows.size());
  for (std::size_t l = 0; l < a.trace.rows.size(); ++l) {
    EXPECT_EQ(a.trace.rows[l].J_sigma, b.trace.rows[l].J_sigma);
    EXPECT_EQ(a.trace.rows[l].moment_q, b.trace.rows[l].moment_q);
    EXPECT_EQ(a.trace.rows[l].foc_spread, b.trace.rows[l].foc_spread);
  }
  EXPECT_EQ(a.state.control.theta, b.state.control.theta);
}

TEST(RunFlow, ResumingIsBitwiseTheSameAsOneRun) {
  const auto spec = build_lq_problem(lq(0.2, 1, 0.5, 1, 0.5, 1));
  const auto grid = make_time_grid(1.0, 4);
  const auto noise = sample_brownian(7, grid, 40, 1);
  auto cfg = small_config(0.03);
  cfg.adjoint_mode = AdjointMode::regression;
  cfg.refresh_stride = 4;
  const auto init = init_control(prior_sampler(1), grid, 40, 16, 7);
  const auto whole = run_flow(spec, cfg, noise, init, kXi0);

  auto first = cfg;
  first.total_s = 0.013;
  auto part = run_flow(spec, first, noise, init, kXi0);
  run_flow(part.state, spec, cfg, noise, kXi0);
  EXPECT_EQ(part.state.step, whole.state.step);
  EXPECT_EQ(part.state.control.theta, whole.state.control.theta);
}

TEST(RunFlow, RejectsStateFromDifferentStep) {
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(5, grid, 2, 1);
  auto state = make_flow_state(spec, small_config(0.01), noise, init_control(prior_sampler(1), grid, 2, 8, 5), kXi0);
  EXPECT_THROW(run_flow(state, spec, small_config(0.01, 2e-3), noise, kXi0), ConfigError);
}

TEST(RunFlow, FrozenAdjointReachesOuStationaryLaw) {
  // Y = 1, c = r = sigma = 1: mean -2/3, variance 1/3.
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(8, grid, 4, 1);
  const auto out = run_flow(spec, small_config(6.0), noise, init_control(prior_sampler(1), grid, 4, 512, 8), kXi0);
  const auto& last = out.trace.rows.back();
  EXPECT_NEAR(last.mean, -2.0 / 3.0, 3.0 * last.mean_stderr);
  EXPECT_NEAR(last.variance, 1.0 / 3.0, 3.0 * last.variance_stderr);
}

TEST(RunFlow, GibbsStartStaysStationary) {
  const auto spec = frozen_y_problem();
  const auto grid = make_time_grid(1.0, 2);
  const auto noise = sample_brownian(9, grid, 4, 1);
  const auto init = init_control(gaussian_sampler({-2.0 / 3.0}, std::sqrt(1.0 / 3.0)), grid, 4, 512, 9);
  const auto out = run_flow(spec, small_config(5.0), noise, init, kXi0);
  const auto& a = out.trace.rows.front();
  const auto& b = out.trace.rows.back();
  EXPECT_LT(std::abs(b.mean - a.mean), 3.0 * combined_se(a.mean_stderr, b.mean_stderr));
  EXPECT_LT(std::abs(b.variance - a.variance), 3.0 * combined_se(a.variance_stderr, b.variance_stderr));
}
