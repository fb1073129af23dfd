#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mfld/entropy.hpp"
#include "mfld/moments.hpp"
#include "mfld/particle_control.hpp"
#include "mfld/problem.hpp"
#include "mfld/wasserstein.hpp"

using namespace mfld;

namespace {

const TimeGrid kGrid = make_time_grid(1.0, 4);

std::vector<double> normals(std::size_t n, std::uint32_t tag, double mean = 0.0, double sd = 1.0) {
  std::vector<double> z(n);
  CounterRng(23, Stream::test).fill_normals(z, n, tag, 0, 0);
  for (double& v : z) v = mean + sd * v;
  return z;
}

double gaussian_pdf(double a, double mean, double sd) {
  const double u = (a - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double prior_u(double a) { return gaussian_prior_potential(ConstVec(&a, 1)); }

}  // namespace

TEST(InitControl, PointMassGivesZeros) {
  const auto pc = init_control(point_mass_sampler({0.0}), kGrid, 3, 5, 1);
  for (double v : pc.theta) EXPECT_EQ(v, 0.0);
}

TEST(InitControl, PriorMeanWithinClt) {
  const auto pc = init_control(prior_sampler(1), kGrid, 40, 256, 2);
  double s = 0.0;
  for (double v : pc.theta) s += v;
  const double n = static_cast<double>(pc.theta.size());
  EXPECT_NEAR(s / n, 0.0, 3.0 / std::sqrt(n));
}

TEST(InitControl, Deterministic) {
  const auto a = init_control(prior_sampler(2), kGrid, 4, 8, 3);
  const auto b = init_control(prior_sampler(2), kGrid, 4, 8, 3);
  EXPECT_EQ(a.theta, b.theta);
}

TEST(InitControl, RejectsSingleParticle) {
  EXPECT_THROW(init_control(prior_sampler(1), kGrid, 2, 1, 1), ConfigError);
}

TEST(RequireFinite, NamesLocation) {
  auto pc = init_control(prior_sampler(1), kGrid, 3, 4, 1);
  pc.cloud_data(2, 1)[3] = std::nan("");
  try {
    require_finite(pc);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "non-finite particle at j=2 k=1 i=3");
  }
}

TEST(Wasserstein, IdenticalIsZero) {
  const auto a = init_control(prior_sampler(1), kGrid, 3, 16, 4);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(wasserstein_qT(a, a, j), 0.0);
  EXPECT_EQ(rho_q(a, a), 0.0);
}

TEST(Wasserstein, ShiftGivesAbsShift) {
  const auto a = init_control(prior_sampler(1), kGrid, 3, 16, 5);
  for (double c : {-1.5, 0.25, 3.0}) {
    auto b = a;
    for (double& v : b.theta) v += c;
    EXPECT_NEAR(wasserstein_qT(a, b, 1), std::abs(c), 1e-12);
    EXPECT_NEAR(rho_q(a, b), std::abs(c), 1e-12);
  }
}

TEST(Wasserstein, TwoPointSamples) {
  auto a = make_control(kGrid, 2, 2, 1), b = make_control(kGrid, 2, 2, 1);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < kGrid.steps; ++k) {
      auto ca = a.cloud_data(j, k), cb = b.cloud_data(j, k);
      ca[0] = 1.0, ca[1] = 0.0;
      cb[0] = 2.0, cb[1] = 1.0;
    }
  EXPECT_NEAR(wasserstein_qT(a, b, 0), 1.0, 1e-15);
  EXPECT_NEAR(rho_q(a, b), 1.0, 1e-15);
}

TEST(Wasserstein, MetricAxiomsOnRandomTriples) {
  for (std::size_t p : {1u, 2u}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto a = init_control(prior_sampler(p), kGrid, 3, 12, 100 + seed);
      auto b = init_control(gaussian_sampler(std::vector<double>(p, 0.5), 2.0), kGrid, 3, 12, 200 + seed);
      auto c = init_control(gaussian_sampler(std::vector<double>(p, -1.0), 0.5), kGrid, 3, 12, 300 + seed);
      const double ab = rho_q(a, b), bc = rho_q(b, c), ac = rho_q(a, c);
      EXPECT_LE(ac, ab + bc + 1e-12);
      EXPECT_LE(ab, ac + bc + 1e-12);
      EXPECT_NEAR(ab, rho_q(b, a), 1e-12);
      EXPECT_GT(ab, 0.0);
    }
  }
}

TEST(Wasserstein, OrderThreeMetric) {
  auto a = init_control(prior_sampler(1), kGrid, 2, 10, 7, 3.0);
  auto b = a;
  for (double& v : b.theta) v -= 0.75;
  EXPECT_NEAR(rho_q(a, b), 0.75, 1e-12);
}

TEST(Wasserstein, ShapeMismatchRejected) {
  const auto a = init_control(prior_sampler(1), kGrid, 2, 10, 7);
  const auto b = init_control(prior_sampler(1), kGrid, 2, 12, 7);
  EXPECT_THROW(rho_q(a, b), ConfigError);
}

TEST(Entropy, PriorSampleIsNearZero) {
  const auto pts = normals(4096, 1);
  EXPECT_NEAR(entropy_estimate(CloudView(pts, 1), gaussian_prior_potential), 0.0, 0.05);
}

TEST(Entropy, GaussianKlClosedForm) {
  const auto pts = normals(4096, 2, -2.0 / 3.0, std::sqrt(1.0 / 3.0));
  const double exact = 0.5 * (1.0 / 3.0 + 4.0 / 9.0 - 1.0 + std::log(3.0));
  EXPECT_NEAR(exact, 0.4382, 5e-5);
  EXPECT_NEAR(entropy_estimate(CloudView(pts, 1), gaussian_prior_potential), exact, 0.05);
}

TEST(Entropy, DegenerateCloudIsInfinite) {
  const std::vector<double> pts(10, 0.7);
  EXPECT_EQ(entropy_estimate(CloudView(pts, 1), gaussian_prior_potential), INFINITY);
}

TEST(Entropy, WeightedCloudMatchesDuplicatedCloud) {
  const auto pts = normals(200, 3);
  std::vector<double> dup, w;
  for (double v : pts) dup.push_back(v), dup.push_back(v);
  // A weighted cloud with equal weights is the same measure as the plain one.
  w.assign(200, 1.0 / 200);
  const GaussianKde plain(CloudView(pts, 1)), weighted(CloudView(pts, 1, w));
  const double a = 0.3;
  EXPECT_NEAR(plain.log_density(ConstVec(&a, 1)), weighted.log_density(ConstVec(&a, 1)), 1e-13);
}

TEST(Kde, LogDensityFloorsAtUnderflow) {
  const std::vector<double> pts{0.0, 1e-3, -1e-3};
  const GaussianKde kde(CloudView(pts, 1));
  const double far = 1e6;
  EXPECT_EQ(kde.log_density(ConstVec(&far, 1)), kLogDensityFloor);
}

TEST(Kde, GridMassesMatchExactIntervals) {
  for (double sd : {1.0, 1e-3}) {
    const auto pts = normals(300, 4, 0.4, sd);
    const GaussianKde kde(CloudView(pts, 1));
    const double lo = -4.0, hi = 4.0;
    const std::size_t n = 512;
    const auto gm = kde.grid_masses(lo, hi, n);
    const double delta = (hi - lo) / n;
    double total = gm.outside;
    double worst = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      total += gm.cells[b];
      const double exact = kde.interval_mass(lo + b * delta, lo + (b + 1) * delta);
      worst = std::max(worst, std::abs(gm.cells[b] - exact));
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_LT(worst, 1e-4);
  }
}

// Ent is convex: its difference quotient along nu + eps (mu - nu) lies above
// the directional derivative int (log nu + U) d(mu - nu) and tends to it.
// mu is narrower than nu so mu / nu stays bounded and the limit is O(eps).
TEST(Entropy, DirectionalDerivativeByQuadrature) {
  const double lo = -14.0, hi = 14.0;
  const std::size_t nodes = 200000;
  const auto nu = [](double a) { return gaussian_pdf(a, 0.5, 0.8); };
  const auto mu = [](double a) { return gaussian_pdf(a, -0.5, 0.7); };
  const double ent_nu = entropy_quadrature(nu, prior_u, lo, hi, nodes);
  const double h = (hi - lo) / nodes;
  double derivative = 0.0;
  for (std::size_t l = 0; l < nodes; ++l) {
    const double a = lo + (l + 0.5) * h;
    derivative += (std::log(nu(a)) + prior_u(a)) * (mu(a) - nu(a)) * h;
  }
  double previous = INFINITY;
  for (double eps : {0.3, 0.1, 1e-2, 1e-3, 1e-4}) {
    const auto mix = [&](double a) { return nu(a) + eps * (mu(a) - nu(a)); };
    const double quotient = (entropy_quadrature(mix, prior_u, lo, hi, nodes) - ent_nu) / eps;
    EXPECT_GE(quotient, derivative - 1e-3);
    EXPECT_LE(quotient, previous + 1e-3);
    previous = quotient;
  }
  EXPECT_NEAR(previous, derivative, 1e-3);
}

TEST(Moments, PointMasses) {
  const auto zero = init_control(point_mass_sampler({0.0}), kGrid, 2, 4, 1);
  EXPECT_EQ(cloud_moments(zero, 2.0).aggregate, 0.0);
  const auto c = init_control(point_mass_sampler({1.7}), kGrid, 2, 4, 1);
  EXPECT_NEAR(cloud_moments(c, 2.0).aggregate, 1.7 * 1.7, 1e-14);
  EXPECT_NEAR(cloud_moments(c, 3.0).aggregate, std::pow(1.7, 3.0), 1e-12);
}

TEST(Moments, StandardNormalSecondMoment) {
  const auto pc = init_control(prior_sampler(1), kGrid, 20, 512, 9);
  const auto m = cloud_moments(pc, 2.0);
  EXPECT_NEAR(m.aggregate, 1.0, 3.0 * m.stderr_);
  EXPECT_NEAR(m.mean, 0.0, 3.0 * m.mean_stderr);
  EXPECT_NEAR(m.variance, 1.0, 3.0 * m.variance_stderr);
  EXPECT_EQ(m.per_cell.size(), 20u * kGrid.steps);
}
