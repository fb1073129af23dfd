#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "mfld/noise.hpp"

using namespace mfld;

TEST(TimeGrid, FourSteps) {
  const auto g = make_time_grid(1.0, 4);
  const std::vector<double> expect{0.0, 0.25, 0.5, 0.75, 1.0};
  EXPECT_EQ(g.nodes(), expect);
}

TEST(TimeGrid, SingleStep) {
  const auto g = make_time_grid(1.0, 1);
  EXPECT_EQ(g.nodes(), (std::vector<double>{0.0, 1.0}));
}

TEST(TimeGrid, StepSize) {
  const auto g = make_time_grid(2.0, 20);
  EXPECT_DOUBLE_EQ(g.dt(), 0.1);
}

TEST(TimeGrid, LastNodeIsHorizonAndNodesIncrease) {
  const auto g = make_time_grid(0.7, 37);
  const auto n = g.nodes();
  EXPECT_EQ(n.back(), 0.7);
  for (std::size_t k = 1; k < n.size(); ++k) EXPECT_LT(n[k - 1], n[k]);
}

TEST(TimeGrid, RejectsBadInput) {
  EXPECT_THROW(make_time_grid(0.0, 4), ConfigError);
  EXPECT_THROW(make_time_grid(-1.0, 4), ConfigError);
  EXPECT_THROW(make_time_grid(std::nan(""), 4), ConfigError);
  EXPECT_THROW(make_time_grid(INFINITY, 4), ConfigError);
  EXPECT_THROW(make_time_grid(1.0, 0), ConfigError);
}

TEST(Brownian, Deterministic) {
  const auto g = make_time_grid(1.0, 10);
  const auto a = sample_brownian(42, g, 50, 2);
  const auto b = sample_brownian(42, g, 50, 2);
  EXPECT_EQ(a.increments, b.increments);
  const auto c = sample_brownian(43, g, 50, 2);
  EXPECT_NE(a.increments, c.increments);
}

TEST(Brownian, AddingPathsKeepsExistingOnes) {
  const auto g = make_time_grid(1.0, 10);
  const auto small = sample_brownian(9, g, 5, 1);
  const auto large = sample_brownian(9, g, 500, 1);
  for (std::size_t e = 0; e < small.increments.size(); ++e) EXPECT_EQ(small.increments[e], large.increments[e]);
}

TEST(Brownian, VarianceMatchesDt) {
  const auto g = make_time_grid(1.0, 4);
  const std::size_t m = 100000;
  const auto bb = sample_brownian(1, g, m, 1);
  const double dt = g.dt();
  for (std::size_t k = 0; k < g.steps; ++k) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) s2 += bb.at(j, k)[0] * bb.at(j, k)[0];
    const double var = s2 / m;
    // Var of the sample second moment of N(0, dt) is 2 dt^2 / m.
    EXPECT_NEAR(var, dt, 3.0 * dt * std::sqrt(2.0 / m));
  }
}

TEST(Brownian, IncrementsUncorrelated) {
  const auto g = make_time_grid(1.0, 4);
  const std::size_t m = 100000;
  const auto bb = sample_brownian(2, g, m, 1);
  const double dt = g.dt();
  double across_k = 0.0, across_j = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    across_k += bb.at(j, 0)[0] * bb.at(j, 1)[0];
    across_j += bb.at(j, 2)[0] * bb.at(j + 1, 2)[0];
  }
  const double n = static_cast<double>(m - 1);
  EXPECT_NEAR(across_k / n / dt, 0.0, 3.0 / std::sqrt(n));
  EXPECT_NEAR(across_j / n / dt, 0.0, 3.0 / std::sqrt(n));
}

TEST(Brownian, BinaryRoundtrip) {
  const auto g = make_time_grid(1.5, 6);
  const auto bb = sample_brownian(77, g, 9, 2);
  const auto path = (std::filesystem::temp_directory_path() / "mfld_brownian_roundtrip.bin").string();
  write_brownian(bb, path);
  const auto back = read_brownian(path, 1.5);
  std::remove(path.c_str());
  EXPECT_EQ(back.outer_count, 9u);
  EXPECT_EQ(back.noise_dim, 2u);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.grid.steps, 6u);
  EXPECT_EQ(back.increments, bb.increments);
}
