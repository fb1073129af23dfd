#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mfld/rng.hpp"

using namespace mfld;

// Known-answer vectors of the Random123 Philox4x32-10 reference.
TEST(Philox, KnownAnswerZeros) {
  const auto r = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x6627e8d5u);
  EXPECT_EQ(r[1], 0xe169c58du);
  EXPECT_EQ(r[2], 0xbc57ac4cu);
  EXPECT_EQ(r[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                      {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r[0], 0x408f276du);
  EXPECT_EQ(r[1], 0x41c83b0eu);
  EXPECT_EQ(r[2], 0xa20bc7c6u);
  EXPECT_EQ(r[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto r = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                      {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r[0], 0xd16cfe09u);
  EXPECT_EQ(r[1], 0x94fdccebu);
  EXPECT_EQ(r[2], 0x5001e420u);
  EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(CounterRng, StreamsDiffer) {
  const CounterRng a(7, Stream::brownian), b(7, Stream::inner);
  EXPECT_NE(a.bits(0, 0, 0, 0), b.bits(0, 0, 0, 0));
}

TEST(CounterRng, UniformsInOpenUnitInterval) {
  const CounterRng rng(3, Stream::test);
  for (std::uint32_t c = 0; c < 1000; ++c)
    for (double u : rng.uniform4(c, 0, 0, 0)) {
      EXPECT_GT(u, 0.0);
      EXPECT_LT(u, 1.0);
    }
}

TEST(CounterRng, NormalMomentsWithinStderr) {
  const CounterRng rng(11, Stream::test);
  const std::size_t n = 200000;
  std::vector<double> z(n);
  rng.fill_normals(z, n, 1, 2, 3);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (double v : z) s1 += v, s2 += v * v, s4 += v * v * v * v;
  const double nn = static_cast<double>(n);
  EXPECT_NEAR(s1 / nn, 0.0, 3.0 / std::sqrt(nn));
  EXPECT_NEAR(s2 / nn, 1.0, 3.0 * std::sqrt(2.0 / nn));
  EXPECT_NEAR(s4 / nn, 3.0, 3.0 * std::sqrt(96.0 / nn));
}

TEST(CounterRng, FillIsAPrefixOfLongerFill) {
  const CounterRng rng(5, Stream::test);
  std::vector<double> a(10), b(17);
  rng.fill_normals(a, 10, 4, 5, 6);
  rng.fill_normals(b, 17, 4, 5, 6);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a[i], b[i]);
}
