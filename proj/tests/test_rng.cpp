#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "bermudan/rng.hpp"

using bermudan::rng::Philox4x32;
using bermudan::rng::PathStream;

// Known-answer vectors for Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathStream, SamePathSameDraws) {
  PathStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(PathStream, DifferentPathsDiffer) {
  PathStream a(42, 7), b(42, 8), c(43, 7);
  const double x = a.uniform();
  EXPECT_NE(x, b.uniform());
  EXPECT_NE(x, c.uniform());
}

TEST(PathStream, UniformsInOpenInterval) {
  PathStream s(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(PathStream, NormalMoments) {
  const int n = 400000;
  double sum = 0.0, sq = 0.0, cube = 0.0, quad = 0.0;
  for (int p = 0; p < n / 8; ++p) {
    PathStream s(99, static_cast<std::uint64_t>(p));
    for (int i = 0; i < 8; ++i) {
      const double x = s.normal();
      sum += x;
      sq += x * x;
      cube += x * x * x;
      quad += x * x * x * x;
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(cube / n, 0.0, 5.0 * std::sqrt(15.0 / n));
  EXPECT_NEAR(quad / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(DeriveSeed, TagsAndRunsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0ull, 1ull, 12345ull}) {
    for (std::uint64_t tag = 1; tag <= 3; ++tag) {
      for (std::uint64_t run = 0; run < 100; ++run) {
        EXPECT_TRUE(seen.insert(bermudan::rng::derive_seed(base, tag, run)).second);
      }
    }
  }
}
