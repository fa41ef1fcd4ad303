// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ebmvar/rng.hpp"

using namespace ebmvar;

// Published Random123 known-answer vectors.
TEST(Philox, KnownAnswerZero) {
  const auto r = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r[0], 0x6627e8d5u);
  EXPECT_EQ(r[1], 0xe169c58du);
  EXPECT_EQ(r[2], 0xbc57ac4cu);
  EXPECT_EQ(r[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto r = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                               {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r[0], 0x408f276du);
  EXPECT_EQ(r[1], 0x41c83b0eu);
  EXPECT_EQ(r[2], 0xa20bc7c6u);
  EXPECT_EQ(r[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto r = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                               {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r[0], 0xd16cfe09u);
  EXPECT_EQ(r[1], 0x94fdccebu);
  EXPECT_EQ(r[2], 0x5001e420u);
  EXPECT_EQ(r[3], 0x24126ea1u);
}

TEST(Philox, IsConstexpr) {
  constexpr auto r = philox4x32_10({0, 0, 0, 0}, {0, 0});
  static_assert(r[0] == 0x6627e8d5u);
  SUCCEED();
}

TEST(OpenUnit, StaysInsideInterval) {
  EXPECT_GT(to_open_unit(0, 0), 0.0);
  EXPECT_LT(to_open_unit(0xffffffffu, 0xffffffffu), 1.0);
}

TEST(NormalStream, SameCoordinatesSameValues) {
  const NormalStream a(42, 3), b(42, 3);
  for (std::size_t k = 0; k < 100; ++k) {
    EXPECT_EQ(a.pair(k), b.pair(k));
    EXPECT_EQ(a.normal(k), b.normal(k));
  }
}

TEST(NormalStream, DistinctPathsAndSeedsDiffer) {
  const NormalStream a(42, 0), b(42, 1), c(43, 0);
  EXPECT_NE(a.normal(0), b.normal(0));
  EXPECT_NE(a.normal(0), c.normal(0));
  EXPECT_NE(a.pair(5, 0), a.pair(5, 1));
}

TEST(NormalStream, FillUsesPairsAcrossBlocks) {
  const NormalStream a(9, 2);
  std::vector<double> z(5);
  a.fill(7, z, z.size());
  const auto p0 = a.pair(7, 0), p1 = a.pair(7, 1), p2 = a.pair(7, 2);
  EXPECT_EQ(z[0], p0.first);
  EXPECT_EQ(z[1], p0.second);
  EXPECT_EQ(z[2], p1.first);
  EXPECT_EQ(z[3], p1.second);
  EXPECT_EQ(z[4], p2.first);
}

TEST(NormalStream, StandardNormalMoments) {
  const NormalStream a(2026, 0);
  const std::size_t n = 200000;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, cross = 0;
  for (std::size_t k = 0; k < n / 2; ++k) {
    const auto [x, y] = a.pair(k);
    for (double v : {x, y}) {
      s1 += v;
      s2 += v * v;
      s3 += v * v * v;
      s4 += v * v * v * v;
    }
    cross += x * y;
  }
  const double m = s1 / n;
  // Standard errors: mean 1/sqrt(n), var sqrt(2/n), skew sqrt(15/n), kurt sqrt(96/n).
  EXPECT_NEAR(m, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s3 / n, 0.0, 4.0 * std::sqrt(15.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
  EXPECT_NEAR(cross / (n / 2), 0.0, 4.0 / std::sqrt(n / 2.0));
}

TEST(NormalStream, TailFrequency) {
  const NormalStream a(77, 5);
  const std::size_t n = 100000;
  std::size_t beyond = 0;
  for (std::size_t k = 0; k < n; ++k) beyond += std::abs(a.normal(k)) > 1.959963984540054 ? 1 : 0;
  const double p = static_cast<double>(beyond) / n;
  EXPECT_NEAR(p, 0.05, 4.0 * std::sqrt(0.05 * 0.95 / n));
}
