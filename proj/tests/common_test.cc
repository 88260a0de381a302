/*
 * Copyright 2026 The causal-dp-synth Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cds/common.h"

#include <atomic>
#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace cds {
namespace {

TEST(Fnv1a64Test, KnownVectors) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(DeriveSeedTest, DeterministicAndLabelSensitive) {
  EXPECT_EQ(DeriveSeed(7, "a"), DeriveSeed(7, "a"));
  EXPECT_NE(DeriveSeed(7, "a"), DeriveSeed(7, "b"));
  EXPECT_NE(DeriveSeed(7, "a"), DeriveSeed(8, "a"));
  EXPECT_NE(DeriveSeed(7, "a", 0), DeriveSeed(7, "a", 1));
}

TEST(SeedAuditTest, RecordsSortedUniqueLabels) {
  SetSeedAudit(true);
  DeriveSeed(1, "zeta");
  DeriveSeed(2, "alpha", 3);
  DeriveSeed(3, "zeta");
  const std::vector<std::string> labels = ConsumedSeedLabels();
  SetSeedAudit(false);
  EXPECT_EQ(labels, (std::vector<std::string>{"alpha", "zeta"}));

  DeriveSeed(1, "ignored");
  SetSeedAudit(true);
  EXPECT_TRUE(ConsumedSeedLabels().empty());
  SetSeedAudit(false);
}

TEST(ParallelForTest, VisitsEachIndexOnce) {
  for (size_t workers : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(101);
    ParallelFor(hits.size(), workers, [&](size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  ParallelFor(0, 4, [](size_t) { FAIL(); });
}

TEST(ErrorTest, CarriesCodeAndName) {
  const Error e(ErrorCode::kCycleDetected, "X1, X2");
  EXPECT_EQ(e.code(), ErrorCode::kCycleDetected);
  EXPECT_NE(std::string(e.what()).find("X1, X2"), std::string::npos);
  EXPECT_FALSE(ErrorCodeName(ErrorCode::kIoError).empty());
}

TEST(StandardNormalTest, MomentsWithinClt) {
  Rng rng(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = StandardNormal(rng);
    s += z;
    s2 += z * z;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
  EXPECT_LT(std::abs(var - 1.0), 4.0 * std::sqrt(2.0 / n));
}

TEST(Uniform01Test, StaysInUnitInterval) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = Uniform01(rng);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace cds
