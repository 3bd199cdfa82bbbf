// Copyright 2026 The AirPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "airpool/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using airpool::RunningStats;

TEST(Seeding, StreamsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(airpool::derive_seed(7, s));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(airpool::derive_seed(7, 3), airpool::derive_seed(7, 3));
  EXPECT_NE(airpool::derive_seed(7, 3), airpool::derive_seed(8, 3));
}

TEST(RunningStats, MatchesTwoPassComputation) {
  std::vector<double> xs;
  auto rng = airpool::make_rng(3);
  for (int i = 0; i < 5000; ++i) xs.push_back(1e6 + airpool::standard_normal(rng));
  RunningStats s;
  for (double x : xs) s.add(x);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  EXPECT_NEAR(s.mean, mean, 1e-14 * mean);
  EXPECT_NEAR(s.sample_variance(), var / (xs.size() - 1), 1e-6);
  EXPECT_NEAR(s.variance(), var / xs.size(), 1e-6);
}

TEST(RunningStats, MergeEqualsSequential) {
  RunningStats all, a, b;
  auto rng = airpool::make_rng(4);
  for (int i = 0; i < 3000; ++i) {
    const double x = airpool::uniform01(rng);
    all.add(x);
    (i < 1234 ? a : b).add(x);
  }
  a.merge(b);
  EXPECT_NEAR(a.mean, all.mean, 1e-14);
  EXPECT_NEAR(a.variance(), all.variance(), 1e-14);
  EXPECT_EQ(a.count, all.count);
}

TEST(MonteCarlo, ResultIndependentOfWorkerCount) {
  const auto body = [](airpool::Rng& rng, RunningStats& acc) {
    acc.add(airpool::standard_normal(rng));
  };
  const auto one = airpool::monte_carlo<RunningStats>(50000, 11, 1, body);
  for (unsigned w : {2u, 3u, 8u}) {
    const auto many = airpool::monte_carlo<RunningStats>(50000, 11, w, body);
    EXPECT_EQ(many.count, one.count);
    EXPECT_EQ(many.mean, one.mean);
    EXPECT_EQ(many.variance(), one.variance());
  }
}

TEST(MonteCarlo, StandardNormalMoments) {
  const auto s = airpool::monte_carlo<RunningStats>(
      200000, 5, 1, [](airpool::Rng& rng, RunningStats& a) { a.add(airpool::standard_normal(rng)); });
  EXPECT_NEAR(s.mean, 0.0, 4 * s.std_error());
  // Var of the sample variance of N(0,1) is about 2/n.
  EXPECT_NEAR(s.variance(), 1.0, 4 * std::sqrt(2.0 / static_cast<double>(s.count)));
}
