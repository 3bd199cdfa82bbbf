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

#include "airpool/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace airpool;

namespace {

const FeatureModel kGauss = FeatureModel::rectified_gaussian();
constexpr double kE = 2.97539;  // E[f_max²] for K = 12 rectified Gaussians

}  // namespace

TEST(Grid, GeometricEndpointsAndRatio) {
  const auto g = geometric_grid(1.0, 128.0, 8);
  ASSERT_EQ(g.size(), 8u);
  EXPECT_EQ(g.front(), 1.0);
  EXPECT_EQ(g.back(), 128.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], 2.0, 1e-12);
  EXPECT_EQ(default_alpha_grid().size(), 64u);
}

TEST(LowSnr, ThresholdValue) {
  EXPECT_NEAR(low_snr_threshold(2, 1.0), 1.5011, 1e-4);
  EXPECT_NEAR(low_snr_threshold(12, kE), 0.8444, 1e-4);
  EXPECT_THROW(low_snr_threshold(1, 1.0), std::invalid_argument);
}

TEST(ClosedForm, SatisfiesLambertEquation) {
  for (double snr : {20.0, 100.0, 1e3, 1e4, 1e6}) {
    const AlphaDecision d = alpha_closed_form(12, snr, 1.0, kE);
    ASSERT_FALSE(d.clamped);
    const double w = d.c_const / d.alpha_star - d.a_const;
    EXPECT_NEAR(w * std::exp(w), d.w_arg, 1e-10 * d.w_arg);
    EXPECT_NEAR(d.c_const, std::log(std::numbers::sqrt2 * snr / 12.0), 1e-12);
  }
}

TEST(ClosedForm, IncreasingInSnr) {
  double prev = 0.0;
  for (double snr = 15.0; snr < 1e8; snr *= 3.0) {
    const double a = alpha_closed_form(12, snr, 1.0, kE).alpha_star;
    EXPECT_GT(a, prev) << snr;
    prev = a;
  }
}

TEST(ClosedForm, DomainChecks) {
  EXPECT_THROW(alpha_closed_form(3, 100.0, 1.0, kE), std::domain_error);
  EXPECT_THROW(alpha_closed_form(12, 12.0, 1.0, kE), std::domain_error);
  EXPECT_THROW(alpha_closed_form(12, 100.0, 0.0, kE), std::domain_error);
}

TEST(ClosedForm, NearOptimalForSurrogate) {
  for (double snr : {100.0, 1e3, 1e4}) {
    double best = std::numeric_limits<double>::infinity();
    for (double a = 1.0; a <= 128.0; a *= 1.001) {
      best = std::min(best, surrogate_objective(a, 12, snr, 1.0, kE));
    }
    const AlphaDecision d = alpha_closed_form(12, snr, 1.0, kE);
    EXPECT_LE(d.objective_value, 1.1 * best) << snr;
  }
}

TEST(Stationarity, RootZeroesResidual) {
  for (double snr : {100.0, 1e3, 1e4}) {
    const auto r = stationarity_root(12, snr, 1.0, kE);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(alpha_stationarity_residual(*r, 12, snr, 1.0, kE), 0.0, 1e-10);
    EXPECT_GT(alpha_stationarity_residual(kAlphaMax, 12, snr, 1.0, kE), 0.0);
  }
}

TEST(Select, DispatchesByModeAndSnr) {
  SelectOptions opt;
  opt.moment_trials = 100000;
  opt.brute_force.trials = 10000;
  opt.brute_force.beta_trials = 10000;
  opt.alpha_grid = {1.0, 2.0, 4.0};
  const AlphaDecision avg = select_alpha(PoolingMode::average(), kGauss, 12, 10.0, 1.0, opt);
  EXPECT_EQ(avg.method, AlphaMethod::AverageRule);
  EXPECT_EQ(avg.alpha_star, 1.0);
  EXPECT_EQ(avg.beta, 12.0);
  const AlphaDecision low = select_alpha(PoolingMode::max(), kGauss, 12, 0.5, 1.0, opt);
  EXPECT_EQ(low.method, AlphaMethod::LowSnrRule);
  EXPECT_EQ(low.alpha_star, 1.0);
  const AlphaDecision cf = select_alpha(PoolingMode::max(), kGauss, 12, 100.0, 1.0, opt);
  EXPECT_EQ(cf.method, AlphaMethod::ClosedForm);
  EXPECT_GT(cf.alpha_star, 1.0);
  EXPECT_GT(cf.beta, 0.0);
  const AlphaDecision mid = select_alpha(PoolingMode::max(), kGauss, 12, 5.0, 1.0, opt);
  EXPECT_EQ(mid.method, AlphaMethod::BruteForce);
  EXPECT_FALSE(mid.note.empty());
  const AlphaDecision small = select_alpha(PoolingMode::max(), kGauss, 3, 100.0, 1.0, opt);
  EXPECT_EQ(small.method, AlphaMethod::BruteForce);
  EXPECT_EQ(small.profile.size(), 3u);
}

TEST(BruteForce, NoiselessMaxPicksLargestAlpha) {
  BruteForceOptions opt;
  opt.trials = 20000;
  opt.beta_trials = 20000;
  const std::vector<double> grid{1, 4, 16, 64};
  const AlphaDecision d = brute_force_alpha(kGauss, PoolingMode::max(), 12, 1.0, 0.0, grid, opt);
  EXPECT_EQ(d.alpha_star, 64.0);
  for (std::size_t i = 1; i < d.profile.size(); ++i) {
    EXPECT_LT(d.profile[i].value, d.profile[i - 1].value);
  }
}

TEST(BruteForce, AveragePrefersUnitAlpha) {
  BruteForceOptions opt;
  opt.trials = 20000;
  const std::vector<double> grid{1, 2, 4};
  const AlphaDecision d = brute_force_alpha(kGauss, PoolingMode::average(), 12, 10.0, 1.0, grid, opt);
  EXPECT_EQ(d.alpha_star, 1.0);
}

TEST(BruteForce, CacheReusesBeta) {
  BetaStarCache cache;
  BruteForceOptions opt;
  opt.trials = 10000;
  opt.beta_trials = 10000;
  opt.cache = &cache;
  const std::vector<double> grid{1, 8};
  const auto a = brute_force_alpha(kGauss, PoolingMode::max(), 6, 10.0, 1.0, grid, opt);
  EXPECT_EQ(cache.size(), 2u);
  const auto b = brute_force_alpha(kGauss, PoolingMode::max(), 6, 10.0, 1.0, grid, opt);
  EXPECT_EQ(cache.size(), 2u);
  EXPECT_EQ(a.objective_value, b.objective_value);
}

TEST(Calibration, RecoversLinearMap) {
  const std::vector<CalibrationPair> exact{{2, 4.5}, {3, 6.5}, {5, 10.5}, {8, 16.5}};
  const CalibrationConstants c = fit_calibration(exact);
  EXPECT_NEAR(c.c1, 2.0, 1e-12);
  EXPECT_NEAR(c.c2, 0.5, 1e-12);
  EXPECT_NEAR(c.fit_error, 0.0, 1e-20);
  EXPECT_EQ(c.apply(100.0), kAlphaMax);
  EXPECT_EQ((CalibrationConstants{1.0, -5.0}.apply(2.0)), 1.0);

  const std::vector<std::pair<double, double>> snr_pairs{{100, 0}, {1e3, 0}, {1e4, 0}};
  std::vector<std::pair<double, double>> ident;
  for (auto [snr, _] : snr_pairs) ident.push_back({snr, alpha_closed_form(12, snr, 1.0, kE).alpha_star});
  const CalibrationConstants id = fit_calibration(ident, 12, kE);
  EXPECT_NEAR(id.c1, 1.0, 1e-10);
  EXPECT_NEAR(id.c2, 0.0, 1e-9);
  const AlphaDecision cal = calibrated_alpha(id, 12, 1e3, 1.0, kE);
  EXPECT_EQ(cal.method, AlphaMethod::Calibrated);
  EXPECT_NEAR(cal.alpha_star, alpha_closed_form(12, 1e3, 1.0, kE).alpha_star, 1e-9);
}

TEST(Calibration, DegenerateDesignThrows) {
  const std::vector<CalibrationPair> same{{3, 1}, {3, 2}, {3, 4}};
  EXPECT_THROW(fit_calibration(same), std::invalid_argument);
  const std::vector<CalibrationPair> two{{1, 1}, {2, 2}};
  EXPECT_THROW(fit_calibration(two), std::invalid_argument);
}
