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

#include "airpool/channel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace airpool;

TEST(SystemParams, DefaultNoiseConstants) {
  const SystemParams p;
  // -174 dBm/Hz with a 4 dB noise figure is the 1e-20 W/Hz aggregate constant.
  EXPECT_NEAR(p.effective_noise_density(), 1e-20, 0.005e-20);
  EXPECT_NEAR(p.subchannel_noise_power_w(),
              p.effective_noise_density() * p.bandwidth_hz / p.n_subchannels, 1e-30);
}

TEST(SystemParams, ValidationRejectsBadValues) {
  SystemParams p;
  p.bandwidth_hz = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SystemParams{};
  p.k_sensors = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_NO_THROW(SystemParams{}.validate());
}

TEST(Rician, DeterministicPerSeed) {
  const SystemParams p;
  const auto a = draw_rician(p, 5), b = draw_rician(p, 5), c = draw_rician(p, 6);
  EXPECT_EQ(a.gains, b.gains);
  EXPECT_NE(a.gains, c.gains);
  EXPECT_EQ(a.gains.size(), 12u);
}

TEST(Rician, LineOfSightLimit) {
  SystemParams p;
  p.rician_ratio_db = 60.0;
  for (auto h : draw_rician(p, 1).gains) EXPECT_NEAR(std::abs(h), 1.0, 1e-2);
}

TEST(Rician, UnitAveragePower) {
  for (double db : {-10.0, 0.0, 4.0, 20.0}) {
    const double kappa = db_to_linear(db);
    const auto s = monte_carlo<RunningStats>(1000000, 3, 1, [&](Rng& rng, RunningStats& a) {
      a.add(std::norm(draw_rician_gain(kappa, rng)));
    });
    EXPECT_NEAR(s.mean, 1.0, 4 * s.std_error()) << db;
  }
}

TEST(InverseGain, InfiniteWithoutTruncation) {
  SystemParams p;
  p.truncation_threshold = 0.0;
  EXPECT_TRUE(std::isinf(inverse_gain_moment(p, 10000, 1).value));
  EXPECT_THROW(receive_power_budget(p, std::numeric_limits<double>::infinity()),
               std::domain_error);
}

TEST(InverseGain, MatchesNumericalIntegralOfConditionalMoment) {
  // |h|² is (1/(2(κ+1)))·noncentral χ²₂; integrate its density against 1/g on (g_th, ∞).
  const SystemParams p;
  const double kappa = p.rician_factor();
  const double omega = 1.0;
  const auto pdf = [&](double g) {
    const double a = (kappa + 1.0) / omega;
    return a * std::exp(-kappa - a * g) * std::cyl_bessel_i(0.0, 2.0 * std::sqrt(kappa * a * g));
  };
  double num = 0.0, den = 0.0;
  const double g_th = p.truncation_threshold, hi = 40.0;
  const int n = 400000;
  // Midpoint rule on a log-spaced grid.
  for (int i = 0; i < n; ++i) {
    const double l0 = std::log(g_th) + (std::log(hi) - std::log(g_th)) * i / n;
    const double l1 = std::log(g_th) + (std::log(hi) - std::log(g_th)) * (i + 1) / n;
    const double g = std::exp(0.5 * (l0 + l1));
    const double w = std::exp(l1) - std::exp(l0);
    num += pdf(g) / g * w;
    den += pdf(g) * w;
  }
  const Estimate e = inverse_gain_moment(p, 1000000, 7);
  EXPECT_NEAR(e.value, num / den, 4 * e.std_error);
}

TEST(InverseGain, CacheReturnsSameEstimate) {
  InverseGainCache cache;
  const SystemParams p;
  const Estimate a = cache.get(p, 20000, 3);
  const Estimate b = cache.get(p, 20000, 3);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.value, inverse_gain_moment(p, 20000, 3).value);
}

TEST(PowerBudget, UnitChannelAndLinearity) {
  SystemParams p;
  p.path_loss = 1.0;
  EXPECT_DOUBLE_EQ(receive_power_budget(p, 1.0), p.power_budget_w);
  const double base = receive_power_budget(SystemParams{}, 1.3);
  SystemParams q;
  q.power_budget_w *= 2;
  EXPECT_DOUBLE_EQ(receive_power_budget(q, 1.3), 2 * base);
}

TEST(ReceiveSnr, RoundTripAndBandwidthScaling) {
  const SystemParams p;
  const double inv = 1.37;
  const double p0 = power_budget_for_snr(p, inv, db_to_linear(6.0));
  SystemParams q = p;
  q.power_budget_w = p0;
  EXPECT_NEAR(linear_to_db(receive_snr(q, inv)), 6.0, 1e-12);
  SystemParams wide = q;
  wide.bandwidth_hz *= 2;
  EXPECT_NEAR(receive_snr(wide, inv), 0.5 * receive_snr(q, inv), 1e-12 * receive_snr(q, inv));
}

TEST(ReceiveSnr, IndependentRecomputation) {
  const SystemParams p;
  const double inv = 2.0;
  const double n0 = std::pow(10.0, (-174.0 + 4.0) / 10.0) * 1e-3;
  const double expected = 1e-3 * std::pow(300.0, -3.4) / (n0 * 10e6 * inv);
  EXPECT_NEAR(receive_snr(p, inv), expected, 1e-12 * expected);
}

TEST(Mac, NoiselessIsExactSum) {
  const std::vector<double> s{0.5, -1.25, 2.0};
  EXPECT_DOUBLE_EQ(transmit_over_mac(s, 9.0, 0.0, 1), 3.0 * 1.25);
  const std::vector<double> one{1.0};
  EXPECT_DOUBLE_EQ(transmit_over_mac(one, 4.0, 0.0, 1), 2.0);
  EXPECT_THROW(transmit_over_mac(one, 4.0, -1.0, 1), std::invalid_argument);
}

TEST(Mac, NoiselessIsLinearInEachSymbol) {
  auto rng = make_rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(5), b(5), c(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = standard_normal(rng);
      b[i] = standard_normal(rng);
      c[i] = 2.0 * a[i] - 3.0 * b[i];
    }
    const double ya = transmit_over_mac(a, 2.0, 0.0, 1);
    const double yb = transmit_over_mac(b, 2.0, 0.0, 1);
    EXPECT_NEAR(transmit_over_mac(c, 2.0, 0.0, 1), 2.0 * ya - 3.0 * yb, 1e-12);
  }
}

TEST(Mac, PureNoiseVariance) {
  const std::vector<double> zeros(4, 0.0);
  RunningStats s;
  auto rng = make_rng(9);
  for (int i = 0; i < 200000; ++i) s.add(transmit_over_mac(zeros, 1.0, 0.3, rng));
  EXPECT_NEAR(s.mean, 0.0, 4 * s.std_error());
  EXPECT_NEAR(s.variance(), 0.3, 4 * 0.3 * std::sqrt(2.0 / 200000));
}

TEST(Latency, ReportedValues) {
  SystemParams p;
  EXPECT_NEAR(airpool_latency(p) * 1e3, 1.7911, 1e-12);
  p.n_features = 7675;
  EXPECT_NEAR(airpool_latency(p) * 1e3, 0.7675, 1e-12);
  p.n_features = 0;
  EXPECT_EQ(airpool_latency(p), 0.0);
  const SystemParams d;
  EXPECT_NEAR(digital_latency(d, 6, db_to_linear(6)) * 1e3, 22.90, 0.05 * 22.90);
  EXPECT_NEAR(digital_latency(d, 6, db_to_linear(10)) * 1e3, 18.64, 0.02 * 18.64);
  EXPECT_NEAR(digital_latency(d, 6, db_to_linear(16)) * 1e3, 14.47, 0.02 * 14.47);
}

TEST(Latency, Monotonicity) {
  const SystemParams p;
  double prev = std::numeric_limits<double>::infinity();
  for (double db = -5; db <= 30; db += 0.5) {
    const double l = digital_latency(p, 6, db_to_linear(db));
    EXPECT_LT(l, prev);
    prev = l;
  }
  for (int q = 1; q < 16; ++q) {
    EXPECT_LT(digital_latency(p, q, 4.0), digital_latency(p, q + 1, 4.0));
  }
  SystemParams many = p;
  many.k_sensors = 100;
  EXPECT_EQ(airpool_latency(many), airpool_latency(p));
  EXPECT_THROW(digital_latency(p, 0, 4.0), std::invalid_argument);
}
