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

// Rician block-fading multi-access channel with channel-inversion precoding,
// receive-power budgeting and the air-latency models.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "airpool/montecarlo.hpp"

namespace airpool {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Physical setting of one sensing round.
struct SystemParams {
  int k_sensors = 12;
  int n_features = 17911;
  double bandwidth_hz = 10e6;
  int n_subchannels = 12;
  double power_budget_w = 1e-3;
  double noise_density_dbm_per_hz = -174.0;
  double noise_figure_db = 4.0;
  double path_loss = std::pow(300.0, -3.4);
  double rician_ratio_db = 4.0;
  // Truncated channel inversion: sensors with |h|² ≤ threshold stay silent.
  double truncation_threshold = 0.01;

  void validate() const {
    if (k_sensors < 1) throw std::invalid_argument("k_sensors must be >= 1");
    if (n_features < 0) throw std::invalid_argument("n_features must be >= 0");
    if (n_subchannels < 1) throw std::invalid_argument("n_subchannels must be >= 1");
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("bandwidth_hz must be > 0");
    if (!(power_budget_w > 0.0)) throw std::invalid_argument("power_budget_w must be > 0");
    if (!(path_loss > 0.0)) throw std::invalid_argument("path_loss must be > 0");
    if (!std::isfinite(noise_density_dbm_per_hz) || !std::isfinite(noise_figure_db)) {
      throw std::invalid_argument("noise parameters must be finite");
    }
    if (std::isnan(rician_ratio_db)) throw std::invalid_argument("rician_ratio_db is NaN");
    if (!(truncation_threshold >= 0.0)) {
      throw std::invalid_argument("truncation_threshold must be >= 0");
    }
  }

  double noise_density_w_per_hz() const {
    return db_to_linear(noise_density_dbm_per_hz) * 1e-3;
  }
  /// Noise density × noise figure (the aggregate constant, 1e-20 W/Hz by default).
  double effective_noise_density() const {
    return noise_density_w_per_hz() * db_to_linear(noise_figure_db);
  }
  double subchannel_noise_power_w() const {
    return effective_noise_density() * bandwidth_hz / n_subchannels;
  }
  double rician_factor() const { return db_to_linear(rician_ratio_db); }
};

struct ChannelDraw {
  std::vector<std::complex<double>> gains;
  std::uint64_t seed = 0;
};

inline std::complex<double> draw_rician_gain(double kappa, Rng& rng) {
  const double los = std::isinf(kappa) ? 1.0 : std::sqrt(kappa / (kappa + 1.0));
  const double nlos = std::isinf(kappa) ? 0.0 : std::sqrt(1.0 / (kappa + 1.0));
  const double theta = 2.0 * std::numbers::pi * uniform01(rng);
  // CN(0, 1): independent real and imaginary parts with variance 1/2 each.
  const double re = standard_normal(rng) * std::sqrt(0.5);
  const double im = standard_normal(rng) * std::sqrt(0.5);
  return los * std::polar(1.0, theta) + nlos * std::complex<double>(re, im);
}

/// Unit-average-power Rician gains, one per sensor.
inline ChannelDraw draw_rician(const SystemParams& params, std::uint64_t seed) {
  if (!std::isfinite(params.rician_ratio_db)) {
    throw std::invalid_argument("draw_rician: rician_ratio_db must be finite");
  }
  ChannelDraw d;
  d.seed = seed;
  d.gains.resize(static_cast<std::size_t>(params.k_sensors));
  Rng rng = make_rng(seed);
  const double kappa = params.rician_factor();
  for (auto& h : d.gains) h = draw_rician_gain(kappa, rng);
  return d;
}

/// Monte Carlo E[|h|⁻² | |h|² > g_th]. For g_th = 0 the moment is infinite
/// for every finite Rician factor (the density of |h|² is positive at zero),
/// and +inf is returned.
inline Estimate inverse_gain_moment(const SystemParams& params, std::size_t trials,
                                    std::uint64_t seed, unsigned workers = 1) {
  if (!(params.truncation_threshold > 0.0)) {
    return {std::numeric_limits<double>::infinity(), 0.0};
  }
  const double kappa = params.rician_factor();
  const double g_th = params.truncation_threshold;
  const auto acc = monte_carlo<RunningStats>(
      trials, seed, workers, [&](Rng& rng, RunningStats& a) {
        const double g = std::norm(draw_rician_gain(kappa, rng));
        if (g > g_th) a.add(1.0 / g);
      });
  return {acc.mean, acc.std_error()};
}

/// Computes E[|h|⁻²] once per (Rician factor, threshold, trials, seed) and
/// serves later requests from memory.
class InverseGainCache {
 public:
  Estimate get(const SystemParams& params, std::size_t trials = 1000000,
               std::uint64_t seed = 0x1A2B, unsigned workers = 1) {
    const Key key{params.rician_ratio_db, params.truncation_threshold, trials, seed};
    std::lock_guard lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
    return map_.emplace(key, inverse_gain_moment(params, trials, seed, workers)).first->second;
  }

 private:
  using Key = std::tuple<double, double, std::size_t, std::uint64_t>;
  std::mutex mu_;
  std::map<Key, Estimate> map_;
};

/// Probability that a sensor is silenced by truncation.
inline Estimate truncation_probability(const SystemParams& params, std::size_t trials,
                                       std::uint64_t seed, unsigned workers = 1) {
  const double kappa = params.rician_factor();
  const auto acc = monte_carlo<RunningStats>(
      trials, seed, workers, [&](Rng& rng, RunningStats& a) {
        a.add(std::norm(draw_rician_gain(kappa, rng)) <= params.truncation_threshold ? 1.0 : 0.0);
      });
  return {acc.mean, acc.std_error()};
}

namespace detail {
inline void check_inv_gain_moment(double m) {
  if (!std::isfinite(m)) {
    throw std::domain_error(
        "E[|h|^-2] is not finite; configure a truncation threshold g_th > 0");
  }
  if (!(m > 0.0)) throw std::domain_error("E[|h|^-2] must be positive");
}
}  // namespace detail

/// Receive power level P̄ = P₀·P_pl / E[|h|⁻²].
inline double receive_power_budget(const SystemParams& params, double inv_gain_moment) {
  detail::check_inv_gain_moment(inv_gain_moment);
  return params.power_budget_w * params.path_loss / inv_gain_moment;
}

/// Average receive SNR (linear): P₀·P_pl / (N₀·F·B·E[|h|⁻²]).
inline double receive_snr(const SystemParams& params, double inv_gain_moment) {
  detail::check_inv_gain_moment(inv_gain_moment);
  return params.power_budget_w * params.path_loss /
         (params.effective_noise_density() * params.bandwidth_hz * inv_gain_moment);
}

/// Inverse of receive_snr: the power budget P₀ achieving `snr_linear`.
inline double power_budget_for_snr(const SystemParams& params, double inv_gain_moment,
                                   double snr_linear) {
  detail::check_inv_gain_moment(inv_gain_moment);
  return snr_linear * params.effective_noise_density() * params.bandwidth_hz *
         inv_gain_moment / params.path_loss;
}

/// Post-inversion received symbol y = √P_rx Σ s_k + z with real z ~ N(0, σ²).
inline double transmit_over_mac(std::span<const double> symbols, double p_rx,
                                double noise_power, Rng& rng) {
  if (!(noise_power >= 0.0)) {
    throw std::invalid_argument("transmit_over_mac: noise_power must be >= 0");
  }
  double sum = 0.0;
  for (double s : symbols) sum += s;
  double y = std::sqrt(p_rx) * sum;
  if (noise_power > 0.0) y += std::sqrt(noise_power) * standard_normal(rng);
  return y;
}

inline double transmit_over_mac(std::span<const double> symbols, double p_rx,
                                double noise_power, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return transmit_over_mac(symbols, p_rx, noise_power, rng);
}

/// AirPooling air latency N / B (seconds); independent of K.
inline double airpool_latency(const SystemParams& params) {
  return static_cast<double>(params.n_features) / params.bandwidth_hz;
}

/// Digital OFDMA baseline latency K·N·Q / (B·log₂(1 + SNR·K)) (seconds).
inline double digital_latency(const SystemParams& params, int q_bits, double snr_rx) {
  if (q_bits < 1) throw std::invalid_argument("digital_latency: q_bits must be >= 1");
  if (!(snr_rx > 0.0)) throw std::invalid_argument("digital_latency: snr_rx must be > 0");
  const double k = params.k_sensors;
  return k * params.n_features * q_bits /
         (params.bandwidth_hz * std::log2(1.0 + snr_rx * k));
}

}  // namespace airpool
