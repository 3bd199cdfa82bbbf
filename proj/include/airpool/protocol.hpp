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

// The generalized AirPooling protocol: power-function pre-processing,
// normalization, over-the-air aggregation, de-normalization and ramp-root
// post-processing, plus ground-truth pooling.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "airpool/channel.hpp"
#include "airpool/features.hpp"
#include "airpool/montecarlo.hpp"

namespace airpool {

inline constexpr double kAlphaMax = 128.0;

enum class PoolingKind { Average, Max, WeightedSum };

struct PoolingMode {
  PoolingKind kind = PoolingKind::Average;
  std::vector<double> weights;  // WeightedSum only

  static PoolingMode average() { return {PoolingKind::Average, {}}; }
  static PoolingMode max() { return {PoolingKind::Max, {}}; }
  static PoolingMode weighted_sum(std::vector<double> w) {
    for (double x : w) {
      if (!std::isfinite(x)) throw std::invalid_argument("weights must be finite");
    }
    return {PoolingKind::WeightedSum, std::move(w)};
  }

  std::string name() const {
    switch (kind) {
      case PoolingKind::Average: return "average";
      case PoolingKind::Max: return "max";
      case PoolingKind::WeightedSum: return "weighted_sum";
    }
    return "unknown";
  }
};

/// K×N feature matrix, one row per sensor.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Tunable state of one AirPooling deployment.
///
/// Average mode uses β = K^α, which is K at the standard α = 1 setting and
/// makes the noiseless output (1/K)‖f‖_α for α > 1.
struct AirPoolConfig {
  PoolingMode mode;
  double alpha = 1.0;
  double beta = 1.0;
  double p_rx_w = 1.0;
  double noise_power_w = 0.0;
  MomentSet moments;

  void validate(std::size_t k) const {
    if (!(alpha >= 1.0 && alpha <= kAlphaMax)) {
      throw std::invalid_argument("AirPoolConfig: alpha must lie in [1, 128]");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
      throw std::invalid_argument("AirPoolConfig: beta must be positive");
    }
    if (!(p_rx_w > 0.0)) throw std::invalid_argument("AirPoolConfig: p_rx must be > 0");
    if (!(noise_power_w >= 0.0)) {
      throw std::invalid_argument("AirPoolConfig: noise power must be >= 0");
    }
    if (moments.alpha != alpha) {
      throw std::invalid_argument("AirPoolConfig: moments computed for a different alpha");
    }
    const double kd = static_cast<double>(k);
    switch (mode.kind) {
      case PoolingKind::Average:
        if (std::abs(beta - std::pow(kd, alpha)) > 1e-9 * std::pow(kd, alpha)) {
          throw std::invalid_argument("AirPoolConfig: average mode requires beta = K^alpha");
        }
        break;
      case PoolingKind::WeightedSum:
        if (alpha != 1.0 || beta != kd) {
          throw std::invalid_argument("AirPoolConfig: weighted sum requires alpha = 1, beta = K");
        }
        if (mode.weights.size() != k) {
          throw std::invalid_argument("AirPoolConfig: one weight per sensor required");
        }
        break;
      case PoolingKind::Max:
        break;
    }
  }

  /// Checks the receive-power constraint P_rx ≤ P̄.
  void check_power(double p_bar) const {
    if (p_rx_w > p_bar * (1.0 + 1e-12)) {
      throw std::invalid_argument("AirPoolConfig: p_rx exceeds the receive power budget");
    }
  }
};

inline AirPoolConfig make_average_config(const FeatureModel& model, std::size_t k,
                                         double p_rx, double noise_power,
                                         double alpha = 1.0) {
  AirPoolConfig c;
  c.mode = PoolingMode::average();
  c.alpha = alpha;
  c.beta = std::pow(static_cast<double>(k), alpha);
  c.p_rx_w = p_rx;
  c.noise_power_w = noise_power;
  c.moments = normalization_moments(model, alpha);
  c.validate(k);
  return c;
}

inline AirPoolConfig make_max_config(const FeatureModel& model, std::size_t k, double alpha,
                                     double beta, double p_rx, double noise_power) {
  AirPoolConfig c;
  c.mode = PoolingMode::max();
  c.alpha = alpha;
  c.beta = beta;
  c.p_rx_w = p_rx;
  c.noise_power_w = noise_power;
  c.moments = normalization_moments(model, alpha);
  c.validate(k);
  return c;
}

inline AirPoolConfig make_weighted_sum_config(const FeatureModel& model,
                                              std::vector<double> weights, double p_rx,
                                              double noise_power) {
  AirPoolConfig c;
  const std::size_t k = weights.size();
  c.mode = PoolingMode::weighted_sum(std::move(weights));
  c.alpha = 1.0;
  c.beta = static_cast<double>(k);
  c.p_rx_w = p_rx;
  c.noise_power_w = noise_power;
  c.moments = normalization_moments(model, 1.0);
  c.validate(k);
  return c;
}

/// Exact average, maximum or Σ w_k f_k.
inline double true_pool(std::span<const double> features, const PoolingMode& mode) {
  if (features.empty()) throw std::invalid_argument("true_pool: no features");
  switch (mode.kind) {
    case PoolingKind::Average:
      return std::accumulate(features.begin(), features.end(), 0.0) /
             static_cast<double>(features.size());
    case PoolingKind::Max:
      return *std::max_element(features.begin(), features.end());
    case PoolingKind::WeightedSum: {
      if (mode.weights.size() != features.size()) {
        throw std::invalid_argument("true_pool: weight count does not match feature count");
      }
      double s = 0.0;
      for (std::size_t i = 0; i < features.size(); ++i) s += mode.weights[i] * features[i];
      return s;
    }
  }
  return 0.0;
}

namespace detail {

// Sensor-side pre-processed value v_k (weighted sum scales by K·w_k first).
inline double preprocess_value(double f, std::size_t sensor, std::size_t k,
                               const AirPoolConfig& cfg) {
  if (cfg.mode.kind == PoolingKind::WeightedSum) {
    return static_cast<double>(k) * cfg.mode.weights[sensor] * f;
  }
  return f == 0.0 ? 0.0 : std::pow(f, cfg.alpha);
}

}  // namespace detail

/// Symbols s_k = (f_k^α − η_α) / ν_α.
inline void preprocess_and_modulate_into(std::span<const double> features,
                                         const AirPoolConfig& cfg, std::span<double> out) {
  if (!(cfg.moments.nu_sq > 0.0)) {
    throw std::domain_error("preprocess_and_modulate: nu_alpha = 0 (constant features)");
  }
  const double nu = cfg.moments.nu();
  const std::size_t k = features.size();
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = (detail::preprocess_value(features[i], i, k, cfg) - cfg.moments.eta) / nu;
  }
}

inline std::vector<double> preprocess_and_modulate(std::span<const double> features,
                                                   const AirPoolConfig& cfg) {
  for (double f : features) {
    if (cfg.mode.kind != PoolingKind::WeightedSum && !(f >= 0.0)) {
      throw std::invalid_argument("preprocess_and_modulate: features must be >= 0");
    }
  }
  std::vector<double> s(features.size());
  preprocess_and_modulate_into(features, cfg, s);
  return s;
}

/// v̂ = (ν_α / √P_rx)·y + η_α·K.
inline double denormalize(double y, const AirPoolConfig& cfg, std::size_t k_sensors) {
  return cfg.moments.nu() / std::sqrt(cfg.p_rx_w) * y +
         cfg.moments.eta * static_cast<double>(k_sensors);
}

/// ĝ = [(v̂/β)⁺]^{1/α}; the ramp is skipped for weighted sums.
inline double postprocess(double v_hat, const AirPoolConfig& cfg) {
  if (cfg.mode.kind == PoolingKind::WeightedSum) return v_hat / cfg.beta;
  const double r = std::max(v_hat, 0.0) / cfg.beta;
  if (r == 0.0) return 0.0;
  return cfg.alpha == 1.0 ? r : std::pow(r, 1.0 / cfg.alpha);
}

/// Noise-free output g̃ = (Σ v_k / β)^{1/α}.
inline double noiseless_pool(std::span<const double> features, const AirPoolConfig& cfg) {
  const std::size_t k = features.size();
  double v = 0.0;
  for (std::size_t i = 0; i < k; ++i) v += detail::preprocess_value(features[i], i, k, cfg);
  return postprocess(v, cfg);
}

/// De-normalized aggregate v̂ of one dimension. Algebraically this is
/// denormalize(transmit_over_mac(preprocess_and_modulate(f))); it is evaluated
/// as Σ v_k + (ν_α/√P_rx)·z with the same noise draw, because for large α the
/// offsets η_α·K dwarf Σ v_k and the literal chain cancels to garbage in double.
inline double received_aggregate(std::span<const double> features, const AirPoolConfig& cfg,
                                 Rng& rng, std::span<const char> active = {}) {
  if (!(cfg.moments.nu_sq > 0.0)) {
    throw std::domain_error("airpool: nu_alpha = 0 (constant features)");
  }
  const std::size_t k = features.size();
  double v = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!active.empty() && !active[i]) continue;
    v += detail::preprocess_value(features[i], i, k, cfg);
  }
  if (cfg.noise_power_w > 0.0) {
    const double z = std::sqrt(cfg.noise_power_w) * standard_normal(rng);
    v += cfg.moments.nu() / std::sqrt(cfg.p_rx_w) * z;
  }
  return v;
}

/// Single-dimension pass: modulate, transmit, de-normalize, post-process.
inline double airpool_dimension(std::span<const double> features, const AirPoolConfig& cfg,
                                Rng& rng) {
  return postprocess(received_aggregate(features, cfg, rng), cfg);
}

struct RoundStats {
  // Sensor transmissions silenced by truncated channel inversion.
  std::size_t truncated_transmissions = 0;
};

/// One AirPooling round over all N dimensions. Dimension n draws noise (and,
/// with a positive truncation threshold, fading) from stream n of `seed`.
inline std::vector<double> airpool_round(const FeatureMatrix& features,
                                         const AirPoolConfig& cfg,
                                         const SystemParams& params, std::uint64_t seed,
                                         RoundStats* stats = nullptr) {
  const std::size_t k = features.rows();
  const std::size_t n = features.cols();
  cfg.validate(k);
  for (double f : features.data()) {
    if (cfg.mode.kind != PoolingKind::WeightedSum && !(f >= 0.0)) {
      throw std::invalid_argument("airpool_round: features must be >= 0");
    }
  }
  const bool truncate = params.truncation_threshold > 0.0;
  const double kappa = params.rician_factor();
  std::vector<double> out(n);
  std::vector<double> column(k);
  std::vector<char> mask(k, 1);
  for (std::size_t d = 0; d < n; ++d) {
    Rng rng = make_rng(seed, d);
    for (std::size_t r = 0; r < k; ++r) column[r] = features(r, d);
    if (!truncate) {
      out[d] = airpool_dimension(column, cfg, rng);
      continue;
    }
    std::size_t active = 0;
    for (std::size_t r = 0; r < k; ++r) {
      mask[r] = std::norm(draw_rician_gain(kappa, rng)) > params.truncation_threshold;
      active += mask[r] ? 1 : 0;
    }
    if (stats) stats->truncated_transmissions += k - active;
    out[d] = postprocess(received_aggregate(column, cfg, rng, mask), cfg);
  }
  return out;
}

}  // namespace airpool
