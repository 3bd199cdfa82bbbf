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

// Error estimation and closed-form error / accuracy bounds.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "airpool/features.hpp"
#include "airpool/montecarlo.hpp"
#include "airpool/protocol.hpp"
#include "airpool/specfun.hpp"

namespace airpool {

/// Monte Carlo error components of one configuration and the matching bounds.
struct ErrorBreakdown {
  double d_total = 0.0;  // E[(ĝ − g)²]
  double d_chan = 0.0;   // E[(ĝ − g̃)²]
  double d_appr = 0.0;   // E[(g̃ − g)²]
  double delta_bound = 0.0;
  double delta_hat = 0.0;
  double epsilon_bound = 0.0;
  int c0 = 1;
  std::array<double, 3> std_errors{};  // total, chan, appr
  double epsilon_std_error = 0.0;
  // Paired estimates of c0·(chan + appr) − total and total − chan − appr.
  double decomposition_slack = 0.0;
  double decomposition_slack_se = 0.0;
  double cross_term = 0.0;
  double cross_term_se = 0.0;
  std::size_t trials = 0;
};

/// (σ²ν_α²/P_rx)^{1/α} from a precomputed ν_α².
inline double delta_bound_from_nu(double nu_sq, double alpha, double p_rx, double noise_power) {
  if (!(alpha >= 1.0)) throw std::domain_error("delta_bound: alpha must be >= 1");
  if (noise_power == 0.0 || nu_sq == 0.0) return 0.0;
  return std::exp(std::log(noise_power * nu_sq / p_rx) / alpha);
}

inline double delta_bound(const FeatureModel& model, double alpha, double p_rx,
                          double noise_power) {
  if (!(alpha >= 1.0)) throw std::domain_error("delta_bound: alpha must be >= 1");
  if (noise_power == 0.0) return 0.0;
  const MomentSet m = normalization_moments(model, alpha);
  if (!std::isfinite(m.log_nu_sq)) return 0.0;
  return std::exp((std::log(noise_power / p_rx) + m.log_nu_sq) / alpha);
}

/// Γ-function form of δ for unit rectified-Gaussian features.
inline double delta_bound_gamma_form(double alpha, double p_rx, double noise_power) {
  if (!(alpha >= 1.0)) throw std::domain_error("delta_bound: alpha must be >= 1");
  if (noise_power == 0.0) return 0.0;
  using std::numbers::pi;
  const double lg_full = specfun::ln_gamma(alpha + 0.5);
  const double lg_half = specfun::ln_gamma(0.5 * (alpha + 1.0));
  const double bracket_ratio = std::exp(2.0 * lg_half - lg_full) / (2.0 * std::sqrt(pi));
  const double log_inner = std::log(noise_power / (p_rx * std::sqrt(pi))) +
                           (alpha - 1.0) * std::numbers::ln2 + lg_full +
                           std::log1p(-bracket_ratio);
  return std::exp(log_inner / alpha);
}

/// Large-α surrogate δ̂ = 2e⁻¹·α·(σ²/(√2·P))^{1/α}.
inline double delta_hat(double alpha, double p_rx, double noise_power) {
  if (!(alpha >= 1.0)) throw std::domain_error("delta_hat: alpha must be >= 1");
  if (noise_power == 0.0) return 0.0;
  const double x = noise_power / (std::numbers::sqrt2 * p_rx);
  return 2.0 / std::numbers::e * alpha * std::exp(std::log(x) / alpha);
}

/// ∂δ̂/∂α = 2e⁻¹·x^{1/α}·(1 + ln(√2·P/σ²)/α).
inline double delta_hat_derivative(double alpha, double p_rx, double noise_power) {
  if (!(alpha >= 1.0)) throw std::domain_error("delta_hat: alpha must be >= 1");
  if (noise_power == 0.0) return 0.0;
  const double lx = std::log(noise_power / (std::numbers::sqrt2 * p_rx));
  return 2.0 / std::numbers::e * std::exp(lx / alpha) * (1.0 - lx / alpha);
}

/// ε_m = (1 − K^{−1/α})·E[f_max²].
inline double epsilon_max(std::size_t k, double alpha, double e_fmax_sq) {
  if (!(alpha >= 1.0)) throw std::domain_error("epsilon_bound: alpha must be >= 1");
  return -std::expm1(-std::log(static_cast<double>(k)) / alpha) * e_fmax_sq;
}

/// ε_m for Max (analytic given a Monte Carlo E[f_max²]), ε_a = E[((1/K)‖f‖_α − g_avg)²]
/// for Average (Monte Carlo), 0 for weighted sums.
inline Estimate epsilon_bound(const FeatureModel& model, const PoolingMode& mode,
                              std::size_t k, double alpha, std::size_t trials,
                              std::uint64_t seed, unsigned workers = 1) {
  if (!(alpha >= 1.0)) throw std::domain_error("epsilon_bound: alpha must be >= 1");
  if (k < 1) throw std::invalid_argument("epsilon_bound: k must be >= 1");
  switch (mode.kind) {
    case PoolingKind::Max: {
      if (k == 1) return {0.0, 0.0};
      const Estimate m2 = max_second_moment(model, k, trials, seed, workers);
      const double factor = epsilon_max(k, alpha, 1.0);
      return {factor * m2.value, factor * m2.std_error};
    }
    case PoolingKind::Average: {
      if (alpha == 1.0 || k == 1) return {0.0, 0.0};
      const double kd = static_cast<double>(k);
      const auto acc = monte_carlo<RunningStats>(
          trials, seed, workers, [&](Rng& rng, RunningStats& a) {
            thread_local std::vector<double> f;
            f.resize(k);
            sample_features_into(model, f, rng);
            double avg = 0.0;
            for (double v : f) avg += v;
            avg /= kd;
            const double diff = alpha_norm(f, alpha) / kd - avg;
            a.add(diff * diff);
          });
      return {acc.mean, acc.std_error()};
    }
    case PoolingKind::WeightedSum:
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

/// Paired Monte Carlo estimate of D, D_chan and D_appr: each trial draws one
/// feature vector and one noise sample and evaluates ĝ, g̃ and g on them.
inline ErrorBreakdown estimate_errors(const FeatureModel& model, const AirPoolConfig& cfg,
                                      std::size_t k, std::size_t trials, std::uint64_t seed,
                                      unsigned workers = 1) {
  if (trials < 10000) throw std::invalid_argument("estimate_errors: needs >= 1e4 trials");
  cfg.validate(k);
  const int c0 = cfg.mode.kind == PoolingKind::Max ? 2 : 1;
  const double eps_factor = epsilon_max(k, cfg.alpha, 1.0);
  const double kd = static_cast<double>(k);
  // total, chan, appr, slack, cross, epsilon term
  using Acc = StatsBundle<6>;
  const auto acc = monte_carlo<Acc>(trials, seed, workers, [&](Rng& rng, Acc& a) {
    thread_local std::vector<double> f;
    f.resize(k);
    sample_features_into(model, f, rng);
    const double g = true_pool(f, cfg.mode);
    const double g_tilde = noiseless_pool(f, cfg);
    const double g_hat = airpool_dimension(f, cfg, rng);
    const double tot = (g_hat - g) * (g_hat - g);
    const double chan = (g_hat - g_tilde) * (g_hat - g_tilde);
    const double appr = (g_tilde - g) * (g_tilde - g);
    a[0].add(tot);
    a[1].add(chan);
    a[2].add(appr);
    a[3].add(c0 * (chan + appr) - tot);
    a[4].add(tot - chan - appr);
    double eps = 0.0;
    if (cfg.mode.kind == PoolingKind::Max) {
      const double fmax = *std::max_element(f.begin(), f.end());
      eps = eps_factor * fmax * fmax;
    } else if (cfg.mode.kind == PoolingKind::Average && cfg.alpha != 1.0) {
      double avg = 0.0;
      for (double v : f) avg += v;
      avg /= kd;
      const double diff = alpha_norm(f, cfg.alpha) / kd - avg;
      eps = diff * diff;
    }
    a[5].add(eps);
  });
  ErrorBreakdown out;
  out.trials = trials;
  out.c0 = c0;
  out.d_total = acc[0].mean;
  out.d_chan = acc[1].mean;
  out.d_appr = acc[2].mean;
  out.std_errors = {acc[0].std_error(), acc[1].std_error(), acc[2].std_error()};
  out.decomposition_slack = acc[3].mean;
  out.decomposition_slack_se = acc[3].std_error();
  out.cross_term = acc[4].mean;
  out.cross_term_se = acc[4].std_error();
  out.epsilon_bound = acc[5].mean;
  out.epsilon_std_error = acc[5].std_error();
  out.delta_bound =
      delta_bound_from_nu(cfg.moments.nu_sq, cfg.alpha, cfg.p_rx_w, cfg.noise_power_w);
  out.delta_hat = delta_hat(cfg.alpha, cfg.p_rx_w, cfg.noise_power_w);
  return out;
}

struct TradeoffRow {
  double alpha = 1.0;
  double delta = 0.0;
  double delta_hat = 0.0;
  double epsilon_m = 0.0;
  double sum = 0.0;  // δ + ε_m
};

struct TradeoffCurve {
  std::vector<TradeoffRow> rows;
  double e_fmax_sq = 0.0;
  // Whether the monotonicity premise P/σ² ≥ 1 held and the checks ran.
  bool monotonicity_checked = false;
  std::vector<std::string> diagnostics;
};

/// δ and ε_m along an ascending α grid.
inline TradeoffCurve tradeoff_curve(const FeatureModel& model, std::size_t k, double p_rx,
                                    double noise_power, std::span<const double> alpha_grid,
                                    std::size_t trials = 100000, std::uint64_t seed = 1,
                                    unsigned workers = 1) {
  if (alpha_grid.size() < 2) throw std::invalid_argument("tradeoff_curve: need >= 2 alphas");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end())) {
    throw std::invalid_argument("tradeoff_curve: alpha grid must be ascending");
  }
  TradeoffCurve curve;
  curve.e_fmax_sq = max_second_moment(model, k, trials, seed, workers).value;
  for (double a : alpha_grid) {
    TradeoffRow r;
    r.alpha = a;
    r.delta = delta_bound(model, a, p_rx, noise_power);
    r.delta_hat = delta_hat(a, p_rx, noise_power);
    r.epsilon_m = epsilon_max(k, a, curve.e_fmax_sq);
    r.sum = r.delta + r.epsilon_m;
    curve.rows.push_back(r);
  }
  curve.monotonicity_checked = p_rx >= noise_power;
  if (curve.monotonicity_checked) {
    for (std::size_t i = 1; i < curve.rows.size(); ++i) {
      const auto& prev = curve.rows[i - 1];
      const auto& cur = curve.rows[i];
      if (cur.delta_hat < prev.delta_hat * (1.0 - 1e-12)) {
        curve.diagnostics.push_back("delta_hat decreased at alpha=" + std::to_string(cur.alpha));
      }
      if (cur.delta < prev.delta * (1.0 - 1e-12)) {
        curve.diagnostics.push_back("delta decreased at alpha=" + std::to_string(cur.alpha));
      }
      if (k >= 2 && cur.alpha > prev.alpha && !(cur.epsilon_m < prev.epsilon_m)) {
        curve.diagnostics.push_back("epsilon_m not decreasing at alpha=" +
                                    std::to_string(cur.alpha));
      }
    }
  }
  return curve;
}

/// Margin Δ, clean accuracy R₀ and feature dimension N of a classifier.
struct MarginModel {
  double margin = 1.0;
  double clean_accuracy = 1.0;
  std::size_t n_dims = 1;

  void validate() const {
    if (!(margin > 0.0)) throw std::invalid_argument("MarginModel: margin must be > 0");
    if (!(clean_accuracy >= 0.0 && clean_accuracy <= 1.0)) {
      throw std::invalid_argument("MarginModel: clean accuracy must lie in [0, 1]");
    }
    if (n_dims < 1) throw std::invalid_argument("MarginModel: n_dims must be >= 1");
  }
};

struct AccuracyBounds {
  double markov = 0.0;  // R₀·max(0, 1 − D_Σ/Δ²)
  double chi = 0.0;     // R₀·P(N/2, N·Δ²/(2·D_Σ)), Gaussian Average-mode errors
};

inline AccuracyBounds accuracy_lower_bounds(const MarginModel& m, double d_sigma) {
  m.validate();
  if (!(d_sigma >= 0.0)) throw std::invalid_argument("accuracy_lower_bounds: D_sigma < 0");
  AccuracyBounds b;
  const double d2 = m.margin * m.margin;
  b.markov = m.clean_accuracy * std::max(0.0, 1.0 - d_sigma / d2);
  if (d_sigma == 0.0) {
    b.chi = m.clean_accuracy;
  } else {
    const double n = static_cast<double>(m.n_dims);
    b.chi = m.clean_accuracy * specfun::regularized_gamma_p(0.5 * n, n * d2 / (2.0 * d_sigma));
  }
  return b;
}

struct ErrorBudget {
  double markov = 0.0;
  double chi = 0.0;
};

/// Largest D_Σ meeting `r_target` under either accuracy bound.
inline ErrorBudget required_error_budget(const MarginModel& m, double r_target) {
  m.validate();
  if (!(r_target > 0.0)) throw std::invalid_argument("required_error_budget: target must be > 0");
  if (r_target > m.clean_accuracy) {
    throw std::invalid_argument("required_error_budget: target exceeds clean accuracy");
  }
  const double ratio = r_target / m.clean_accuracy;
  const double d2 = m.margin * m.margin;
  ErrorBudget b;
  b.markov = d2 * (1.0 - ratio);
  if (ratio >= 1.0) {
    b.chi = 0.0;
  } else {
    const double n = static_cast<double>(m.n_dims);
    b.chi = n * d2 / (2.0 * specfun::inverse_regularized_gamma_p(0.5 * n, ratio));
  }
  return b;
}

struct ChiCheck {
  double statistic = 0.0;       // sup |F_emp − F_χ|
  double critical_value = 0.0;  // 1.63/√trials
  double mean_norm_sq = 0.0;
  double expected_norm_sq = 0.0;  // N·s², s = ν₁σ/(√P·K)
  bool passed = false;
};

/// Kolmogorov-Smirnov distance between simulated ‖e‖₂ and the scaled χ(N) law,
/// where e_n = ξ_n / K and ξ_n is the de-normalized channel noise of dimension n.
inline ChiCheck chi_error_check(std::size_t k, std::size_t n_dims, double noise_power,
                                double p_rx, double nu1_sq, std::size_t trials,
                                std::uint64_t seed, unsigned workers = 1) {
  if (k < 1 || n_dims < 1) throw std::invalid_argument("chi_error_check: k, N must be >= 1");
  if (!(noise_power > 0.0) || !(p_rx > 0.0) || !(nu1_sq > 0.0)) {
    throw std::invalid_argument("chi_error_check: noise, power and variance must be > 0");
  }
  if (trials < 2) throw std::invalid_argument("chi_error_check: needs >= 2 trials");
  const double kd = static_cast<double>(k);
  const double nu_scale = std::sqrt(nu1_sq / p_rx);
  struct Acc {
    std::vector<double> norm_sq;
    void merge(const Acc& o) { norm_sq.insert(norm_sq.end(), o.norm_sq.begin(), o.norm_sq.end()); }
  };
  const std::vector<double> zeros(k, 0.0);
  const auto acc = monte_carlo<Acc>(trials, seed, workers, [&](Rng& rng, Acc& a) {
    double s = 0.0;
    for (std::size_t n = 0; n < n_dims; ++n) {
      const double y = transmit_over_mac(zeros, p_rx, noise_power, rng);
      const double e = nu_scale * y / kd;
      s += e * e;
    }
    a.norm_sq.push_back(s);
  });
  std::vector<double> xs = acc.norm_sq;
  std::sort(xs.begin(), xs.end());
  const double scale_sq = nu1_sq * noise_power / (p_rx * kd * kd);
  const double half_n = 0.5 * static_cast<double>(n_dims);
  const double m = static_cast<double>(xs.size());
  ChiCheck out;
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    // ‖e‖ ≤ r ⇔ ‖e‖² ≤ r², so the squared norms give the same distance.
    const double cdf = specfun::regularized_gamma_p(half_n, xs[i] / (2.0 * scale_sq));
    const double lo = static_cast<double>(i) / m;
    const double hi = static_cast<double>(i + 1) / m;
    out.statistic = std::max({out.statistic, cdf - lo, hi - cdf});
  }
  out.mean_norm_sq = sum / m;
  out.expected_norm_sq = static_cast<double>(n_dims) * scale_sq;
  out.critical_value = 1.63 / std::sqrt(m);
  out.passed = out.statistic < out.critical_value;
  return out;
}

/// ((a+b)⁺^{1/α} − a^{1/α})² and |b|^{2/α}, the two sides of the scalar
/// inequality behind the δ bound (a ≥ 0).
inline std::pair<double, double> root_perturbation_sides(double a, double b, double alpha) {
  const double lhs_root = std::pow(std::max(a + b, 0.0), 1.0 / alpha) - std::pow(a, 1.0 / alpha);
  return {lhs_root * lhs_root, std::pow(std::abs(b), 2.0 / alpha)};
}

}  // namespace airpool
