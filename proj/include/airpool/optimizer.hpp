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

// Selection of the configuration parameter α: closed form, low-SNR and
// averaging rules, brute-force search and linear calibration.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "airpool/analysis.hpp"
#include "airpool/features.hpp"
#include "airpool/protocol.hpp"
#include "airpool/specfun.hpp"

namespace airpool {

enum class AlphaMethod { ClosedForm, LowSnrRule, AverageRule, BruteForce, Calibrated };

inline std::string to_string(AlphaMethod m) {
  switch (m) {
    case AlphaMethod::ClosedForm: return "closed_form";
    case AlphaMethod::LowSnrRule: return "low_snr_rule";
    case AlphaMethod::AverageRule: return "average_rule";
    case AlphaMethod::BruteForce: return "brute_force";
    case AlphaMethod::Calibrated: return "calibrated";
  }
  return "unknown";
}

struct ProfilePoint {
  double alpha = 1.0;
  double value = 0.0;
  double std_error = 0.0;
  double beta = 1.0;
};

struct AlphaDecision {
  double alpha_star = 1.0;
  AlphaMethod method = AlphaMethod::AverageRule;
  double c_const = 0.0;  // C = ln(√2·P/(K·σ²))
  double a_const = 0.0;  // A = C/(C + ln K)
  double w_arg = 0.0;    // argument of W₀
  double rho0 = 0.0;
  // δ̂ + ε_m for analytic decisions, empirical D for brute force.
  double objective_value = 0.0;
  double beta = 1.0;
  bool clamped = false;
  std::string note;
  std::vector<ProfilePoint> profile;  // brute force only
};

/// Ascending geometric grid of `points` values from lo to hi inclusive.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) {
    throw std::invalid_argument("geometric_grid: need 0 < lo < hi and >= 2 points");
  }
  std::vector<double> g(points);
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = lo * std::exp(step * static_cast<double>(i));
  g.front() = lo;
  g.back() = hi;
  return g;
}

inline std::vector<double> default_alpha_grid() { return geometric_grid(1.0, kAlphaMax, 64); }

/// ρ₀ = √2·K / (e·E[f_max²]·ln K); below it α = 1 is optimal.
inline double low_snr_threshold(std::size_t k, double e_fmax_sq) {
  if (k < 2) throw std::invalid_argument("low_snr_threshold: k must be >= 2");
  if (!(e_fmax_sq > 0.0)) throw std::invalid_argument("low_snr_threshold: E[f_max^2] must be > 0");
  const double kd = static_cast<double>(k);
  return std::numbers::sqrt2 * kd / (std::numbers::e * e_fmax_sq * std::log(kd));
}

/// δ̂(α) + ε_m(α), the surrogate the closed form minimizes.
inline double surrogate_objective(double alpha, std::size_t k, double p_bar, double noise_power,
                                  double e_fmax_sq) {
  return delta_hat(alpha, p_bar, noise_power) + epsilon_max(k, alpha, e_fmax_sq);
}

/// LHS − RHS of the stationarity condition of the surrogate:
/// 2e⁻¹(Kσ²/(√2P))^{1/α}(1 + ln(√2P/σ²)/α) − E[f_max²]·ln K/α².
inline double alpha_stationarity_residual(double alpha, std::size_t k, double p_bar,
                                          double noise_power, double e_fmax_sq) {
  if (!(alpha >= 1.0)) throw std::domain_error("stationarity residual: alpha must be >= 1");
  const double kd = static_cast<double>(k);
  const double lx = std::log(kd * noise_power / (std::numbers::sqrt2 * p_bar));
  const double lhs = 2.0 / std::numbers::e * std::exp(lx / alpha) *
                     (1.0 + std::log(std::numbers::sqrt2 * p_bar / noise_power) / alpha);
  const double rhs = e_fmax_sq * std::log(kd) / (alpha * alpha);
  return lhs - rhs;
}

/// Sign-change root of the stationarity residual on [lo, hi] by bisection.
inline std::optional<double> stationarity_root(std::size_t k, double p_bar, double noise_power,
                                               double e_fmax_sq, double lo = 1.0,
                                               double hi = kAlphaMax) {
  const auto f = [&](double a) {
    return alpha_stationarity_residual(a, k, p_bar, noise_power, e_fmax_sq);
  };
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) return std::nullopt;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Closed-form α* = C / (W₀(L) + A), clamped to [1, 128].
/// Requires K ≥ 4 and P/σ² > K; throws std::domain_error otherwise.
inline AlphaDecision alpha_closed_form(std::size_t k, double p_bar, double noise_power,
                                       double e_fmax_sq) {
  if (k < 4) throw std::domain_error("alpha_closed_form: requires K >= 4");
  if (!(noise_power > 0.0) || !(p_bar / noise_power > static_cast<double>(k))) {
    throw std::domain_error("alpha_closed_form: requires P/sigma^2 > K");
  }
  if (!(e_fmax_sq > 0.0)) throw std::domain_error("alpha_closed_form: E[f_max^2] must be > 0");
  const double kd = static_cast<double>(k);
  const double lk = std::log(kd);
  AlphaDecision d;
  d.method = AlphaMethod::ClosedForm;
  d.c_const = std::log(std::numbers::sqrt2 * p_bar / (kd * noise_power));
  d.a_const = d.c_const / (d.c_const + lk);
  d.w_arg = 2.0 * d.c_const * (d.c_const + lk) /
            (std::exp(1.0 + d.a_const) * e_fmax_sq * lk);
  d.rho0 = low_snr_threshold(k, e_fmax_sq);
  double a = d.c_const / (specfun::lambert_w0(d.w_arg) + d.a_const);
  if (a < 1.0 || a > kAlphaMax) {
    d.clamped = true;
    a = std::clamp(a, 1.0, kAlphaMax);
  }
  d.alpha_star = a;
  d.objective_value = surrogate_objective(a, k, p_bar, noise_power, e_fmax_sq);
  return d;
}

/// Thread-safe memo of β*(α) keyed by (model, K, α, trials, seed).
class BetaStarCache {
 public:
  BetaStarEstimate get(const FeatureModel& model, std::size_t k, double alpha,
                       std::size_t trials, std::uint64_t seed, unsigned workers = 1) {
    const Key key{model.cache_key(), k, alpha, trials, seed};
    {
      std::lock_guard lock(mu_);
      if (auto it = map_.find(key); it != map_.end()) return it->second;
    }
    const BetaStarEstimate est = beta_star(model, k, alpha, trials, seed, workers);
    std::lock_guard lock(mu_);
    return map_.emplace(key, est).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  using Key = std::tuple<std::string, std::size_t, double, std::size_t, std::uint64_t>;
  mutable std::mutex mu_;
  std::map<Key, BetaStarEstimate> map_;
};

struct BruteForceOptions {
  std::size_t trials = 100000;
  std::size_t beta_trials = 100000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  BetaStarCache* cache = nullptr;
};

/// Configuration used at one α: Average takes β = K^α, Max takes β*(α).
inline AirPoolConfig config_for_alpha(const FeatureModel& model, const PoolingMode& mode,
                                      std::size_t k, double alpha, double p_rx,
                                      double noise_power, const BruteForceOptions& opt) {
  switch (mode.kind) {
    case PoolingKind::Average:
      return make_average_config(model, k, p_rx, noise_power, alpha);
    case PoolingKind::Max: {
      const std::uint64_t beta_seed = derive_seed(opt.seed, 0xBE7A);
      const BetaStarEstimate b =
          opt.cache ? opt.cache->get(model, k, alpha, opt.beta_trials, beta_seed, opt.workers)
                    : beta_star(model, k, alpha, opt.beta_trials, beta_seed, opt.workers);
      return make_max_config(model, k, alpha, b.beta, p_rx, noise_power);
    }
    case PoolingKind::WeightedSum:
      if (alpha != 1.0) throw std::invalid_argument("weighted sum supports alpha = 1 only");
      return make_weighted_sum_config(model, mode.weights, p_rx, noise_power);
  }
  throw std::logic_error("config_for_alpha: unknown mode");
}

/// Grid search of the empirical D(α). Every grid point reuses the same trial
/// seed (common random numbers); ties go to the smaller α.
inline AlphaDecision brute_force_alpha(const FeatureModel& model, const PoolingMode& mode,
                                       std::size_t k, double p_rx, double noise_power,
                                       std::span<const double> alpha_grid,
                                       const BruteForceOptions& opt = {}) {
  if (alpha_grid.empty()) throw std::invalid_argument("brute_force_alpha: empty grid");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end())) {
    throw std::invalid_argument("brute_force_alpha: grid must be ascending");
  }
  if (opt.trials < 10000) throw std::invalid_argument("brute_force_alpha: needs >= 1e4 trials");
  AlphaDecision d;
  d.method = AlphaMethod::BruteForce;
  for (double a : alpha_grid) {
    const AirPoolConfig cfg = config_for_alpha(model, mode, k, a, p_rx, noise_power, opt);
    const ErrorBreakdown e = estimate_errors(model, cfg, k, opt.trials, opt.seed, opt.workers);
    d.profile.push_back({a, e.d_total, e.std_errors[0], cfg.beta});
  }
  const auto best = std::min_element(
      d.profile.begin(), d.profile.end(), [](const ProfilePoint& x, const ProfilePoint& y) {
        return std::tie(x.value, x.alpha) < std::tie(y.value, y.alpha);
      });
  d.alpha_star = best->alpha;
  d.objective_value = best->value;
  d.beta = best->beta;
  return d;
}

struct SelectOptions {
  std::size_t moment_trials = 1000000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  BruteForceOptions brute_force{};
  std::vector<double> alpha_grid = default_alpha_grid();
};

/// α (and β) for a pooling mode: averaging rule for Average and WeightedSum;
/// for Max the low-SNR rule below ρ₀, the closed form when K ≥ 4 and P/σ² > K,
/// and brute force otherwise.
inline AlphaDecision select_alpha(const PoolingMode& mode, const FeatureModel& model,
                                  std::size_t k, double p_bar, double noise_power,
                                  const SelectOptions& opt = {}) {
  const double kd = static_cast<double>(k);
  AlphaDecision d;
  if (mode.kind != PoolingKind::Max || k < 2) {
    d.method = AlphaMethod::AverageRule;
    d.alpha_star = 1.0;
    d.beta = mode.kind == PoolingKind::Max ? 1.0 : kd;
    if (k < 2) d.note = "single sensor";
    return d;
  }
  const double e_fmax_sq =
      max_second_moment(model, k, opt.moment_trials, opt.seed, opt.workers).value;
  const double rho0 = low_snr_threshold(k, e_fmax_sq);
  const double snr = noise_power > 0.0 ? p_bar / noise_power
                                       : std::numeric_limits<double>::infinity();
  if (snr <= rho0) {
    d.method = AlphaMethod::LowSnrRule;
    d.alpha_star = 1.0;
    d.rho0 = rho0;
    d.beta = beta_star(model, k, 1.0, opt.brute_force.beta_trials, opt.seed, opt.workers).beta;
    d.objective_value = surrogate_objective(1.0, k, p_bar, noise_power, e_fmax_sq);
    return d;
  }
  if (k >= 4 && snr > kd && std::isfinite(snr)) {
    d = alpha_closed_form(k, p_bar, noise_power, e_fmax_sq);
  } else {
    BruteForceOptions bf = opt.brute_force;
    bf.workers = opt.workers;
    d = brute_force_alpha(model, mode, k, p_bar, noise_power, opt.alpha_grid, bf);
    d.note = k < 4 ? "K < 4: closed form not applicable"
                   : (std::isfinite(snr) ? "rho0 < P/sigma^2 <= K: closed form not applicable"
                                         : "noiseless: closed form not applicable");
    d.rho0 = rho0;
    return d;
  }
  d.beta = beta_star(model, k, d.alpha_star, opt.brute_force.beta_trials, opt.seed, opt.workers)
               .beta;
  return d;
}

struct CalibrationConstants {
  double c1 = 1.0;
  double c2 = 0.0;
  double fit_error = 0.0;  // mean squared residual

  double apply(double alpha) const { return std::clamp(c1 * alpha + c2, 1.0, kAlphaMax); }
};

struct CalibrationPair {
  double alpha_closed = 1.0;
  double alpha_reference = 1.0;
};

/// Least-squares α_ref ≈ c₁·α_closed + c₂.
inline CalibrationConstants fit_calibration(std::span<const CalibrationPair> pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("fit_calibration: needs >= 3 pairs");
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += p.alpha_closed;
    my += p.alpha_reference;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    sxx += (p.alpha_closed - mx) * (p.alpha_closed - mx);
    sxy += (p.alpha_closed - mx) * (p.alpha_reference - my);
  }
  if (!(sxx > 1e-24 * std::max(1.0, mx * mx))) {
    throw std::invalid_argument("fit_calibration: degenerate design (equal closed-form alphas)");
  }
  CalibrationConstants c;
  c.c1 = sxy / sxx;
  c.c2 = my - c.c1 * mx;
  double sse = 0.0;
  for (const auto& p : pairs) {
    const double r = p.alpha_reference - (c.c1 * p.alpha_closed + c.c2);
    sse += r * r;
  }
  c.fit_error = sse / n;
  return c;
}

/// Fit from (SNR, reference α) pairs, computing the closed-form α per SNR.
inline CalibrationConstants fit_calibration(std::span<const std::pair<double, double>> snr_alpha,
                                            std::size_t k, double e_fmax_sq) {
  std::vector<CalibrationPair> pairs;
  for (const auto& [snr, ref] : snr_alpha) {
    pairs.push_back({alpha_closed_form(k, snr, 1.0, e_fmax_sq).alpha_star, ref});
  }
  return fit_calibration(pairs);
}

inline AlphaDecision calibrated_alpha(const CalibrationConstants& c, std::size_t k,
                                      double p_bar, double noise_power, double e_fmax_sq) {
  AlphaDecision d = alpha_closed_form(k, p_bar, noise_power, e_fmax_sq);
  const double raw = c.c1 * d.alpha_star + c.c2;
  d.alpha_star = c.apply(d.alpha_star);
  d.clamped = d.clamped || raw != d.alpha_star;
  d.method = AlphaMethod::Calibrated;
  d.objective_value = surrogate_objective(d.alpha_star, k, p_bar, noise_power, e_fmax_sq);
  return d;
}

}  // namespace airpool
