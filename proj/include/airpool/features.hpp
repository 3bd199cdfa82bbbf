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

// Feature-distribution models and the moment estimators that drive
// normalization, the error bounds and the configuration optimizer.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "airpool/montecarlo.hpp"
#include "airpool/specfun.hpp"

namespace airpool {

class InvalidModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an estimate contradicts a bound it must satisfy.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class FeatureKind { RectifiedGaussian, Uniform01, ExponentialUnit, Empirical };

/// Distribution of a single non-negative feature.
///
///   RectifiedGaussian(σ): max(σ·z, 0), z ~ N(0, 1)
///   Uniform01(b):         U(0, b)
///   ExponentialUnit(λ):   Exp(λ)
///   Empirical:            uniform resampling of a fixed sample set
class FeatureModel {
 public:
  static FeatureModel rectified_gaussian(double scale = 1.0) {
    return FeatureModel(FeatureKind::RectifiedGaussian, {scale});
  }
  static FeatureModel uniform01(double upper = 1.0) {
    return FeatureModel(FeatureKind::Uniform01, {upper});
  }
  static FeatureModel exponential_unit(double rate = 1.0) {
    return FeatureModel(FeatureKind::ExponentialUnit, {rate});
  }
  static FeatureModel empirical(std::vector<double> samples) {
    if (samples.empty()) {
      throw InvalidModelError("empirical feature model needs at least one sample");
    }
    for (double v : samples) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidModelError("empirical feature samples must be finite and >= 0");
      }
    }
    FeatureModel m(FeatureKind::Empirical, {});
    m.samples_ = std::make_shared<const std::vector<double>>(std::move(samples));
    return m;
  }

  FeatureKind kind() const { return kind_; }
  const std::vector<double>& parameters() const { return params_; }
  std::span<const double> samples() const {
    return samples_ ? std::span<const double>(*samples_) : std::span<const double>();
  }

  double sample(Rng& rng) const {
    switch (kind_) {
      case FeatureKind::RectifiedGaussian:
        return std::max(params_[0] * standard_normal(rng), 0.0);
      case FeatureKind::Uniform01:
        return params_[0] * airpool::uniform01(rng);
      case FeatureKind::ExponentialUnit:
        return std::exponential_distribution<double>(params_[0])(rng);
      case FeatureKind::Empirical: {
        std::uniform_int_distribution<std::size_t> pick(0, samples_->size() - 1);
        return (*samples_)[pick(rng)];
      }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case FeatureKind::RectifiedGaussian: return "rectified_gaussian";
      case FeatureKind::Uniform01: return "uniform";
      case FeatureKind::ExponentialUnit: return "exponential";
      case FeatureKind::Empirical: return "empirical";
    }
    return "unknown";
  }

  /// Identifies the distribution for caching (empirical models by content).
  std::string cache_key() const {
    std::ostringstream os;
    os.precision(17);
    os << name();
    for (double p : params_) os << ':' << p;
    if (samples_) {
      std::uint64_t h = 1469598103934665603ULL;
      for (double v : *samples_) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof v);
        h = (h ^ bits) * 1099511628211ULL;
      }
      os << ':' << samples_->size() << ':' << h;
    }
    return os.str();
  }

 private:
  FeatureModel(FeatureKind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {
    for (double p : params_) {
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw InvalidModelError(name() + ": parameter must be positive and finite");
      }
    }
  }

  FeatureKind kind_;
  std::vector<double> params_;
  std::shared_ptr<const std::vector<double>> samples_;
};

inline void sample_features_into(const FeatureModel& model, std::span<double> out,
                                 Rng& rng) {
  for (double& f : out) f = model.sample(rng);
}

/// K i.i.d. features, deterministic in `seed`.
inline std::vector<double> sample_features(const FeatureModel& model, std::size_t k,
                                           std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("sample_features: k must be >= 1");
  std::vector<double> out(k);
  Rng rng = make_rng(seed);
  sample_features_into(model, out, rng);
  return out;
}

/// ln E[|f|^s]; −inf when the moment is zero.
inline double log_moment_abs_power(const FeatureModel& model, double s) {
  if (!(s >= 0.0)) throw std::domain_error("moment_abs_power: s must be >= 0");
  if (s == 0.0) return 0.0;
  const auto& p = model.parameters();
  switch (model.kind()) {
    case FeatureKind::RectifiedGaussian:
      // E[f^s] = σ^s · 2^{s/2−1} Γ((s+1)/2) / √π
      return s * std::log(p[0]) - 0.5 * std::log(std::numbers::pi) +
             (0.5 * s - 1.0) * std::numbers::ln2 + specfun::ln_gamma(0.5 * (s + 1.0));
    case FeatureKind::Uniform01:
      return s * std::log(p[0]) - std::log1p(s);
    case FeatureKind::ExponentialUnit:
      return specfun::ln_gamma(s + 1.0) - s * std::log(p[0]);
    case FeatureKind::Empirical: {
      // log-sum-exp over the sample set
      double lmax = -std::numeric_limits<double>::infinity();
      for (double v : model.samples()) {
        if (v > 0.0) lmax = std::max(lmax, s * std::log(v));
      }
      if (std::isinf(lmax)) return lmax;
      double acc = 0.0;
      for (double v : model.samples()) {
        if (v > 0.0) acc += std::exp(s * std::log(v) - lmax);
      }
      return lmax + std::log(acc) - std::log(static_cast<double>(model.samples().size()));
    }
  }
  return 0.0;
}

/// E[|f|^s], evaluated in the log domain.
inline double moment_abs_power(const FeatureModel& model, double s) {
  return std::exp(log_moment_abs_power(model, s));
}

/// Monte Carlo estimate of E[|f|^s] (independent cross-check path).
inline Estimate moment_abs_power_mc(const FeatureModel& model, double s,
                                    std::size_t trials, std::uint64_t seed,
                                    unsigned workers = 1) {
  const auto acc = monte_carlo<RunningStats>(
      trials, seed, workers,
      [&](Rng& rng, RunningStats& a) { a.add(std::pow(model.sample(rng), s)); });
  return {acc.mean, acc.std_error()};
}

struct MomentMethod {
  enum class Kind { Analytic, MonteCarlo };
  Kind kind = Kind::Analytic;
  std::size_t trials = 0;
  std::uint64_t seed = 0;

  static MomentMethod analytic() { return {}; }
  static MomentMethod monte_carlo(std::size_t trials, std::uint64_t seed) {
    return {Kind::MonteCarlo, trials, seed};
  }
};

/// Normalization parameters η_α = E[f^α] and ν_α² = Var[f^α].
struct MomentSet {
  double alpha = 1.0;
  double eta = 0.0;
  double nu_sq = 0.0;
  double log_eta = -std::numeric_limits<double>::infinity();
  double log_nu_sq = -std::numeric_limits<double>::infinity();
  MomentMethod method;
  // Set when cancellation produced a tiny negative variance that was clamped.
  bool clamped = false;
  // Standard errors; zero for the analytic path.
  double eta_se = 0.0;
  double nu_sq_se = 0.0;

  double nu() const { return std::sqrt(nu_sq); }
};

namespace detail {

struct BlockMoments {
  RunningStats v;
  std::vector<double> block_eta;
  std::vector<double> block_nu_sq;
  void merge(const BlockMoments& o) {
    v.merge(o.v);
    if (o.block_eta.empty()) {
      block_eta.push_back(o.v.mean);
      block_nu_sq.push_back(o.v.variance());
    } else {
      block_eta.insert(block_eta.end(), o.block_eta.begin(), o.block_eta.end());
      block_nu_sq.insert(block_nu_sq.end(), o.block_nu_sq.begin(), o.block_nu_sq.end());
    }
  }
};

inline double batch_std_error(const std::vector<double>& xs) {
  RunningStats s;
  for (double x : xs) s.add(x);
  return s.std_error();
}

}  // namespace detail

inline MomentSet normalization_moments(const FeatureModel& model, double alpha,
                                       MomentMethod method = MomentMethod::analytic(),
                                       unsigned workers = 1) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) {
    throw std::domain_error("normalization_moments: alpha must be >= 1");
  }
  MomentSet m;
  m.alpha = alpha;
  m.method = method;
  if (method.kind == MomentMethod::Kind::MonteCarlo) {
    if (method.trials < 10000) {
      throw std::invalid_argument("normalization_moments: Monte Carlo needs >= 1e4 trials");
    }
    const auto acc = monte_carlo<detail::BlockMoments>(
        method.trials, method.seed, workers, [&](Rng& rng, detail::BlockMoments& a) {
          a.v.add(std::pow(model.sample(rng), alpha));
        });
    m.eta = acc.v.mean;
    m.nu_sq = acc.v.variance();
    m.eta_se = detail::batch_std_error(acc.block_eta);
    m.nu_sq_se = detail::batch_std_error(acc.block_nu_sq);
    m.log_eta = std::log(m.eta);
    m.log_nu_sq = std::log(m.nu_sq);
    return m;
  }
  if (model.kind() == FeatureKind::Empirical) {
    RunningStats s;
    for (double f : model.samples()) s.add(std::pow(f, alpha));
    m.eta = s.mean;
    m.nu_sq = s.variance();
    m.log_eta = std::log(m.eta);
    m.log_nu_sq = std::log(m.nu_sq);
    return m;
  }
  const double lm1 = log_moment_abs_power(model, alpha);
  const double lm2 = log_moment_abs_power(model, 2.0 * alpha);
  m.log_eta = lm1;
  m.eta = std::exp(lm1);
  m.nu_sq = std::exp(lm2) - m.eta * m.eta;
  if (m.nu_sq < 0.0) {
    m.nu_sq = 0.0;
    m.clamped = true;
  }
  const double ratio = std::exp(2.0 * lm1 - lm2);
  m.log_nu_sq = ratio < 1.0 ? lm2 + std::log1p(-ratio)
                            : -std::numeric_limits<double>::infinity();
  return m;
}

/// ‖f‖_α computed as f_max · (Σ (f_k / f_max)^α)^{1/α}.
inline double alpha_norm(std::span<const double> f, double alpha) {
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, v);
  if (fmax == 0.0) return 0.0;
  double acc = 0.0;
  for (double v : f) acc += std::pow(v / fmax, alpha);
  return fmax * std::pow(acc, 1.0 / alpha);
}

/// Monte Carlo E[max_k f_k²].
inline Estimate max_second_moment(const FeatureModel& model, std::size_t k,
                                  std::size_t trials, std::uint64_t seed,
                                  unsigned workers = 1) {
  if (k < 1) throw std::invalid_argument("max_second_moment: k must be >= 1");
  if (trials < 10000) {
    throw std::invalid_argument("max_second_moment: needs >= 1e4 trials");
  }
  const auto acc = monte_carlo<RunningStats>(
      trials, seed, workers, [&](Rng& rng, RunningStats& a) {
        double fmax = 0.0;
        for (std::size_t i = 0; i < k; ++i) fmax = std::max(fmax, model.sample(rng));
        a.add(fmax * fmax);
      });
  return {acc.mean, acc.std_error()};
}

struct BetaStarEstimate {
  double beta = 1.0;
  // u* = E[f_max ‖f‖_α] / E[‖f‖_α²], with β* = u*^{−α}.
  double u = 1.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of the max-pooling post-processing parameter β*.
inline BetaStarEstimate beta_star(const FeatureModel& model, std::size_t k, double alpha,
                                  std::size_t trials, std::uint64_t seed,
                                  unsigned workers = 1) {
  if (k < 1) throw std::invalid_argument("beta_star: k must be >= 1");
  if (!(alpha >= 1.0)) throw std::domain_error("beta_star: alpha must be >= 1");
  if (k == 1) return {1.0, 1.0, 0.0};
  if (trials < 2) throw std::invalid_argument("beta_star: needs >= 2 trials");

  struct Acc {
    double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    void merge(const Acc& o) {
      n += o.n; sa += o.sa; sb += o.sb; saa += o.saa; sbb += o.sbb; sab += o.sab;
    }
  };
  const auto acc = monte_carlo<Acc>(trials, seed, workers, [&](Rng& rng, Acc& a) {
    thread_local std::vector<double> f;
    f.resize(k);
    sample_features_into(model, f, rng);
    const double fmax = *std::max_element(f.begin(), f.end());
    const double nrm = alpha_norm(f, alpha);
    const double x = fmax * nrm;  // numerator term
    const double y = nrm * nrm;   // denominator term
    a.n += 1; a.sa += x; a.sb += y; a.saa += x * x; a.sbb += y * y; a.sab += x * y;
  });
  const double ma = acc.sa / acc.n;
  const double mb = acc.sb / acc.n;
  if (!(mb > 0.0)) return {1.0, 1.0, 0.0};  // all-zero draws: any β is optimal
  const double u = ma / mb;
  // Delta method: Var(u) ≈ Var(x − u y) / (n mb²).
  const double var_lin = (acc.saa - 2 * u * acc.sab + u * u * acc.sbb) / acc.n -
                         (ma - u * mb) * (ma - u * mb);
  const double se_u = std::sqrt(std::max(0.0, var_lin) / acc.n) / mb;
  BetaStarEstimate est;
  est.u = u;
  est.beta = std::pow(u, -alpha);
  est.std_error = alpha * std::pow(u, -alpha - 1.0) * se_u;
  const double kd = static_cast<double>(k);
  if (est.beta < 1.0 - 4.0 * est.std_error - 1e-12 ||
      est.beta > kd + 4.0 * est.std_error + 1e-12) {
    throw ConsistencyError("beta_star: estimate " + std::to_string(est.beta) +
                           " outside [1, K]");
  }
  return est;
}

/// One non-negative decimal per line; blank lines and '#' comments skipped.
inline std::vector<double> parse_empirical_samples(std::istream& in,
                                                   const std::string& source = "<stream>") {
  std::vector<double> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(first, last - first + 1);
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ParseError(source, lineno, "not a number: '" + token + "'");
    }
    if (used != token.size()) throw ParseError(source, lineno, "trailing characters in '" + token + "'");
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParseError(source, lineno, "feature values must be finite and >= 0");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ParseError(source, lineno, "no feature values found");
  return out;
}

inline std::vector<double> load_empirical_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);
  return parse_empirical_samples(in, path);
}

}  // namespace airpool
