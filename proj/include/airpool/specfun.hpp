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

// Scalar special functions: ln Γ, regularized lower incomplete gamma and its
// inverse, and the principal branch of the Lambert W function.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace airpool::specfun {

/// Outcome of an iterative evaluation.
struct SpecFunResult {
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxIterations = 500;

/// ln Γ(x) for x > 0 via the Lanczos approximation (g = 7, 9 terms).
inline double ln_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error("ln_gamma: argument must be positive and finite");
  }
  if (x < 0.5) {
    // Γ(x) = Γ(x + 1) / x keeps the approximation on its accurate range.
    return ln_gamma(x + 1.0) - std::log(x);
  }
  static constexpr double kCoeffs[9] = {
      0.99999999999980993,     676.5203681218851,
      -1259.1392167224028,     771.32342877765313,
      -176.61502916214059,     12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6,
      1.5056327351493116e-7};
  constexpr double kG = 7.0;
  const double z = x - 1.0;
  double a = kCoeffs[0];
  for (int i = 1; i < 9; ++i) a += kCoeffs[i] / (z + i);
  const double t = z + kG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(a);
}

namespace detail {

// ln of the common prefactor x^k e^{-x} / Γ(k).
inline double gamma_prefactor_log(double k, double x) {
  return k * std::log(x) - x - ln_gamma(k);
}

inline SpecFunResult gamma_p_series(double k, double x) {
  double term = 1.0 / k;
  double sum = term;
  std::size_t n = 1;
  for (; n <= kMaxIterations; ++n) {
    term *= x / (k + static_cast<double>(n));
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) {
      return {sum * std::exp(gamma_prefactor_log(k, x)), true, n};
    }
  }
  return {sum * std::exp(gamma_prefactor_log(k, x)), false, kMaxIterations};
}

// Modified Lentz evaluation of the continued fraction for Q(k, x).
inline SpecFunResult gamma_q_continued_fraction(double k, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - k;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  std::size_t i = 1;
  for (; i <= kMaxIterations; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - k);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) {
      return {std::exp(gamma_prefactor_log(k, x)) * h, true, i};
    }
  }
  return {std::exp(gamma_prefactor_log(k, x)) * h, false, kMaxIterations};
}

}  // namespace detail

/// P(k, x) = γ(k, x) / Γ(k) with convergence diagnostics.
inline SpecFunResult regularized_gamma_p_result(double k, double x) {
  if (!(k > 0.0) || !(x >= 0.0) || std::isnan(x)) {
    throw std::domain_error("regularized_gamma_p: requires k > 0 and x >= 0");
  }
  if (x == 0.0) return {0.0, true, 0};
  if (std::isinf(x)) return {1.0, true, 0};
  if (x < k + 1.0) {
    auto r = detail::gamma_p_series(k, x);
    r.value = std::min(1.0, std::max(0.0, r.value));
    return r;
  }
  auto q = detail::gamma_q_continued_fraction(k, x);
  q.value = std::min(1.0, std::max(0.0, 1.0 - q.value));
  return q;
}

inline double regularized_gamma_p(double k, double x) {
  const auto r = regularized_gamma_p_result(k, x);
  if (!r.converged) {
    throw ConvergenceError("regularized_gamma_p: no convergence for k=" +
                           std::to_string(k) + ", x=" + std::to_string(x));
  }
  return r.value;
}

/// Solves P(k, x) = p for x by a bracketed, safeguarded Newton iteration.
inline SpecFunResult inverse_regularized_gamma_p_result(double k, double p) {
  if (!(k > 0.0) || !(p > 0.0 && p < 1.0)) {
    throw std::domain_error(
        "inverse_regularized_gamma_p: requires k > 0 and 0 < p < 1");
  }
  double lo = 0.0;
  double hi = std::max(1.0, k);
  while (regularized_gamma_p(k, hi) < p) {
    lo = hi;
    hi *= 2.0;
  }
  const double log_norm = ln_gamma(k);
  double x = 0.5 * (lo + hi);
  for (std::size_t it = 1; it <= kMaxIterations; ++it) {
    const double f = regularized_gamma_p(k, x) - p;
    if (f == 0.0) return {x, true, it};
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double pdf = std::exp((k - 1.0) * std::log(x) - x - log_norm);
    double next = (pdf > 0.0 && std::isfinite(pdf)) ? x - f / pdf : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x) ||
        hi - lo <= 1e-15 * std::max(1.0, hi)) {
      return {next, true, it};
    }
    x = next;
  }
  return {x, false, kMaxIterations};
}

inline double inverse_regularized_gamma_p(double k, double p) {
  const auto r = inverse_regularized_gamma_p_result(k, p);
  if (!r.converged) {
    throw ConvergenceError("inverse_regularized_gamma_p: no convergence");
  }
  return r.value;
}

/// Principal branch W₀(x) for x ≥ −1/e.
inline SpecFunResult lambert_w0_result(double x) {
  constexpr double kInvE = 1.0 / std::numbers::e;
  if (std::isnan(x) || x < -kInvE - 1e-15) {
    throw std::domain_error("lambert_w0: argument below -1/e");
  }
  if (x <= -kInvE) return {-1.0, true, 0};
  if (x == 0.0) return {0.0, true, 0};
  if (std::isinf(x)) return {x, true, 0};

  // Residual of the defining equation, relative for large arguments.
  const auto residual_ok = [x](double w) {
    return std::isfinite(w) && w >= -1.0 &&
           std::abs(w * std::exp(w) - x) <= 1e-13 * std::max(1.0, std::abs(x));
  };

  double w;
  if (x < -0.32) {
    const double p = std::sqrt(2.0 * (std::numbers::e * x + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else if (x < 3.0) {
    w = std::log1p(x);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  std::size_t it = 1;
  if (x > std::numbers::e) {
    // Newton on w + ln w − ln x, which stays representable for huge x.
    const double lx = std::log(x);
    for (; it <= 100; ++it) {
      const double g = w + std::log(w) - lx;
      const double step = g / (1.0 + 1.0 / w);
      w -= step;
      if (std::abs(step) <= 1e-16 * std::abs(w)) break;
    }
  } else {
    for (; it <= 100; ++it) {
      const double ew = std::exp(w);
      const double f = w * ew - x;
      const double wp1 = w + 1.0;
      if (wp1 == 0.0) break;
      const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
      w -= step;
      if (!std::isfinite(w)) break;
      if (std::abs(step) <= 1e-16 * (1.0 + std::abs(w))) break;
    }
  }
  if (residual_ok(w)) return {w, true, it};

  // Bisection on the monotone map w ↦ w e^w over [−1, hi].
  double lo = -1.0;
  double hi = x > std::numbers::e ? std::log(x) : 1.0;
  for (std::size_t b = 0; b < kMaxIterations; ++b) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (mid * std::exp(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++it;
  }
  w = 0.5 * (lo + hi);
  return {w, true, it};
}

inline double lambert_w0(double x) { return lambert_w0_result(x).value; }

}  // namespace airpool::specfun
