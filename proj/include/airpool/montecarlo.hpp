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

// Seed derivation, running statistics and the block-parallel Monte Carlo
// driver shared by every estimator in the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace airpool {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent sub-seed for stream `stream` of a parent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Welford accumulator with order-deterministic merging.
struct RunningStats {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningStats& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) *
                     static_cast<double>(o.count) / n;
    count += o.count;
  }

  /// Population variance.
  double variance() const {
    return count > 0 ? std::max(0.0, m2 / static_cast<double>(count)) : 0.0;
  }
  double sample_variance() const {
    return count > 1 ? std::max(0.0, m2 / static_cast<double>(count - 1)) : 0.0;
  }
  double std_error() const {
    return count > 1 ? std::sqrt(sample_variance() / static_cast<double>(count))
                     : 0.0;
  }
};

/// Estimate with its Monte Carlo standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline constexpr std::size_t kMonteCarloBlock = 4096;

inline unsigned default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs `body(rng, acc)` `trials` times. Trials are grouped into fixed-size
/// blocks, block b draws from stream b of `seed`, and block accumulators are
/// merged in block order, so the result depends on (trials, seed) only.
/// `Acc` must be default-constructible and provide `merge(const Acc&)`.
template <class Acc, class Body>
Acc monte_carlo(std::size_t trials, std::uint64_t seed, unsigned workers,
                Body&& body) {
  const std::size_t blocks = (trials + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<Acc> partial(blocks);
  const auto run_block = [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    const std::size_t begin = b * kMonteCarloBlock;
    const std::size_t end = std::min(trials, begin + kMonteCarloBlock);
    Acc& acc = partial[b];
    for (std::size_t i = begin; i < end; ++i) body(rng, acc);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(
                                                         std::max<std::size_t>(blocks, 1))));
  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += workers) run_block(b);
      });
    }
  }
  Acc total{};
  for (const auto& p : partial) total.merge(p);
  return total;
}

/// Fixed-arity bundle of running statistics.
template <std::size_t N>
struct StatsBundle {
  RunningStats s[N];
  void merge(const StatsBundle& o) {
    for (std::size_t i = 0; i < N; ++i) s[i].merge(o.s[i]);
  }
  RunningStats& operator[](std::size_t i) { return s[i]; }
  const RunningStats& operator[](std::size_t i) const { return s[i]; }
};

}  // namespace airpool
