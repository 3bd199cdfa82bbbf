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

// Synthetic multi-view sensing task: dataset generation, a small tanh
// classifier, a max-margin linear surrogate and accuracy under AirPooling.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "airpool/channel.hpp"
#include "airpool/features.hpp"
#include "airpool/montecarlo.hpp"
#include "airpool/protocol.hpp"

namespace airpool {

enum class LabelRule { Nonlinear, Linear, PlantedMargin };

struct DatasetOptions {
  std::size_t k_views = 4;
  std::size_t n_features = 4;
  PoolingMode mode = PoolingMode::max();
  LabelRule rule = LabelRule::Nonlinear;
  double planted_margin = 0.0;  // PlantedMargin only
};

struct LabeledSample {
  FeatureMatrix views;  // K×N
  int label = 0;
};

struct SyntheticDataset {
  std::vector<LabeledSample> samples;
  std::size_t k_views = 4;
  std::size_t n_features = 4;
  PoolingMode mode = PoolingMode::max();
  std::uint64_t generator_seed = 0;

  std::size_t size() const { return samples.size(); }
};

/// Per-dimension exact pooling of one sample's views.
inline std::vector<double> pooled_features(const FeatureMatrix& views, const PoolingMode& mode) {
  std::vector<double> g(views.cols());
  for (std::size_t n = 0; n < views.cols(); ++n) g[n] = true_pool(views.column(n), mode);
  return g;
}

inline double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() +
                                                           static_cast<std::ptrdiff_t>(mid)));
  return m;
}

/// Rectified-Gaussian views labeled by w·tanh(A·g) > τ (or w·g > τ), with g the
/// exact pooled vector and τ the median score. A and w come from stream 0 of the
/// seed, views from stream 1. PlantedMargin rejects samples whose pooled vector
/// lies within the margin of the linear rule's hyperplane (unit-norm w).
inline SyntheticDataset generate_dataset(std::size_t n_samples, std::uint64_t seed,
                                         const DatasetOptions& opt = {}) {
  if (n_samples < 1) throw std::invalid_argument("generate_dataset: n_samples must be >= 1");
  if (opt.k_views < 1 || opt.n_features < 1) {
    throw std::invalid_argument("generate_dataset: K and N must be >= 1");
  }
  const std::size_t k = opt.k_views;
  const std::size_t n = opt.n_features;
  Rng param_rng = make_rng(seed, 0);
  std::vector<double> a(n * n), w(n);
  for (double& x : a) x = standard_normal(param_rng) / std::sqrt(static_cast<double>(n));
  for (double& x : w) x = standard_normal(param_rng);
  if (opt.rule != LabelRule::Nonlinear) {
    const double norm = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
    for (double& x : w) x /= norm;
  }
  const auto score = [&](const std::vector<double>& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (opt.rule == LabelRule::Nonlinear) {
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += a[i * n + j] * g[j];
        s += w[i] * std::tanh(z);
      } else {
        s += w[i] * g[i];
      }
    }
    return s;
  };
  const FeatureModel model = FeatureModel::rectified_gaussian();
  Rng view_rng = make_rng(seed, 1);
  const auto draw = [&] {
    LabeledSample s{FeatureMatrix(k, n), 0};
    sample_features_into(model, s.views.data(), view_rng);
    return s;
  };

  SyntheticDataset ds;
  ds.k_views = k;
  ds.n_features = n;
  ds.mode = opt.mode;
  ds.generator_seed = seed;
  std::vector<double> scores;
  if (opt.rule == LabelRule::PlantedMargin) {
    if (!(opt.planted_margin > 0.0)) {
      throw std::invalid_argument("generate_dataset: planted margin must be > 0");
    }
    // Threshold from a pilot sample so both classes are populated.
    std::vector<double> pilot(4096);
    for (double& p : pilot) p = score(pooled_features(draw().views, opt.mode));
    const double tau = median_of(pilot);
    std::size_t attempts = 0;
    while (ds.samples.size() < n_samples) {
      if (++attempts > 1000 * n_samples + 100000) {
        throw std::runtime_error("generate_dataset: planted margin too large to sample");
      }
      LabeledSample s = draw();
      const double sc = score(pooled_features(s.views, opt.mode)) - tau;
      if (std::abs(sc) < opt.planted_margin) continue;
      s.label = sc > 0.0 ? 1 : 0;
      ds.samples.push_back(std::move(s));
    }
    return ds;
  }
  ds.samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    ds.samples.push_back(draw());
    scores.push_back(score(pooled_features(ds.samples.back().views, opt.mode)));
  }
  const double tau = median_of(scores);
  for (std::size_t i = 0; i < n_samples; ++i) ds.samples[i].label = scores[i] > tau ? 1 : 0;
  return ds;
}

inline void save_dataset(const SyntheticDataset& ds, std::ostream& out) {
  out << "# airpool-dataset k=" << ds.k_views << " n=" << ds.n_features
      << " seed=" << ds.generator_seed << " mode=" << ds.mode.name() << '\n';
  out.precision(17);
  for (const auto& s : ds.samples) {
    out << s.label;
    for (double v : s.views.data()) out << ' ' << v;
    out << '\n';
  }
}

inline SyntheticDataset load_dataset(std::istream& in, const std::string& source = "<stream>") {
  SyntheticDataset ds;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (have_header) continue;
      std::istringstream hs(line.substr(1));
      std::string tag, kv;
      hs >> tag;
      if (tag != "airpool-dataset") continue;
      while (hs >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "malformed header field");
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        try {
          if (key == "k") ds.k_views = std::stoul(val);
          else if (key == "n") ds.n_features = std::stoul(val);
          else if (key == "seed") ds.generator_seed = std::stoull(val);
          else if (key == "mode") ds.mode = val == "average" ? PoolingMode::average()
                                                               : PoolingMode::max();
        } catch (const std::exception&) {
          throw ParseError(source, lineno, "bad header value for '" + key + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (!have_header) throw ParseError(source, lineno, "missing dataset header");
    std::istringstream ls(line);
    LabeledSample s{FeatureMatrix(ds.k_views, ds.n_features), 0};
    if (!(ls >> s.label) || (s.label != 0 && s.label != 1)) {
      throw ParseError(source, lineno, "label must be 0 or 1");
    }
    for (double& v : s.views.data()) {
      if (!(ls >> v) || !(v >= 0.0) || !std::isfinite(v)) {
        throw ParseError(source, lineno, "expected K*N non-negative feature values");
      }
    }
    std::string extra;
    if (ls >> extra) throw ParseError(source, lineno, "too many values");
    ds.samples.push_back(std::move(s));
  }
  if (!have_header) throw ParseError(source, lineno, "missing dataset header");
  return ds;
}

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic 80/20 shuffle split.
inline DataSplit split_dataset(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 2);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(idx[i - 1], idx[d(rng)]);
  }
  const std::size_t n_train = (n * 4) / 5;
  DataSplit s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

/// Fully connected N → 5 → 5 → 2 network, tanh hidden units, softmax output.
/// Inputs are standardized with training-set statistics stored in the model.
class ShallowClassifier {
 public:
  static constexpr std::size_t kHidden = 5;
  static constexpr std::size_t kClasses = 2;

  ShallowClassifier() = default;
  ShallowClassifier(std::size_t n_in, std::uint64_t seed)
      : n_in_(n_in), params_(param_count(n_in)), mean_(n_in, 0.0), scale_(n_in, 1.0) {
    Rng rng = make_rng(seed, 3);
    const auto init = [&](std::size_t off, std::size_t fan_in, std::size_t fan_out) {
      const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
        params_[off + i] = r * (2.0 * uniform01(rng) - 1.0);
      }
    };
    init(w1(), n_in_, kHidden);
    init(w2(), kHidden, kHidden);
    init(w3(), kHidden, kClasses);
  }

  static std::size_t param_count(std::size_t n_in) {
    return kHidden * n_in + kHidden + kHidden * kHidden + kHidden + kClasses * kHidden + kClasses;
  }

  std::size_t input_size() const { return n_in_; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  void set_standardization(std::vector<double> mean, std::vector<double> scale) {
    if (mean.size() != n_in_ || scale.size() != n_in_) {
      throw std::invalid_argument("ShallowClassifier: standardization size mismatch");
    }
    mean_ = std::move(mean);
    scale_ = std::move(scale);
  }

  std::array<double, kClasses> predict_proba(std::span<const double> x) const {
    Activations a;
    forward(x, a);
    return a.p;
  }

  int predict(std::span<const double> x) const {
    const auto p = predict_proba(x);
    return p[1] > p[0] ? 1 : 0;
  }

  double loss(std::span<const double> x, int label) const {
    Activations a;
    forward(x, a);
    return -a.logp[static_cast<std::size_t>(label)];
  }

  /// Adds ∂loss/∂θ of one sample into `grad` and returns the loss.
  double accumulate_gradient(std::span<const double> x, int label, std::span<double> grad) const {
    Activations a;
    forward(x, a);
    std::array<double, kClasses> d3{};
    for (std::size_t c = 0; c < kClasses; ++c) {
      d3[c] = a.p[c] - (static_cast<int>(c) == label ? 1.0 : 0.0);
    }
    std::array<double, kHidden> d2{}, d1{};
    for (std::size_t c = 0; c < kClasses; ++c) {
      for (std::size_t j = 0; j < kHidden; ++j) {
        grad[w3() + c * kHidden + j] += d3[c] * a.h2[j];
        d2[j] += params_[w3() + c * kHidden + j] * d3[c];
      }
      grad[b3() + c] += d3[c];
    }
    for (std::size_t j = 0; j < kHidden; ++j) d2[j] *= 1.0 - a.h2[j] * a.h2[j];
    for (std::size_t j = 0; j < kHidden; ++j) {
      for (std::size_t i = 0; i < kHidden; ++i) {
        grad[w2() + j * kHidden + i] += d2[j] * a.h1[i];
        d1[i] += params_[w2() + j * kHidden + i] * d2[j];
      }
      grad[b2() + j] += d2[j];
    }
    for (std::size_t i = 0; i < kHidden; ++i) d1[i] *= 1.0 - a.h1[i] * a.h1[i];
    for (std::size_t i = 0; i < kHidden; ++i) {
      for (std::size_t m = 0; m < n_in_; ++m) grad[w1() + i * n_in_ + m] += d1[i] * a.x[m];
      grad[b1() + i] += d1[i];
    }
    return -a.logp[static_cast<std::size_t>(label)];
  }

  double clean_accuracy() const { return clean_accuracy_; }
  void set_clean_accuracy(double r) { clean_accuracy_ = r; }

 private:
  struct Activations {
    std::vector<double> x;
    std::array<double, kHidden> h1{}, h2{};
    std::array<double, kClasses> p{}, logp{};
  };

  std::size_t w1() const { return 0; }
  std::size_t b1() const { return kHidden * n_in_; }
  std::size_t w2() const { return b1() + kHidden; }
  std::size_t b2() const { return w2() + kHidden * kHidden; }
  std::size_t w3() const { return b2() + kHidden; }
  std::size_t b3() const { return w3() + kClasses * kHidden; }

  void forward(std::span<const double> in, Activations& a) const {
    if (in.size() != n_in_) throw std::invalid_argument("ShallowClassifier: input size mismatch");
    a.x.resize(n_in_);
    for (std::size_t m = 0; m < n_in_; ++m) a.x[m] = (in[m] - mean_[m]) / scale_[m];
    for (std::size_t i = 0; i < kHidden; ++i) {
      double z = params_[b1() + i];
      for (std::size_t m = 0; m < n_in_; ++m) z += params_[w1() + i * n_in_ + m] * a.x[m];
      a.h1[i] = std::tanh(z);
    }
    for (std::size_t j = 0; j < kHidden; ++j) {
      double z = params_[b2() + j];
      for (std::size_t i = 0; i < kHidden; ++i) z += params_[w2() + j * kHidden + i] * a.h1[i];
      a.h2[j] = std::tanh(z);
    }
    std::array<double, kClasses> z{};
    for (std::size_t c = 0; c < kClasses; ++c) {
      z[c] = params_[b3() + c];
      for (std::size_t j = 0; j < kHidden; ++j) z[c] += params_[w3() + c * kHidden + j] * a.h2[j];
    }
    const double zmax = std::max(z[0], z[1]);
    const double lse = zmax + std::log(std::exp(z[0] - zmax) + std::exp(z[1] - zmax));
    for (std::size_t c = 0; c < kClasses; ++c) {
      a.logp[c] = z[c] - lse;
      a.p[c] = std::exp(a.logp[c]);
    }
  }

  std::size_t n_in_ = 0;
  std::vector<double> params_;
  std::vector<double> mean_, scale_;
  double clean_accuracy_ = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, ShallowClassifier last_stable)
      : std::runtime_error(what), last_stable_(std::move(last_stable)) {}
  const ShallowClassifier& last_stable() const { return last_stable_; }

 private:
  ShallowClassifier last_stable_;
};

struct TrainOptions {
  std::size_t epochs = 200;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

/// Pooled inputs and labels for the given indices.
inline std::vector<std::vector<double>> pooled_inputs(const SyntheticDataset& ds,
                                                      std::span<const std::size_t> idx) {
  std::vector<std::vector<double>> xs;
  xs.reserve(idx.size());
  for (std::size_t i : idx) xs.push_back(pooled_features(ds.samples[i].views, ds.mode));
  return xs;
}

template <class Classifier>
concept BinaryClassifier = requires(const Classifier& c, std::span<const double> x) {
  { c.predict(x) } -> std::convertible_to<int>;
};

template <BinaryClassifier Classifier>
double clean_accuracy(const Classifier& clf, const SyntheticDataset& ds,
                      std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    correct += clf.predict(pooled_features(ds.samples[i].views, ds.mode)) == ds.samples[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

/// Mini-batch gradient descent on cross-entropy over exact pooled features of
/// the training split; records clean test accuracy R₀.
inline ShallowClassifier train_classifier(const SyntheticDataset& ds,
                                          const TrainOptions& opt = {}) {
  if (ds.samples.size() < 5) throw std::invalid_argument("train_classifier: dataset too small");
  if (opt.batch_size < 1) throw std::invalid_argument("train_classifier: batch size must be >= 1");
  const DataSplit split = split_dataset(ds.size(), opt.seed);
  const auto xs = pooled_inputs(ds, split.train);
  const std::size_t n = ds.n_features;
  std::vector<double> mean(n, 0.0), scale(n, 0.0);
  for (const auto& x : xs) {
    for (std::size_t m = 0; m < n; ++m) mean[m] += x[m];
  }
  for (double& v : mean) v /= static_cast<double>(xs.size());
  for (const auto& x : xs) {
    for (std::size_t m = 0; m < n; ++m) scale[m] += (x[m] - mean[m]) * (x[m] - mean[m]);
  }
  for (double& v : scale) {
    v = std::sqrt(v / static_cast<double>(xs.size()));
    if (!(v > 0.0)) v = 1.0;
  }
  ShallowClassifier clf(n, opt.seed);
  clf.set_standardization(mean, scale);
  ShallowClassifier stable = clf;

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(opt.seed, 4);
  std::vector<double> grad(clf.parameters().size());
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> d(0, i - 1);
      std::swap(order[i - 1], order[d(rng)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t j = order[b];
        epoch_loss += clf.accumulate_gradient(xs[j], ds.samples[split.train[j]].label, grad);
      }
      const double step = opt.learning_rate / static_cast<double>(end - start);
      auto p = clf.parameters();
      for (std::size_t q = 0; q < p.size(); ++q) p[q] -= step * grad[q];
    }
    if (!std::isfinite(epoch_loss)) {
      throw TrainingDiverged("train_classifier: loss became non-finite at epoch " +
                                 std::to_string(epoch),
                             stable);
    }
    stable = clf;
  }
  clf.set_clean_accuracy(clean_accuracy(clf, ds, split.test));
  return clf;
}

/// Largest relative gap between backprop and central-difference gradients of
/// the summed loss over `idx`; relative to max(|a|, |b|, 1e-5).
inline double gradient_check(const ShallowClassifier& clf, const SyntheticDataset& ds,
                             std::span<const std::size_t> idx, double step = 1e-5) {
  const auto xs = pooled_inputs(ds, idx);
  std::vector<double> grad(clf.parameters().size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    clf.accumulate_gradient(xs[i], ds.samples[idx[i]].label, grad);
  }
  ShallowClassifier probe = clf;
  const auto total_loss = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += probe.loss(xs[i], ds.samples[idx[i]].label);
    return s;
  };
  double worst = 0.0;
  auto p = probe.parameters();
  for (std::size_t q = 0; q < p.size(); ++q) {
    const double orig = p[q];
    p[q] = orig + step;
    const double up = total_loss();
    p[q] = orig - step;
    const double down = total_loss();
    p[q] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(grad[q]), 1e-5});
    worst = std::max(worst, std::abs(numeric - grad[q]) / denom);
  }
  return worst;
}

/// Affine separator w·g + b with margin Δ measured on held-out correct points.
struct LinearMarginModel {
  std::vector<double> weight;
  double bias = 0.0;
  double margin = 0.0;
  double clean_accuracy = 0.0;
  bool separable = true;  // training split perfectly separated
  std::size_t margin_points = 0;

  double decision(std::span<const double> g) const {
    double s = bias;
    for (std::size_t i = 0; i < weight.size(); ++i) s += weight[i] * g[i];
    return s;
  }
  int predict(std::span<const double> g) const { return decision(g) > 0.0 ? 1 : 0; }
  double distance(std::span<const double> g) const {
    const double norm =
        std::sqrt(std::inner_product(weight.begin(), weight.end(), weight.begin(), 0.0));
    return std::abs(decision(g)) / norm;
  }
};

/// Linear SVM by dual coordinate descent on the training split (bias through an
/// augmented coordinate scaled with the data), then the bias re-centered between
/// the classes. Margin and R₀ come from the test split.
inline LinearMarginModel measure_linear_margin(const SyntheticDataset& ds, std::uint64_t seed,
                                               double c_penalty = 1e4,
                                               std::size_t max_epochs = 2000) {
  const DataSplit split = split_dataset(ds.size(), seed);
  if (split.train.empty() || split.test.empty()) {
    throw std::invalid_argument("measure_linear_margin: dataset too small");
  }
  const auto xs = pooled_inputs(ds, split.train);
  const std::size_t n = ds.n_features;
  double radius = 0.0;
  for (const auto& x : xs) {
    radius = std::max(radius, std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0)));
  }
  const double aug = radius > 0.0 ? radius : 1.0;
  const std::size_t m = xs.size();
  std::vector<double> y(m), q(m), alpha(m, 0.0), w(n + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = ds.samples[split.train[i]].label == 1 ? 1.0 : -1.0;
    q[i] = std::inner_product(xs[i].begin(), xs[i].end(), xs[i].begin(), 0.0) + aug * aug;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 5);
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    for (std::size_t i = m; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> d(0, i - 1);
      std::swap(order[i - 1], order[d(rng)]);
    }
    double max_violation = 0.0;
    for (std::size_t i : order) {
      if (q[i] == 0.0) continue;
      double wx = w[n] * aug;
      for (std::size_t d = 0; d < n; ++d) wx += w[d] * xs[i][d];
      const double g = y[i] * wx - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == c_penalty) pg = std::max(g, 0.0);
      max_violation = std::max(max_violation, std::abs(pg));
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / q[i], 0.0, c_penalty);
      const double delta = (alpha[i] - old) * y[i];
      for (std::size_t d = 0; d < n; ++d) w[d] += delta * xs[i][d];
      w[n] += delta * aug;
    }
    if (max_violation < 1e-9) break;
  }
  LinearMarginModel lm;
  lm.weight.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(n));
  // Best bias for the fitted direction: midway between the closest opposite points.
  double lo_pos = std::numeric_limits<double>::infinity();
  double hi_neg = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double s = std::inner_product(lm.weight.begin(), lm.weight.end(), xs[i].begin(), 0.0);
    if (y[i] > 0) lo_pos = std::min(lo_pos, s);
    else hi_neg = std::max(hi_neg, s);
  }
  lm.separable = lo_pos > hi_neg;
  lm.bias = lm.separable ? -0.5 * (lo_pos + hi_neg) : w[n] * aug;
  if (!(std::inner_product(lm.weight.begin(), lm.weight.end(), lm.weight.begin(), 0.0) > 0.0)) {
    throw std::runtime_error("measure_linear_margin: degenerate separator");
  }
  const auto test = pooled_inputs(ds, split.test);
  double margin = std::numeric_limits<double>::infinity();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (lm.predict(test[i]) != ds.samples[split.test[i]].label) continue;
    ++correct;
    margin = std::min(margin, lm.distance(test[i]));
  }
  lm.clean_accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  lm.margin_points = correct;
  lm.margin = correct > 0 ? margin : 0.0;
  return lm;
}

struct AccuracyEstimate {
  double r_ap = 0.0;
  double r_ap_se = 0.0;
  double d_sigma = 0.0;  // mean ‖ĝ − g‖²
  double d_sigma_se = 0.0;
  // Fraction of rounds with ‖ĝ − g‖ < margin (when a margin is supplied).
  double within_margin = 0.0;
  std::size_t rounds = 0;
};

/// Classifies AirPooled features of every test sample over `trials_per_sample`
/// noise draws. Sample i, trial t uses seed stream i·trials + t, so sweeps that
/// share a seed reuse the same standard-normal draws.
template <BinaryClassifier Classifier>
AccuracyEstimate evaluate_accuracy(const Classifier& clf, const SyntheticDataset& ds,
                                   std::span<const std::size_t> test_idx,
                                   const AirPoolConfig& cfg, const SystemParams& params,
                                   std::size_t trials_per_sample, std::uint64_t seed,
                                   unsigned workers = 1, double margin = 0.0) {
  if (trials_per_sample < 1) throw std::invalid_argument("evaluate_accuracy: trials must be >= 1");
  if (test_idx.empty()) throw std::invalid_argument("evaluate_accuracy: empty test set");
  struct Acc {
    RunningStats correct, err, inside;
    void merge(const Acc& o) {
      correct.merge(o.correct);
      err.merge(o.err);
      inside.merge(o.inside);
    }
  };
  const std::size_t n_samples = test_idx.size();
  std::vector<Acc> per_sample(n_samples);
  const auto run = [&](std::size_t s) {
    const auto& sample = ds.samples[test_idx[s]];
    const std::vector<double> g = pooled_features(sample.views, ds.mode);
    RunningStats c, e, in;
    for (std::size_t t = 0; t < trials_per_sample; ++t) {
      const auto g_hat =
          airpool_round(sample.views, cfg, params, derive_seed(seed, s * trials_per_sample + t));
      double sq = 0.0;
      for (std::size_t d = 0; d < g.size(); ++d) sq += (g_hat[d] - g[d]) * (g_hat[d] - g[d]);
      c.add(clf.predict(g_hat) == sample.label ? 1.0 : 0.0);
      e.add(sq);
      in.add(sq < margin * margin ? 1.0 : 0.0);
    }
    // Per-sample means feed the between-sample standard errors.
    per_sample[s].correct.add(c.mean);
    per_sample[s].err.add(e.mean);
    per_sample[s].inside.add(in.mean);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_samples)));
  if (workers == 1) {
    for (std::size_t s = 0; s < n_samples; ++s) run(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < n_samples; s += workers) run(s);
      });
    }
  }
  Acc total;
  for (const auto& a : per_sample) total.merge(a);
  AccuracyEstimate out;
  out.r_ap = total.correct.mean;
  out.r_ap_se = total.correct.std_error();
  out.d_sigma = total.err.mean;
  out.d_sigma_se = total.err.std_error();
  out.within_margin = total.inside.mean;
  out.rounds = n_samples * trials_per_sample;
  return out;
}

}  // namespace airpool
