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

#include "airpool/sensing.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace airpool;

namespace {

SystemParams quiet_params(std::size_t k, std::size_t n) {
  SystemParams p;
  p.k_sensors = static_cast<int>(k);
  p.n_features = static_cast<int>(n);
  p.truncation_threshold = 0.0;
  return p;
}

}  // namespace

TEST(Dataset, DeterministicBalancedNonnegative) {
  const auto a = generate_dataset(400, 5);
  const auto b = generate_dataset(400, 5);
  ASSERT_EQ(a.size(), 400u);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].views.data(), b.samples[i].views.data());
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
    EXPECT_EQ(a.samples[i].views.rows(), 4u);
    EXPECT_EQ(a.samples[i].views.cols(), 4u);
    for (double v : a.samples[i].views.data()) EXPECT_GE(v, 0.0);
    ones += a.samples[i].label;
  }
  EXPECT_NEAR(double(ones) / 400.0, 0.5, 0.1);
  EXPECT_NE(generate_dataset(400, 6).samples[0].views.data(), a.samples[0].views.data());
}

TEST(Dataset, PooledFeaturesAreHomogeneous) {
  const auto ds = generate_dataset(20, 9);
  for (const auto& s : ds.samples) {
    FeatureMatrix scaled = s.views;
    for (double& v : scaled.data()) v *= 3.0;
    for (const PoolingMode& m : {PoolingMode::max(), PoolingMode::average()}) {
      const auto g = pooled_features(s.views, m);
      const auto h = pooled_features(scaled, m);
      for (std::size_t n = 0; n < g.size(); ++n) EXPECT_NEAR(h[n], 3.0 * g[n], 1e-12);
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  DatasetOptions opt;
  opt.k_views = 3;
  opt.n_features = 5;
  const auto ds = generate_dataset(30, 11, opt);
  std::stringstream ss;
  save_dataset(ds, ss);
  const auto back = load_dataset(ss);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.k_views, 3u);
  EXPECT_EQ(back.n_features, 5u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
    EXPECT_EQ(back.samples[i].views.data(), ds.samples[i].views.data());
  }
  std::stringstream bad("# airpool-dataset k=2 n=2 seed=1 mode=max\n1 0.5 0.5\n");
  EXPECT_THROW(load_dataset(bad), ParseError);
}

TEST(Split, PartitionsIndices) {
  const DataSplit s = split_dataset(100, 3);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  std::vector<int> seen(100, 0);
  for (auto i : s.train) ++seen[i];
  for (auto i : s.test) ++seen[i];
  for (int c : seen) EXPECT_EQ(c, 1);
}

TEST(Classifier, SoftmaxSumsToOne) {
  const ShallowClassifier clf(4, 1);
  Rng rng = make_rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> x(4);
    for (double& v : x) v = 10 * standard_normal(rng);
    const auto p = clf.predict_proba(x);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
    EXPECT_GE(p[0], 0.0);
    EXPECT_NEAR(clf.loss(x, 1), -std::log(p[1]), 1e-9 * std::max(1.0, -std::log(p[1])));
  }
  EXPECT_EQ(ShallowClassifier::param_count(4), 5u * 4 + 5 + 25 + 5 + 10 + 2);
}

TEST(Classifier, BackpropMatchesFiniteDifferences) {
  const auto ds = generate_dataset(200, 13);
  const DataSplit s = split_dataset(ds.size(), 1);
  const std::vector<std::size_t> few(s.train.begin(), s.train.begin() + 20);
  EXPECT_LT(gradient_check(ShallowClassifier(4, 7), ds, few), 1e-5);
  TrainOptions opt;
  opt.epochs = 30;
  EXPECT_LT(gradient_check(train_classifier(ds, opt), ds, few), 1e-5);
}

TEST(Classifier, TrainingBeatsChance) {
  const auto ds = generate_dataset(600, 17);
  TrainOptions opt;
  opt.epochs = 150;
  const ShallowClassifier clf = train_classifier(ds, opt);
  const DataSplit s = split_dataset(ds.size(), opt.seed);
  EXPECT_GT(clean_accuracy(clf, ds, s.test), 0.75);
}

TEST(LinearMargin, LinearRuleIsLearned) {
  DatasetOptions opt;
  opt.rule = LabelRule::Linear;
  const auto ds = generate_dataset(800, 19, opt);
  const LinearMarginModel lm = measure_linear_margin(ds, 1);
  EXPECT_GE(lm.clean_accuracy, 0.95);
}

TEST(LinearMargin, PlantedMarginIsRecovered) {
  DatasetOptions opt;
  opt.rule = LabelRule::PlantedMargin;
  opt.planted_margin = 0.1;
  const auto ds = generate_dataset(800, 23, opt);
  const LinearMarginModel lm = measure_linear_margin(ds, 1);
  EXPECT_TRUE(lm.separable);
  EXPECT_EQ(lm.clean_accuracy, 1.0);
  EXPECT_GE(lm.margin, 0.8 * 0.1);
  EXPECT_LE(lm.margin, 1.2 * 0.1);
}

TEST(Evaluate, NoiselessAverageReproducesCleanAccuracy) {
  DatasetOptions opt;
  opt.mode = PoolingMode::average();
  const auto ds = generate_dataset(300, 29, opt);
  TrainOptions t;
  t.epochs = 40;
  const ShallowClassifier clf = train_classifier(ds, t);
  const DataSplit s = split_dataset(ds.size(), t.seed);
  const auto cfg = make_average_config(FeatureModel::rectified_gaussian(), 4, 1.0, 0.0);
  const auto est = evaluate_accuracy(clf, ds, s.test, cfg, quiet_params(4, 4), 3, 1);
  EXPECT_DOUBLE_EQ(est.r_ap, clean_accuracy(clf, ds, s.test));
  EXPECT_NEAR(est.d_sigma, 0.0, 1e-24);
  EXPECT_EQ(est.rounds, s.test.size() * 3);
}

TEST(Evaluate, WorkerCountDoesNotChangeResult) {
  const auto ds = generate_dataset(200, 31);
  const DataSplit s = split_dataset(ds.size(), 1);
  const ShallowClassifier clf(4, 2);
  const auto cfg = make_average_config(FeatureModel::rectified_gaussian(), 4, 1.0, 0.5);
  const auto a = evaluate_accuracy(clf, ds, s.test, cfg, quiet_params(4, 4), 5, 3, 1);
  const auto b = evaluate_accuracy(clf, ds, s.test, cfg, quiet_params(4, 4), 5, 3, 3);
  EXPECT_EQ(a.r_ap, b.r_ap);
  EXPECT_EQ(a.d_sigma, b.d_sigma);
}
