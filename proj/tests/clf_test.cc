/*
 * Copyright 2026 The causal-dp-synth Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cds/clf.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"

namespace cds::clf {
namespace {

struct Data {
  nd::Matrix x;
  std::vector<int> y;
};

Data FromRows(const std::vector<std::vector<double>>& rows, std::vector<int> y) {
  Data d{nd::Matrix(rows.size(), rows.empty() ? 0 : rows[0].size()), std::move(y)};
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) d.x(r, c) = rows[r][c];
  }
  return d;
}

// Two Gaussian blobs whose centres sit `gap` apart along (1, 1).
Data Blobs(size_t n, double gap, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double c = label ? gap / 2 : -gap / 2;
    rows.push_back({c + 0.3 * StandardNormal(rng), c + 0.3 * StandardNormal(rng)});
    y.push_back(label);
  }
  return FromRows(rows, y);
}

TEST(ClassifierTest, SeparableBlobsFitPerfectlyByLinearModels) {
  const Data d = Blobs(200, 6.0, 1);
  for (Kind k : {Kind::kLogistic, Kind::kLinearSvm, Kind::kKernelSvm, Kind::kRandomForest}) {
    const Classifier c = Classifier::Fit(k, d.x, d.y, {}, 3);
    EXPECT_EQ(Evaluate(c, d.x, d.y).accuracy, 100.0) << KindName(k);
  }
}

TEST(ClassifierTest, ConstantLabelsGiveConstantClassifier) {
  const Data d = Blobs(20, 1.0, 2);
  const std::vector<int> ones(20, 1);
  for (Kind k : AllKinds()) {
    const Classifier c = Classifier::Fit(k, d.x, ones, {}, 1);
    EXPECT_TRUE(c.degenerate());
    EXPECT_EQ(Evaluate(c, d.x, ones).accuracy, 100.0);
  }
}

TEST(ClassifierTest, OneNearestNeighbourMemorizesDistinctPoints) {
  Rng rng(5);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({StandardNormal(rng), StandardNormal(rng), StandardNormal(rng)});
    y.push_back(static_cast<int>(rng() % 3));
  }
  const Data d = FromRows(rows, y);
  Hyper hp;
  hp.knn_k = 1;
  EXPECT_EQ(Evaluate(Classifier::Fit(Kind::kKnn, d.x, d.y, hp, 1), d.x, d.y).accuracy, 100.0);
}

TEST(ClassifierTest, EmptyInputPredictsNothing) {
  const Data d = Blobs(10, 4.0, 3);
  for (Kind k : AllKinds()) {
    const Classifier c = Classifier::Fit(k, d.x, d.y, {}, 1);
    EXPECT_TRUE(c.Predict(nd::Matrix(0, 2)).empty());
    EXPECT_THROW(c.Predict(nd::Matrix(1, 3)), Error);
  }
}

// As gamma -> 0 the RBF kernel matrix tends to all ones, so only the bias
// can act and the majority class wins.
TEST(ClassifierTest, VanishingKernelWidthPredictsMajority) {
  Rng rng(6);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({StandardNormal(rng), StandardNormal(rng)});
    y.push_back(i < 35 ? 1 : 0);
  }
  const Data d = FromRows(rows, y);
  Hyper hp;
  hp.gamma = 1e-9;
  const Classifier c = Classifier::Fit(Kind::kKernelSvm, d.x, d.y, hp, 1);
  for (int p : c.Predict(d.x)) EXPECT_EQ(p, 1);
}

double Gini(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  double p = 0;
  for (int l : labels) p += l;
  p /= labels.size();
  return 2 * p * (1 - p);
}

TEST(ClassifierTest, StumpMatchesExhaustiveSplitSearch) {
  Rng rng(7);
  std::vector<double> xs;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    xs.push_back(i + 0.5 * Uniform01(rng));
    y.push_back(i < 23 ? (i % 7 == 3) : (i % 9 != 4));
  }
  std::vector<std::vector<double>> rows;
  for (double v : xs) rows.push_back({v});
  const Data d = FromRows(rows, y);
  // Brute force over midpoints, weighted Gini.
  double best = INFINITY;
  double best_t = 0;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    const double t = 0.5 * (xs[i] + xs[i + 1]);
    std::vector<int> l, r;
    for (size_t j = 0; j < xs.size(); ++j) (xs[j] <= t ? l : r).push_back(y[j]);
    const double imp = (l.size() * Gini(l) + r.size() * Gini(r)) / xs.size();
    if (imp < best - 1e-15) {
      best = imp;
      best_t = t;
    }
  }
  Hyper hp;
  hp.trees = 1;
  hp.max_depth = 1;
  hp.bootstrap = false;
  hp.max_features = 1;
  const Classifier c = Classifier::Fit(Kind::kRandomForest, d.x, d.y, hp, 1);
  ASSERT_EQ(c.trees().size(), 1u);
  const Tree::Node& root = c.trees()[0].nodes[0];
  ASSERT_EQ(root.feature, 0);
  // Same partition of the training points.
  for (double v : xs) EXPECT_EQ(v <= root.threshold, v <= best_t) << v;
}

TEST(EvaluateTest, PerfectAllInAndFlipped) {
  const std::vector<int> truth{1, 0, 1, 0, 1, 0};
  EvalReport r = Score(truth, truth);
  EXPECT_EQ(r.accuracy, 100.0);
  EXPECT_EQ(r.pa(), 100.0);
  EXPECT_EQ(r.na(), 100.0);
  r = Score(truth, std::vector<int>(6, 1));
  EXPECT_EQ(r.accuracy, 50.0);
  EXPECT_EQ(r.pa(), 100.0);
  EXPECT_EQ(r.na(), 0.0);
  const std::vector<int> pred{1, 1, 0, 0, 1, 1};
  std::vector<int> flipped(truth.size());
  for (size_t i = 0; i < truth.size(); ++i) flipped[i] = 1 - truth[i];
  EXPECT_NEAR(Score(flipped, pred).accuracy, 100.0 - Score(truth, pred).accuracy, 1e-12);
}

TEST(EvaluateTest, WeightedRecallsReproduceAccuracy) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> truth(37), pred(37);
    for (size_t i = 0; i < truth.size(); ++i) {
      truth[i] = static_cast<int>(rng() % 3);
      pred[i] = static_cast<int>(rng() % 3);
    }
    const EvalReport r = Score(truth, pred);
    double acc = 0;
    for (size_t k = 0; k < r.classes.size(); ++k) acc += r.recall[k] * r.support[k];
    EXPECT_NEAR(acc / r.n, r.accuracy, 1e-9);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 100.0);
  }
  EXPECT_EQ(Score(std::vector<int>{}, std::vector<int>{}).n, 0u);
}

TEST(ClassifierTest, DeterministicUnderSeed) {
  const Data d = Blobs(80, 1.0, 9);
  for (Kind k : AllKinds()) {
    const Classifier a = Classifier::Fit(k, d.x, d.y, {}, 42);
    const Classifier b = Classifier::Fit(k, d.x, d.y, {}, 42);
    EXPECT_EQ(a.Predict(d.x), b.Predict(d.x)) << KindName(k);
    if (k == Kind::kLogistic || k == Kind::kLinearSvm) {
      EXPECT_EQ(a.LinearWeights(0), b.LinearWeights(0));
    }
  }
}

TEST(ClassifierTest, KnnInvariantToTrainingRowOrder) {
  // Integer grid points make distance ties common.
  Rng rng(10);
  std::vector<std::vector<double>> rows, queries;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    rows.push_back({static_cast<double>(rng() % 4), static_cast<double>(rng() % 4)});
    y.push_back(static_cast<int>(rng() % 3));
  }
  for (int i = 0; i < 30; ++i) {
    queries.push_back({static_cast<double>(rng() % 5) - 0.5, static_cast<double>(rng() % 5)});
  }
  const Data d = FromRows(rows, y);
  const Data q = FromRows(queries, std::vector<int>(queries.size(), 0));
  const std::vector<int> base = Classifier::Fit(Kind::kKnn, d.x, d.y, {}, 1).Predict(q.x);
  std::vector<size_t> perm(rows.size());
  std::iota(perm.begin(), perm.end(), size_t{0});
  for (int t = 0; t < 10; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> pr;
    std::vector<int> py;
    for (size_t i : perm) {
      pr.push_back(rows[i]);
      py.push_back(y[i]);
    }
    const Data p = FromRows(pr, py);
    EXPECT_EQ(Classifier::Fit(Kind::kKnn, p.x, p.y, {}, 7).Predict(q.x), base);
  }
}

double Cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (size_t i = 0; i + 1 < a.size(); ++i) {  // bias excluded
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Symmetric data (every point x has a mirrored -x of the other class) keeps
// the fitted standardization fixed when the mirrored pair at
// +-sqrt(mean x^2) is duplicated, so only the objective can react.
TEST(ClassifierTest, DuplicatingWellClassifiedPointKeepsBoundary) {
  Rng rng(11);
  std::vector<std::vector<double>> base;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const double a = 2.0 + 0.4 * StandardNormal(rng);
    const double b = 1.0 + 0.4 * StandardNormal(rng);
    base.push_back({a, b});
    y.push_back(1);
    base.push_back({-a, -b});
    y.push_back(0);
  }
  double m0 = 0, m1 = 0;
  for (const auto& r : base) {
    m0 += r[0] * r[0];
    m1 += r[1] * r[1];
  }
  const std::vector<double> p{std::sqrt(m0 / base.size()), std::sqrt(m1 / base.size())};
  auto rows = base;
  rows.push_back(p);
  y.push_back(1);
  rows.push_back({-p[0], -p[1]});
  y.push_back(0);
  auto dup_rows = rows;
  auto dup_y = y;
  dup_rows.push_back(p);
  dup_y.push_back(1);
  dup_rows.push_back({-p[0], -p[1]});
  dup_y.push_back(0);
  const Data d = FromRows(rows, y), dd = FromRows(dup_rows, dup_y);

  const Classifier svm = Classifier::Fit(Kind::kLinearSvm, d.x, d.y, {}, 1);
  const Classifier svm_dup = Classifier::Fit(Kind::kLinearSvm, dd.x, dd.y, {}, 1);
  EXPECT_GT(svm.DecisionRow(p)[0], 1.0);  // outside the margin
  EXPECT_NEAR(Cosine(svm.LinearWeights(0), svm_dup.LinearWeights(0)), 1.0, 1e-6);

  const Classifier lr = Classifier::Fit(Kind::kLogistic, d.x, d.y, {}, 1);
  const Classifier lr_dup = Classifier::Fit(Kind::kLogistic, dd.x, dd.y, {}, 1);
  EXPECT_GT(lr.DecisionRow(p)[0], 0.0);
  EXPECT_NEAR(Cosine(lr.LinearWeights(0), lr_dup.LinearWeights(0)), 1.0, 1e-6);
}

TEST(ClassifierTest, MultiClassOneVsRest) {
  Rng rng(12);
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (int i = 0; i < 150; ++i) {
    const int k = i % 3;
    rows.push_back({5.0 * k + 0.3 * StandardNormal(rng), 0.3 * StandardNormal(rng)});
    y.push_back(k);
  }
  const Data d = FromRows(rows, y);
  for (Kind k : AllKinds()) {
    const Classifier c = Classifier::Fit(k, d.x, d.y, {}, 2);
    EXPECT_EQ(c.classes().size(), 3u);
    EXPECT_GE(Evaluate(c, d.x, d.y).accuracy, 95.0) << KindName(k);
  }
}

TEST(KindTest, NamesRoundTrip) {
  for (Kind k : AllKinds()) EXPECT_EQ(ParseKind(KindName(k)), k);
  EXPECT_THROW(ParseKind("perceptron"), Error);
}

}  // namespace
}  // namespace cds::clf
