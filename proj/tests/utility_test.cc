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

#include "cds/utility.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_support.h"

namespace cds::utility {
namespace {

scg::Dataset Synthetic(size_t n, uint64_t seed) {
  Rng rng(seed);
  return scg::SampleDataset(scg::MakeSyntheticScg(seed), n, rng);
}

TEST(TasksTest, DistinctDiscreteTargetsWithDisjointSplits) {
  const scg::Dataset d = Synthetic(300, 1);
  const std::vector<UtilityTask> tasks = MakeTasks(d, 20, 7);
  ASSERT_EQ(tasks.size(), 20u);
  std::set<size_t> targets;
  for (const UtilityTask& t : tasks) {
    targets.insert(t.target);
    EXPECT_TRUE(d.schema[t.target].IsDiscrete());
    EXPECT_EQ(t.features.size(), d.cols() - 1);
    EXPECT_EQ(std::count(t.features.begin(), t.features.end(), t.target), 0);
    std::vector<size_t> all = t.train_rows;
    all.insert(all.end(), t.test_rows.begin(), t.test_rows.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    EXPECT_EQ(all.size(), d.rows);
    EXPECT_NEAR(static_cast<double>(t.train_rows.size()) / d.rows, 0.7, 0.02);
  }
  EXPECT_EQ(targets.size(), 20u);
  EXPECT_TRUE(MakeTasks(d, 0, 7).empty());
}

TEST(TasksTest, TooManyTargetsThrows) {
  const scg::Dataset d = Synthetic(50, 2);
  try {
    MakeTasks(d, 21, 1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientCategoricalTargets);
  }
}

TEST(TasksTest, SplitIsStratified) {
  const scg::Dataset d = Synthetic(400, 3);
  for (const UtilityTask& t : MakeTasks(d, 5, 9)) {
    double train_pos = 0, test_pos = 0;
    for (size_t r : t.train_rows) train_pos += d.raw(r, t.target);
    for (size_t r : t.test_rows) test_pos += d.raw(r, t.target);
    EXPECT_NEAR(train_pos / t.train_rows.size(), test_pos / t.test_rows.size(), 0.02);
  }
}

TEST(DesignTest, OneHotAndHiddenZeros) {
  scg::Dataset d = scg::Dataset::Empty({testing::MakeVar("A", scg::Kind::kBinary),
                                        testing::MakeVar("B", scg::Kind::kCategorical, 3),
                                        testing::MakeVar("C", scg::Kind::kContinuous)});
  d.AppendRow(std::vector<double>{1, 2, 0.5});
  d.AppendRow(std::vector<double>{0, scg::kDiscreteSentinel, NAN}, std::vector<uint8_t>{1, 0, 0});
  const nd::Matrix x = DesignMatrix(d, {0, 1}, {0, 1, 2});
  ASSERT_EQ(x.cols(), 5u);
  const std::vector<double> want{1, 0, 0, 1, 0.5, 0, 0, 0, 0, 0};
  EXPECT_EQ(std::vector<double>(x.data().begin(), x.data().end()), want);
}

// Noise floor of the self-comparison, averaged over 10 seeds.
TEST(EvaluateTest, SelfComparisonIsNearZero) {
  const scg::Dataset d = Synthetic(1000, 4);
  double mean = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto tasks = MakeTasks(d, 5, seed);
    const UtilityReport r = EvaluateUtility(d, d, tasks, {clf::Kind::kLogistic}, seed);
    ASSERT_EQ(r.cells.size(), 5u);
    for (const UtilityCell& c : r.cells) EXPECT_DOUBLE_EQ(c.delta(), c.original - c.synthetic);
    mean += r.MeanDelta() / 10;
  }
  EXPECT_LE(std::abs(mean), 2.0);
}

TEST(EvaluateTest, ShuffledLabelsLoseUtility) {
  const scg::Dataset d = Synthetic(500, 5);
  const auto tasks = MakeTasks(d, 5, 2);
  // Destroy every column's relation to the others by permuting each
  // column independently.
  scg::Dataset shuffled = d;
  Rng rng(8);
  for (size_t c = 0; c < d.cols(); ++c) {
    const std::vector<size_t> perm = gen::EpochOrder(d.rows, rng);
    for (size_t r = 0; r < d.rows; ++r) {
      shuffled.values[r * d.cols() + c] = d.raw(perm[r], c);
    }
  }
  const UtilityReport self = EvaluateUtility(d, d, tasks, {clf::Kind::kLogistic}, 3);
  const UtilityReport bad = EvaluateUtility(d, shuffled, tasks, {clf::Kind::kLogistic}, 3);
  EXPECT_GT(bad.MeanDelta(), self.MeanDelta());
  EXPECT_LT(bad.MeanSynthetic(), self.MeanSynthetic());
}

TEST(EvaluateTest, RejectsMismatchedOrMaskedSynthetic) {
  const scg::Dataset d = Synthetic(100, 6);
  const auto tasks = MakeTasks(d, 2, 1);
  scg::Dataset narrow = scg::Dataset::Empty({d.schema[0]});
  narrow.AppendRow(std::vector<double>{0});
  try {
    EvaluateUtility(d, narrow, tasks, {clf::Kind::kKnn}, 1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
  Rng rng(1);
  try {
    EvaluateUtility(d, scg::MaskAtRandom(d, 0.2, rng), tasks, {clf::Kind::kKnn}, 1);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaViolation);
  }
}

TEST(ReportTest, AggregatesAndRows) {
  UtilityReport r;
  r.cells.push_back({0, "X0", clf::Kind::kKernelSvm, 90.0, 80.0});
  r.cells.push_back({1, "X1", clf::Kind::kKernelSvm, 70.0, 66.34});
  r.cells.push_back({1, "X1", clf::Kind::kLogistic, 50.0, 55.0});
  EXPECT_NEAR(r.MeanDelta(), (10.0 + 3.66 - 5.0) / 3, 1e-12);
  const auto by = r.DeltaByClassifier();
  ASSERT_EQ(by.size(), 2u);
  // AllKinds() order: kernel before logistic.
  EXPECT_EQ(by[0].first, clf::Kind::kKernelSvm);
  EXPECT_NEAR(by[0].second, 6.83, 1e-12);
  EXPECT_DOUBLE_EQ(by[1].second, -5.0);
  EXPECT_EQ(r.TableRows()[0], "kernel & 6.83");
}

SweepConfig SmallSweep() {
  SweepConfig cfg;
  cfg.base.latent_dim = 2;
  cfg.base.model.hidden = 8;
  cfg.base.train.epochs = 2;
  cfg.base.train.batch_size = 50;
  cfg.base.train.lr = 0.01;
  cfg.tasks = 2;
  cfg.kinds = {clf::Kind::kLogistic};
  return cfg;
}

TEST(SweepTest, NonPrivatePointAndDeterminism) {
  Rng rng(1);
  const scg::CausalGraph g = scg::MakeSyntheticScg(11);
  const scg::Dataset d = scg::SampleDataset(g, 200, rng);
  const SweepTable a = PrivacyUtilitySweep(d, g, {1.0, INFINITY}, SmallSweep(), 5);
  ASSERT_EQ(a.points.size(), 4u);
  EXPECT_GT(a.points[0].sigma, 0.0);
  EXPECT_LE(a.points[0].ledger_epsilon, 1.0);
  EXPECT_EQ(a.points[2].sigma, 0.0);
  EXPECT_TRUE(std::isinf(a.points[2].ledger_epsilon));
  EXPECT_EQ(a.points[2].mode, gen::Mode::kCausal);
  EXPECT_EQ(a.points[3].mode, gen::Mode::kAssociational);
  const SweepTable b = PrivacyUtilitySweep(d, g, {1.0, INFINITY}, SmallSweep(), 5);
  EXPECT_EQ(a.ToJson().dump(), b.ToJson().dump());
  EXPECT_NE(a.Csv().find("inf,causal"), std::string::npos);
}

TEST(PairplotTest, IdenticalSourcesGiveIdenticalHistograms) {
  const scg::Dataset d = Synthetic(120, 7);
  const PairplotResult one = PairplotExport(d, d, 1, 3);
  ASSERT_EQ(one.attributes.size(), 1u);
  const PairplotResult p = PairplotExport(d, d, 10, 3);
  ASSERT_EQ(p.attributes.size(), 10u);
  EXPECT_EQ(p.original_hist, p.synthetic_hist);
  for (const auto& h : p.original_hist) {
    double total = 0;
    for (double v : h) total += v;
    EXPECT_EQ(total, 120.0);
  }
  EXPECT_NE(p.svg.find("<svg"), std::string::npos);
  EXPECT_EQ(std::count(p.csv.begin(), p.csv.end(), '\n'), 1 + 2 * 120);
  EXPECT_THROW(PairplotExport(d, d, 23, 3), Error);
}

}  // namespace
}  // namespace cds::utility
