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

#include "cds/genmodel.h"

#include <cmath>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_support.h"

namespace cds::gen {
namespace {

using cds::testing::MakeVar;
using scg::Kind;

scg::CausalGraph LatentCauseGraph() {
  scg::CausalGraph g;
  scg::Variable z = MakeVar("Z", Kind::kContinuous);
  z.latent = true;
  g.variables = {z, MakeVar("X1", Kind::kBinary), MakeVar("X2", Kind::kContinuous)};
  g.edges = {{"Z", "X1"}, {"Z", "X2"}, {"X1", "X2"}};
  return g;
}

std::vector<scg::Variable> ObservedSchema(const scg::CausalGraph& g) {
  std::vector<scg::Variable> s;
  for (const auto& v : g.variables) {
    if (!v.latent) s.push_back(v);
  }
  return s;
}

TEST(BuildPlanTest, AssociationalHasSingleLatentFactor) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(1);
  const FactorizationPlan p = BuildPlan(g.variables, nullptr, 10, Mode::kAssociational);
  ASSERT_EQ(p.decoder.size(), 1u);
  EXPECT_EQ(p.decoder[0].targets.size(), 22u);
  EXPECT_TRUE(p.decoder[0].conditions.empty());
  EXPECT_TRUE(p.decoder[0].uses_latent);
  ASSERT_EQ(p.encoder.size(), 1u);
}

TEST(BuildPlanTest, LatentCauseOfBothGroups) {
  const scg::CausalGraph g = LatentCauseGraph();
  const FactorizationPlan p = BuildPlan(ObservedSchema(g), &g, 4, Mode::kCausal);
  EXPECT_EQ(p.Describe(), "p(z) p(X1|z) p(X2|X1,z) ; q(z|X1,X2)");
}

TEST(BuildPlanTest, LatentCauseOfEffectOnly) {
  scg::CausalGraph g;
  scg::Variable z = MakeVar("Z", Kind::kContinuous);
  z.latent = true;
  g.variables = {z, MakeVar("X1", Kind::kBinary), MakeVar("X2", Kind::kBinary)};
  g.edges = {{"X1", "X2"}, {"Z", "X2"}};
  const FactorizationPlan p = BuildPlan(ObservedSchema(g), &g, 4, Mode::kCausal);
  EXPECT_EQ(p.Describe(), "p(z) p(X1) p(X2|X1,z) ; q(z|X2)");
}

TEST(BuildPlanTest, CoarsenedGroupsBecomeVectorFactors) {
  scg::CausalGraph g;
  g.variables = {MakeVar("A", Kind::kBinary), MakeVar("B", Kind::kBinary),
                 MakeVar("C", Kind::kBinary)};
  g.edges = {{"A", "C"}, {"B", "C"}};
  g.mechanisms["C"] = scg::LogisticBernoulli{{1.0, 1.0}, 0.0};
  const scg::CausalGraph p = scg::PartialGraph(g, {{"A", "G"}, {"B", "G"}});
  const FactorizationPlan plan = BuildPlan(g.variables, &p, 2, Mode::kCausal);
  ASSERT_EQ(plan.decoder.size(), 2u);
  EXPECT_EQ(plan.decoder[0].targets, (std::vector<size_t>{0, 1}));
  EXPECT_EQ(plan.decoder[1].conditions, (std::vector<size_t>{0, 1}));
}

TEST(BuildPlanTest, CausalModeNeedsGraph) {
  try {
    BuildPlan({MakeVar("A", Kind::kBinary)}, nullptr, 2, Mode::kCausal);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingGraph);
  }
}

TEST(BuildPlanTest, JsonRoundTrip) {
  const scg::CausalGraph g = LatentCauseGraph();
  const FactorizationPlan p = BuildPlan(ObservedSchema(g), &g, 3, Mode::kCausal);
  EXPECT_EQ(FactorizationPlan::FromJson(p.ToJson()).ToJson(), p.ToJson());
}

// Property: analytic ELBO gradients agree with central differences.
TEST(ElboGradientTest, MatchesFiniteDifferencesOverRandomDraws) {
  Rng rng(2026);
  for (int trial = 0; trial < 40; ++trial) {
    const cds::testing::ModelDraw d = cds::testing::RandomModelDraw(rng);
    const cds::testing::GradCheck c =
        cds::testing::CheckElboGradient(d.model, d.row, d.mask, d.eps);
    EXPECT_EQ(c.failures, 0u) << d.description << " worst " << c.worst_abs;
    EXPECT_GT(c.checked, 0u);
  }
}

TEST(ElboTest, TotalDecomposesIntoFactorsMinusKl) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(4, {8, 2, 2, 2.5});
  Rng rng(4);
  const scg::Dataset data = scg::SampleDataset(g, 30, rng);
  ModelConfig cfg;
  cfg.hidden = 6;
  const GenerativeModel m =
      GenerativeModel::Create(BuildPlan(data.schema, &g, 3, Mode::kCausal), data.schema, cfg, rng);
  const ElboResult r = Elbo(m, data, rng);
  double sum = 0;
  for (double f : r.estimate.factor_reconstruction) sum += f;
  EXPECT_NEAR(sum - r.estimate.kl, r.estimate.total, 1e-10);
  EXPECT_NEAR(r.estimate.reconstruction - r.estimate.kl, r.estimate.total, 1e-10);
  EXPECT_EQ(r.loss_grads.size(), 30u);
  EXPECT_GE(r.estimate.kl, 0.0);
}

TEST(ElboTest, SchemaMismatchRejected) {
  const scg::CausalGraph g = LatentCauseGraph();
  Rng rng(1);
  const GenerativeModel m = GenerativeModel::Create(
      BuildPlan(ObservedSchema(g), &g, 2, Mode::kCausal), ObservedSchema(g), {}, rng);
  const scg::Dataset other = scg::Dataset::Empty({MakeVar("Q", Kind::kBinary)});
  try {
    Elbo(m, other, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

// The ELBO lower-bounds an importance-sampling estimate of log p(x).
TEST(ElboTest, BelowImportanceSampledMarginal) {
  const scg::CausalGraph g = LatentCauseGraph();
  const auto schema = ObservedSchema(g);
  Rng rng(17);
  ModelConfig cfg;
  cfg.hidden = 5;
  const GenerativeModel m =
      GenerativeModel::Create(BuildPlan(schema, &g, 2, Mode::kCausal), schema, cfg, rng);
  const std::vector<double> row{1.0, 0.4};
  const std::vector<uint8_t> mask{1, 1};
  const nd::GaussianHead q = m.Encode(row, mask);
  const int k = 1000;
  std::vector<double> logw(k);
  double elbo = 0;
  for (int i = 0; i < k; ++i) {
    std::vector<double> eps(2);
    for (double& e : eps) e = StandardNormal(rng);
    const ExampleTerms t = m.EvaluateExample(row, mask, eps, nullptr);
    elbo += (t.reconstruction - t.kl) / k;
    double log_prior = 0, log_q = 0;
    for (size_t j = 0; j < 2; ++j) {
      const double z = q.mean[j] + std::exp(q.log_std[j]) * eps[j];
      log_prior += -0.5 * z * z;
      log_q += -0.5 * eps[j] * eps[j] - q.log_std[j];
    }
    logw[i] = t.reconstruction + log_prior - log_q;
  }
  double mx = -INFINITY;
  for (double w : logw) mx = std::max(mx, w);
  double s = 0, s2 = 0;
  for (double w : logw) {
    s += std::exp(w - mx);
    s2 += std::exp(2 * (w - mx));
  }
  const double mean = s / k;
  const double sd = std::sqrt(std::max(0.0, s2 / k - mean * mean));
  const double log_px = mx + std::log(mean);
  const double se = sd / (std::sqrt(k) * mean);  // delta method on the log
  EXPECT_LE(elbo, log_px + 3 * se);
}

TEST(ElboTest, HiddenCellsDoNotAffectTerms) {
  const scg::CausalGraph g = LatentCauseGraph();
  const auto schema = ObservedSchema(g);
  Rng rng(3);
  const GenerativeModel m =
      GenerativeModel::Create(BuildPlan(schema, &g, 2, Mode::kCausal), schema, {}, rng);
  const std::vector<double> eps{0.3, -0.2};
  const std::vector<uint8_t> mask{1, 0};
  const ExampleTerms a = m.EvaluateExample(std::vector<double>{1.0, NAN}, mask, eps, nullptr);
  const ExampleTerms b = m.EvaluateExample(std::vector<double>{1.0, 123.0}, mask, eps, nullptr);
  EXPECT_EQ(a.reconstruction, b.reconstruction);
  EXPECT_EQ(a.kl, b.kl);
  EXPECT_TRUE(std::isfinite(a.elbo()));
}

// Zeroing or perturbing any column outside a factor's conditioning set
// leaves that factor's output bitwise unchanged.
TEST(CausalStructureTest, FactorsIgnoreNonParents) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(6, {10, 3, 3, 2.5});
  Rng rng(6);
  const scg::Dataset data = scg::SampleDataset(g, 5, rng);
  for (bool poe : {false, true}) {
    ModelConfig cfg;
    cfg.hidden = 5;
    cfg.product_of_experts = poe;
    const GenerativeModel m =
        GenerativeModel::Create(BuildPlan(data.schema, &g, 3, Mode::kCausal), data.schema, cfg, rng);
    const std::vector<double> z{0.2, -1.0, 0.5};
    for (size_t f = 0; f < m.plan().decoder.size(); ++f) {
      const std::set<size_t> cond(m.plan().decoder[f].conditions.begin(),
                                  m.plan().decoder[f].conditions.end());
      const auto row = data.row(0);
      const auto mask = data.row_mask(0);
      const std::vector<double> base = m.FactorOutput(f, z, row, mask);
      for (size_t c = 0; c < data.cols(); ++c) {
        if (cond.count(c)) continue;
        std::vector<double> changed(row.begin(), row.end());
        changed[c] = data.schema[c].IsDiscrete() ? 0.0 : 99.0;
        EXPECT_EQ(m.FactorOutput(f, z, changed, mask), base) << "factor " << f << " col " << c;
      }
    }
  }
}

TEST(SampleTest, EmptyDeterministicAndObserved) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(2, {8, 2, 2, 2.5});
  Rng init(2);
  ModelConfig cfg;
  cfg.hidden = 4;
  const GenerativeModel m =
      GenerativeModel::Create(BuildPlan(g.variables, &g, 2, Mode::kCausal), g.variables, cfg, init);
  Rng a(5), b(5);
  EXPECT_EQ(m.Sample(0, a).rows, 0u);
  const scg::Dataset s1 = m.Sample(200, a);
  m.Sample(0, b);
  const scg::Dataset s2 = m.Sample(200, b);
  EXPECT_EQ(s1.values, s2.values);
  EXPECT_TRUE(s1.FullyObserved());
  s1.Validate();
}

TEST(ModelJsonTest, RoundTripSamplesIdentically) {
  const scg::CausalGraph g = LatentCauseGraph();
  const auto schema = ObservedSchema(g);
  Rng rng(8);
  ModelConfig cfg;
  cfg.hidden = 3;
  cfg.product_of_experts = true;
  const GenerativeModel m =
      GenerativeModel::Create(BuildPlan(schema, &g, 2, Mode::kCausal), schema, cfg, rng);
  const GenerativeModel back = GenerativeModel::FromJson(m.ToJson());
  Rng a(1), b(1);
  EXPECT_EQ(m.Sample(50, a).values, back.Sample(50, b).values);
}

TEST(FitTest, ZeroEpochsLeavesModelUnchanged) {
  const scg::CausalGraph g = LatentCauseGraph();
  const auto schema = ObservedSchema(g);
  Rng rng(1);
  GenerativeModel m =
      GenerativeModel::Create(BuildPlan(schema, &g, 2, Mode::kCausal), schema, {}, rng);
  const auto before = cds::testing::FlatParameters(m);
  scg::Dataset data = scg::Dataset::Empty(schema);
  data.AppendRow(std::vector<double>{1.0, 0.5});
  TrainConfig tc;
  tc.epochs = 0;
  dp::PrivacySpec spec;
  spec.clip_norm = 1.0;
  spec.noise_multiplier = 1.0;
  const FitResult r = Fit(m, data, tc, spec, rng);
  EXPECT_EQ(cds::testing::FlatParameters(m), before);
  EXPECT_EQ(r.steps, 0u);
  ASSERT_TRUE(r.account.has_value());
  EXPECT_EQ(r.account->epsilon, 0.0);
}

TEST(FitTest, BatchHundredFiftyEpochsIsFiveHundredSteps) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(1);
  Rng rng(1);
  const scg::Dataset data = scg::SampleDataset(g, 1000, rng);
  ModelConfig cfg;
  cfg.hidden = 2;
  GenerativeModel m =
      GenerativeModel::Create(BuildPlan(data.schema, nullptr, 1, Mode::kAssociational),
                              data.schema, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 100;
  tc.epochs = 50;
  dp::PrivacySpec spec;
  spec.clip_norm = 0.65;
  spec.noise_multiplier = 1.0;
  spec.delta = 0.0;  // 1 / n
  const FitResult r = Fit(m, data, tc, spec, rng);
  EXPECT_EQ(r.steps, 500u);
  EXPECT_EQ(r.loss_curve.size(), 50u);
  EXPECT_EQ(r.account->steps, 500u);
  EXPECT_DOUBLE_EQ(r.account->spec.sampling_rate, 0.1);
  EXPECT_DOUBLE_EQ(r.account->spec.delta, 1e-3);
}

TEST(FitTest, NonPrivateTrainingImprovesOnSeparableData) {
  int improved = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<scg::Variable> schema{MakeVar("Y", Kind::kBinary),
                                      MakeVar("X", Kind::kContinuous)};
    scg::Dataset data = scg::Dataset::Empty(schema);
    for (int i = 0; i < 200; ++i) {
      const double y = i % 2;
      data.AppendRow(std::vector<double>{y, (y ? 2.0 : -2.0) + 0.3 * StandardNormal(rng)});
    }
    ModelConfig cfg;
    cfg.hidden = 8;
    GenerativeModel m = GenerativeModel::Create(BuildPlan(schema, nullptr, 2, Mode::kAssociational),
                                                schema, cfg, rng);
    TrainConfig tc;
    tc.batch_size = 20;
    tc.epochs = 10;
    tc.lr = 0.01;
    const FitResult r = Fit(m, data, tc, std::nullopt, rng);
    improved += r.loss_curve.back() < r.loss_curve.front();
  }
  EXPECT_GE(improved, 9);
}

TEST(FitTest, DeterministicUnderSeed) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(3, {6, 1, 2, 2.5});
  Rng rng(3);
  const scg::Dataset data = scg::SampleDataset(g, 60, rng);
  ModelRecipe recipe;
  recipe.mode = Mode::kCausal;
  recipe.graph = g;
  recipe.latent_dim = 2;
  recipe.model.hidden = 4;
  recipe.train.batch_size = 10;
  recipe.train.epochs = 3;
  recipe.privacy = dp::PrivacySpec{0.55, 1.2, 0.0, 1.0};
  const TrainedModel a = TrainFromRecipe(recipe, data, 77);
  const TrainedModel b = TrainFromRecipe(recipe, data, 77);
  EXPECT_EQ(cds::testing::FlatParameters(a.model), cds::testing::FlatParameters(b.model));
  EXPECT_EQ(a.fit.loss_curve, b.fit.loss_curve);
  EXPECT_EQ(ModelRecipe::FromJson(recipe.ToJson()).ToJson(), recipe.ToJson());
}

TEST(FitTest, NoiselessUnclippedMatchesPlainSgd) {
  EXPECT_LE(cds::testing::NoiselessLimitDeviation(30, 9), 1e-12);
}

TEST(FitTest, RefitOnOwnSamplesStaysFinite) {
  const scg::CausalGraph g = scg::MakeSyntheticScg(5, {8, 2, 2, 2.5});
  Rng rng(5);
  ModelConfig cfg;
  cfg.hidden = 6;
  GenerativeModel m =
      GenerativeModel::Create(BuildPlan(g.variables, &g, 3, Mode::kCausal), g.variables, cfg, rng);
  const scg::Dataset own = m.Sample(100, rng);
  TrainConfig tc;
  tc.batch_size = 10;
  tc.epochs = 10;  // 100 steps
  const FitResult r = Fit(m, own, tc, std::nullopt, rng);
  EXPECT_EQ(r.steps, 100u);
  for (double l : r.loss_curve) EXPECT_TRUE(std::isfinite(l));
  for (double p : cds::testing::FlatParameters(m)) ASSERT_TRUE(std::isfinite(p));
}

TEST(FitTest, ConstantBinaryColumnIsLearnedNearlyExactly) {
  std::vector<scg::Variable> schema{MakeVar("B", Kind::kBinary)};
  scg::Dataset data = scg::Dataset::Empty(schema);
  for (int i = 0; i < 100; ++i) data.AppendRow(std::vector<double>{1.0});
  Rng rng(2);
  ModelConfig cfg;
  cfg.hidden = 4;
  GenerativeModel m = GenerativeModel::Create(BuildPlan(schema, nullptr, 1, Mode::kAssociational),
                                              schema, cfg, rng);
  TrainConfig tc;
  tc.batch_size = 20;
  tc.epochs = 200;
  tc.lr = 0.02;
  Fit(m, data, tc, std::nullopt, rng);
  const ElboResult r = Elbo(m, data, rng);
  EXPECT_LE(r.estimate.reconstruction, 0.0);
  EXPECT_GT(r.estimate.reconstruction, -0.05);
  EXPECT_GE(r.estimate.kl, 0.0);
  EXPECT_LE(r.estimate.total, 0.0);
}

}  // namespace
}  // namespace cds::gen
