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

#include "cds/scg.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace cds::scg {
namespace {

Variable Cont(const std::string& name, NoiseSpec noise = NoiseSpec::Gaussian(0, 1)) {
  Variable v;
  v.name = name;
  v.kind = Kind::kContinuous;
  v.noise = noise;
  return v;
}

Variable Bin(const std::string& name, double p = 0.5) {
  Variable v;
  v.name = name;
  v.kind = Kind::kBinary;
  v.noise = NoiseSpec::Bernoulli(p);
  return v;
}

CausalGraph Chain3() {
  CausalGraph g;
  g.variables = {Cont("X1"), Cont("X2"), Cont("X3")};
  g.edges = {{"X1", "X2"}, {"X2", "X3"}};
  g.mechanisms["X2"] = LinearGaussian{{1.0}, 0.0, 1.0};
  g.mechanisms["X3"] = LinearGaussian{{1.0}, 0.0, 1.0};
  return g;
}

void ExpectCode(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << ErrorCodeName(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(ValidateGraphTest, EmptyGraphHasEmptyOrder) {
  EXPECT_TRUE(ValidateGraph(CausalGraph{}).empty());
}

TEST(ValidateGraphTest, ChainOrder) {
  EXPECT_EQ(ValidateGraph(Chain3()), (std::vector<std::string>{"X1", "X2", "X3"}));
}

TEST(ValidateGraphTest, TwoCycleDetected) {
  CausalGraph g;
  g.variables = {Cont("X1"), Cont("X2")};
  g.edges = {{"X1", "X2"}, {"X2", "X1"}};
  ExpectCode(ErrorCode::kCycleDetected, [&] { ValidateGraph(g); });
}

TEST(ValidateGraphTest, MissingMechanismAndArity) {
  CausalGraph g = Chain3();
  g.mechanisms.erase("X3");
  ExpectCode(ErrorCode::kMissingMechanism, [&] { ValidateGraph(g); });
  g = Chain3();
  g.mechanisms["X3"] = LinearGaussian{{1.0, 2.0}, 0.0, 1.0};
  ExpectCode(ErrorCode::kArityMismatch, [&] { ValidateGraph(g); });
}

TEST(ValidateGraphTest, PermutedDeclarationStillTopological) {
  const CausalGraph base = MakeSyntheticScg(5);
  std::vector<size_t> perm(base.variables.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    CausalGraph g = base;
    for (size_t i = 0; i < perm.size(); ++i) g.variables[i] = base.variables[perm[i]];
    const auto order = ValidateGraph(g);
    ASSERT_EQ(order.size(), g.variables.size());
    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& [p, c] : g.edges) EXPECT_LT(pos[p], pos[c]);
  }
}

TEST(SampleDatasetTest, ConstantMechanismsGiveIdenticalRecords) {
  CausalGraph g;
  g.variables = {Cont("A", NoiseSpec::Constant(1.5)), Cont("B", NoiseSpec::Constant(0.0))};
  g.edges = {{"A", "B"}};
  g.mechanisms["B"] = LinearGaussian{{2.0}, 0.25, 0.0};
  Rng rng(1);
  const Dataset d = SampleDataset(g, 5, rng);
  ASSERT_EQ(d.rows, 5u);
  for (size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(d.at(r, 0), 1.5);
    EXPECT_EQ(d.at(r, 1), 3.25);
  }
  EXPECT_TRUE(d.FullyObserved());
}

TEST(SampleDatasetTest, LinearGaussianMomentsMatchClosedForm) {
  CausalGraph g;
  g.variables = {Cont("X1"), Cont("X2", NoiseSpec::None())};
  g.edges = {{"X1", "X2"}};
  g.mechanisms["X2"] = LinearGaussian{{2.0}, 0.0, 0.1};
  Rng rng(2024);
  const size_t n = 100000;
  const Dataset d = SampleDataset(g, n, rng);
  double s = 0, s2 = 0;
  for (size_t r = 0; r < n; ++r) {
    s += d.at(r, 1);
    s2 += d.at(r, 1) * d.at(r, 1);
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  const double true_var = 4.01;
  EXPECT_LT(std::abs(mean), 3.0 * std::sqrt(true_var / n));
  // Var of the sample variance of a Gaussian is 2 sigma^4 / n.
  EXPECT_LT(std::abs(var - true_var), 3.0 * std::sqrt(2.0 / n) * true_var);
}

TEST(SampleDatasetTest, SyntheticShape) {
  const CausalGraph g = MakeSyntheticScg(1);
  Rng rng(1);
  const Dataset d = SampleDataset(g, 1000, rng);
  EXPECT_EQ(d.rows, 1000u);
  EXPECT_EQ(d.cols(), 22u);
  d.Validate();
}

TEST(SampleDatasetTest, ReproducibleBitwise) {
  const CausalGraph g = MakeSyntheticScg(3);
  Rng a(42), b(42);
  const Dataset da = SampleDataset(g, 300, a);
  const Dataset db = SampleDataset(g, 300, b);
  EXPECT_EQ(da.values, db.values);
  EXPECT_EQ(da.mask, db.mask);
}

// Changing a root's marginal must leave the child-given-parent conditional
// untouched.
TEST(SampleDatasetTest, ChildConditionalInvariantToRootIntervention) {
  auto make = [](double p_root) {
    CausalGraph g;
    g.variables = {Bin("R", p_root), Bin("C")};
    g.edges = {{"R", "C"}};
    g.mechanisms["C"] = LogisticBernoulli{{2.0}, -1.0};
    return g;
  };
  auto conditional = [](const Dataset& d) {
    std::array<double, 2> ones{}, count{};
    for (size_t r = 0; r < d.rows; ++r) {
      const int p = static_cast<int>(d.at(r, 0));
      count[p] += 1;
      ones[p] += d.at(r, 1);
    }
    return std::array<double, 2>{ones[0] / count[0], ones[1] / count[1]};
  };
  Rng a(5), b(6);
  const auto c1 = conditional(SampleDataset(make(0.2), 60000, a));
  const auto c2 = conditional(SampleDataset(make(0.8), 60000, b));
  EXPECT_NEAR(c1[0], c2[0], 0.02);
  EXPECT_NEAR(c1[1], c2[1], 0.02);
  EXPECT_NEAR(c1[1], 1.0 / (1.0 + std::exp(-1.0)), 0.02);
}

TEST(SampleDatasetTest, LatentVariablesDropped) {
  CausalGraph g;
  Variable z = Cont("Z");
  z.latent = true;
  g.variables = {z, Cont("X", NoiseSpec::None())};
  g.edges = {{"Z", "X"}};
  g.mechanisms["X"] = LinearGaussian{{1.0}, 0.0, 0.5};
  Rng rng(1);
  const Dataset d = SampleDataset(g, 10, rng);
  ASSERT_EQ(d.cols(), 1u);
  EXPECT_EQ(d.schema[0].name, "X");
}

TEST(CustomExpressionTest, EvaluatesArithmetic) {
  const CustomExpression e = ParseExpression("2 * A + exp(0) - noise / 2");
  std::map<std::string, double, std::less<>> b{{"A", 3.0}, {"noise", 1.0}};
  EXPECT_DOUBLE_EQ(Evaluate(e, b), 6.5);
}

TEST(MaskAtRandomTest, RateZeroUnchanged) {
  Rng rng(1);
  const Dataset d = SampleDataset(MakeSyntheticScg(2), 50, rng);
  const Dataset m = MaskAtRandom(d, 0.0, rng);
  EXPECT_EQ(m.mask, d.mask);
  EXPECT_EQ(m.values, d.values);
}

TEST(MaskAtRandomTest, ObservedFractionConcentrates) {
  CausalGraph g;
  for (int i = 0; i < 10; ++i) g.variables.push_back(Cont("V" + std::to_string(i)));
  Rng rng(7);
  const Dataset d = SampleDataset(g, 1000, rng);
  const Dataset m = MaskAtRandom(d, 0.3, rng);
  size_t observed = 0;
  for (uint8_t x : m.mask) observed += x;
  const double frac = static_cast<double>(observed) / m.mask.size();
  EXPECT_GE(frac, 0.67);
  EXPECT_LE(frac, 0.73);
  for (size_t r = 0; r < m.rows; ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      if (!m.observed(r, c)) EXPECT_TRUE(std::isnan(m.raw(r, c)));
    }
  }
}

TEST(MaskAtRandomTest, EveryRecordKeepsAnObservedCell) {
  CausalGraph g;
  g.variables = {Bin("A"), Cont("B")};
  Rng rng(3);
  const Dataset m = MaskAtRandom(SampleDataset(g, 500, rng), 0.999, rng);
  for (size_t r = 0; r < m.rows; ++r) {
    EXPECT_TRUE(m.observed(r, 0) || m.observed(r, 1));
    if (!m.observed(r, 0)) EXPECT_EQ(m.raw(r, 0), kDiscreteSentinel);
  }
  ExpectCode(ErrorCode::kSchemaViolation, [&] {
    for (size_t r = 0; r < m.rows; ++r) {
      if (!m.observed(r, 1)) m.at(r, 1);
    }
  });
}

TEST(PartialGraphTest, IdentityGroupingIsIsomorphic) {
  const CausalGraph g = Chain3();
  const CausalGraph p = PartialGraph(g, {});
  ASSERT_EQ(p.variables.size(), 3u);
  EXPECT_EQ(p.edges, g.edges);
  EXPECT_EQ(TopologicalOrder(p), TopologicalOrder(g));
}

TEST(PartialGraphTest, CausesAndConditionsCollapseToThreeNodes) {
  CausalGraph g;
  Variable z = Cont("Z");
  z.latent = true;
  g.variables = {z, Bin("C1"), Bin("C2"), Bin("D1"), Bin("D2")};
  g.edges = {{"Z", "C1"}, {"Z", "C2"}, {"Z", "D1"}, {"C1", "D1"}, {"C2", "D2"}, {"C1", "D2"}};
  g.mechanisms["C1"] = LogisticBernoulli{{1.0}, 0.0};
  g.mechanisms["C2"] = LogisticBernoulli{{1.0}, 0.0};
  g.mechanisms["D1"] = LogisticBernoulli{{1.0, 1.0}, 0.0};
  g.mechanisms["D2"] = LogisticBernoulli{{1.0, 1.0}, 0.0};
  const CausalGraph p =
      PartialGraph(g, {{"C1", "X1"}, {"C2", "X1"}, {"D1", "X2"}, {"D2", "X2"}});
  ASSERT_EQ(p.variables.size(), 3u);
  using E = std::pair<std::string, std::string>;
  std::vector<E> edges = p.edges;
  std::sort(edges.begin(), edges.end());
  EXPECT_EQ(edges, (std::vector<E>{{"X1", "X2"}, {"Z", "X1"}, {"Z", "X2"}}));
  EXPECT_TRUE(p.variables[0].latent);
  EXPECT_EQ(p.variables[p.IndexOf("X1")].members, (std::vector<std::string>{"C1", "C2"}));
}

TEST(PartialGraphTest, MergingAcrossIntermediateIsQuotientCycle) {
  ExpectCode(ErrorCode::kQuotientCycle,
             [] { PartialGraph(Chain3(), {{"X1", "G"}, {"X3", "G"}}); });
}

TEST(GraphJsonTest, RoundTrip) {
  const CausalGraph g = MakeSyntheticScg(8);
  const CausalGraph back = GraphFromJson(GraphToJson(g));
  EXPECT_EQ(GraphToJson(back), GraphToJson(g));
  Rng a(1), b(1);
  EXPECT_EQ(SampleDataset(g, 20, a).values, SampleDataset(back, 20, b).values);
}

TEST(DatasetTest, SelectAndDropRows) {
  Rng rng(1);
  const Dataset d = SampleDataset(Chain3(), 4, rng);
  const Dataset w = d.WithoutRow(1);
  ASSERT_EQ(w.rows, 3u);
  EXPECT_EQ(w.raw(1, 0), d.raw(2, 0));
  const std::vector<size_t> idx{3, 0};
  const Dataset s = d.SelectRows(idx);
  EXPECT_EQ(s.raw(0, 2), d.raw(3, 2));
}

}  // namespace
}  // namespace cds::scg
