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

#include "cds/dp.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace cds::dp {
namespace {

nd::GradientTape Tape(std::vector<double> a, std::vector<double> b = {}) {
  nd::GradientTape t;
  nd::Matrix m1(1, a.size());
  for (size_t i = 0; i < a.size(); ++i) m1(0, i) = a[i];
  t.blocks.push_back(m1);
  if (!b.empty()) {
    nd::Matrix m2(b.size(), 1);
    for (size_t i = 0; i < b.size(); ++i) m2(i, 0) = b[i];
    t.blocks.push_back(m2);
  }
  return t;
}

std::vector<double> Flat(const nd::GradientTape& t) {
  std::vector<double> out;
  for (const auto& b : t.blocks) out.insert(out.end(), b.data().begin(), b.data().end());
  return out;
}

// log of the integrand p^alpha q^(1-alpha) integrated by trapezoid in log
// space; p, q given as log densities.
template <typename LogP, typename LogQ>
double QuadratureRenyi(LogP log_p, LogQ log_q, int alpha, double lo, double hi, double h) {
  std::vector<double> v;
  for (double x = lo; x <= hi; x += h) v.push_back(alpha * log_p(x) + (1 - alpha) * log_q(x));
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    s += (i == 0 || i + 1 == v.size() ? 0.5 : 1.0) * std::exp(v[i] - m);
  }
  return (m + std::log(s * h)) / (alpha - 1);
}

double LogNormal(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * d * d - std::log(sigma) - 0.91893853320467274;
}

TEST(ClipGradientTest, HalvesNormTwoTape) {
  const nd::GradientTape t = Tape({1.2, -1.6});  // norm 2
  const nd::GradientTape c = ClipGradient(t, 1.0);
  EXPECT_DOUBLE_EQ(c.blocks[0](0, 0), 0.6);
  EXPECT_DOUBLE_EQ(c.blocks[0](0, 1), -0.8);
}

TEST(ClipGradientTest, SmallTapeUnchanged) {
  const nd::GradientTape t = Tape({0.3});
  EXPECT_EQ(Flat(ClipGradient(t, 1.0)), Flat(t));
}

TEST(ClipGradientTest, BoundedDirectionPreservingIdempotent) {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const nd::GradientTape t = Tape({StandardNormal(rng) * 5, StandardNormal(rng)},
                                    {StandardNormal(rng) * 3, StandardNormal(rng), 0.1});
    const double c = 0.1 + Uniform01(rng) * 2;
    const nd::GradientTape once = ClipGradient(t, c);
    EXPECT_LE(once.Norm(), c + 1e-12);
    const auto a = Flat(t), b = Flat(once);
    double dot = 0;
    for (size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
    EXPECT_NEAR(dot / (t.Norm() * once.Norm()), 1.0, 1e-12);
    // A clipped norm can round to one ulp above c; re-clipping is then a
    // rescale by 1 - O(eps).
    const auto twice = Flat(ClipGradient(once, c));
    for (size_t k = 0; k < b.size(); ++k) EXPECT_NEAR(twice[k], b[k], 1e-15 * std::abs(b[k]));
  }
}

TEST(DpStepTest, NoiselessUnboundedIsAveragedSgdBitwise) {
  PrivacySpec spec;
  spec.clip_norm = kUnboundedClip;
  spec.noise_multiplier = 0.0;
  const std::vector<nd::GradientTape> tapes{Tape({0.3, -7.0}), Tape({1.1, 2.5})};
  nd::Matrix p(1, 2, 0.25);
  nd::Matrix ref = p;
  nd::Matrix* ptr = &p;
  Rng rng(1);
  DpStep(std::span<nd::Matrix* const>(&ptr, 1), tapes, spec, 0.01, rng);
  for (size_t i = 0; i < 2; ++i) {
    const double g = (tapes[0].blocks[0](0, i) + tapes[1].blocks[0](0, i)) * 0.5;
    ref(0, i) -= 0.01 * g;
    EXPECT_EQ(p(0, i), ref(0, i));
  }
}

TEST(DpStepTest, IdenticalTapesAtClipNorm) {
  PrivacySpec spec;
  spec.clip_norm = 5.0;
  spec.noise_multiplier = 0.0;
  const std::vector<nd::GradientTape> tapes(4, Tape({3.0, 4.0}));
  nd::Matrix p(1, 2, 0.0);
  nd::Matrix* ptr = &p;
  Rng rng(1);
  DpStep(std::span<nd::Matrix* const>(&ptr, 1), tapes, spec, 0.5, rng);
  EXPECT_EQ(p(0, 0), -1.5);
  EXPECT_EQ(p(0, 1), -2.0);
}

TEST(DpStepTest, NoiseStdMatchesSigmaClipOverBatch) {
  PrivacySpec spec;
  spec.clip_norm = 1.0;
  spec.noise_multiplier = 1.0;
  const size_t batch = 4;
  const std::vector<nd::GradientTape> tapes(batch, Tape({0.0}));
  Rng rng(99);
  const int steps = 100000;
  double s = 0, s2 = 0;
  nd::Matrix p(1, 1, 0.0);
  nd::Matrix* ptr = &p;
  for (int i = 0; i < steps; ++i) {
    const double before = p(0, 0);
    DpStep(std::span<nd::Matrix* const>(&ptr, 1), tapes, spec, 1.0, rng);
    const double d = p(0, 0) - before;
    s += d;
    s2 += d * d;
  }
  const double mean = s / steps;
  const double sd = std::sqrt(s2 / steps - mean * mean);
  EXPECT_NEAR(sd, 0.25, 0.0025);
}

TEST(DpStepTest, NoiselessSumIndependentOfOrder) {
  PrivacySpec spec;
  spec.clip_norm = 1.0;
  spec.noise_multiplier = 0.0;
  Rng rng(5);
  std::vector<nd::GradientTape> tapes;
  for (int i = 0; i < 37; ++i) {
    tapes.push_back(Tape({StandardNormal(rng), StandardNormal(rng)}, {StandardNormal(rng)}));
  }
  const auto a = Flat(PrivatizeGradient(tapes, spec, rng));
  std::shuffle(tapes.begin(), tapes.end(), rng);
  const auto b = Flat(PrivatizeGradient(tapes, spec, rng));
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(PrivacySpecTest, UnboundedClipNeedsZeroNoise) {
  PrivacySpec spec;
  spec.clip_norm = kUnboundedClip;
  spec.noise_multiplier = 1.0;
  EXPECT_THROW(spec.Validate(), Error);
  spec.noise_multiplier = 0.0;
  EXPECT_NO_THROW(spec.Validate());
  spec.sampling_rate = 0.0;
  EXPECT_THROW(spec.Validate(), Error);
}

TEST(RdpTest, FullBatchMatchesGaussianClosedForm) {
  EXPECT_NEAR(RdpSubsampledGaussian(1.0, 1.0, 2), 1.0, 1e-9);
  for (double sigma : {0.7, 1.0, 3.0}) {
    for (int alpha : {2, 5, 17, 64}) {
      EXPECT_NEAR(RdpSubsampledGaussian(1.0, sigma, alpha), alpha / (2 * sigma * sigma), 1e-9);
    }
  }
}

TEST(RdpTest, ZeroSamplingRateIsFree) { EXPECT_EQ(RdpSubsampledGaussian(0.0, 1.0, 8), 0.0); }

TEST(RdpTest, UpperBoundsQuadrature) {
  const double q = 0.1, sigma = 2.0;
  const int alpha = 8;
  auto log_p = [&](double x) {
    return std::log((1 - q) * std::exp(LogNormal(x, 0, sigma)) +
                    q * std::exp(LogNormal(x, 1, sigma)));
  };
  auto log_q = [&](double x) { return LogNormal(x, 0, sigma); };
  const double formula = RdpSubsampledGaussian(q, sigma, alpha);
  const double forward = QuadratureRenyi(log_p, log_q, alpha, -40, 60, 1e-3);
  const double reverse = QuadratureRenyi(log_q, log_p, alpha, -40, 60, 1e-3);
  EXPECT_GE(formula + 1e-9, forward);
  EXPECT_GE(formula + 1e-9, reverse);
}

TEST(AccountTest, ZeroStepsZeroEpsilon) {
  PrivacySpec spec;
  spec.noise_multiplier = 1.0;
  spec.sampling_rate = 0.1;
  EXPECT_EQ(Account(spec, 0).epsilon, 0.0);
}

TEST(AccountTest, MonotoneInSigmaStepsAndRate) {
  PrivacySpec a;
  a.noise_multiplier = 1.0;
  a.sampling_rate = 0.1;
  a.delta = 1e-3;
  PrivacySpec b = a;
  b.noise_multiplier = 2.0;
  const PrivacyAccount la = Account(a, 100), lb = Account(b, 100);
  for (size_t i = 0; i < la.rdp.size(); ++i) EXPECT_LE(lb.rdp[i], la.rdp[i]);
  EXPECT_LE(lb.epsilon, la.epsilon);
  EXPECT_LE(Account(a, 50).epsilon, la.epsilon);
  PrivacySpec c = a;
  c.sampling_rate = 0.2;
  EXPECT_LE(la.epsilon, Account(c, 100).epsilon);
}

TEST(AccountTest, ComposesAdditivelyOverSplits) {
  PrivacySpec spec;
  spec.noise_multiplier = 1.1;
  spec.sampling_rate = 0.1;
  spec.delta = 1e-3;
  for (uint64_t t1 : {1u, 137u, 250u, 333u, 499u}) {
    const PrivacyAccount x = Account(spec, t1), y = Account(spec, 500 - t1), z = Account(spec, 500);
    std::vector<double> sum(x.rdp.size());
    for (size_t i = 0; i < sum.size(); ++i) {
      sum[i] = x.rdp[i] + y.rdp[i];
      EXPECT_EQ(sum[i], z.rdp[i]) << t1;
    }
    EXPECT_EQ(EpsilonFromRdp(x.orders, sum, spec.delta), z.epsilon);
  }
}

TEST(AccountTest, ConversionIsMinimumOverOrders) {
  PrivacySpec spec;
  spec.noise_multiplier = 1.3;
  spec.sampling_rate = 0.05;
  spec.delta = 1e-5;
  const PrivacyAccount acc = Account(spec, 300);
  double best = INFINITY;
  for (size_t i = 0; i < acc.orders.size(); ++i) {
    best = std::min(best, acc.rdp[i] + std::log(1 / spec.delta) / (acc.orders[i] - 1));
  }
  EXPECT_EQ(acc.epsilon, best);
  EXPECT_EQ(acc.ToJson()["sampling_assumption"], "poisson-approx");
}

TEST(CalibrateSigmaTest, ReachesTargetEpsilon) {
  const double sigma = CalibrateSigma(0.1, 500, 1e-3, 3.9);
  PrivacySpec spec;
  spec.noise_multiplier = sigma;
  spec.sampling_rate = 0.1;
  spec.delta = 1e-3;
  EXPECT_NEAR(Account(spec, 500).epsilon, 3.9, 0.05);
  EXPECT_LE(Account(spec, 500).epsilon, 3.9);
}

TEST(CalibrateSigmaTest, IdenticalRequestsAgree) {
  EXPECT_EQ(CalibrateSigma(0.2, 100, 1e-3, 2.0), CalibrateSigma(0.2, 100, 1e-3, 2.0));
  EXPECT_THROW(CalibrateSigma(0.2, 100, 1e-3, 0.0), Error);
}

double MeanAbsLaplace(double delta_h, double eps, int n, uint64_t seed) {
  Rng rng(seed);
  const std::vector<double> v{0.0};
  const SensitivityBound bound{delta_h, SensitivityBound::Norm::kL1};
  double s = 0;
  for (int i = 0; i < n; ++i) s += std::abs(LaplaceOutputPerturb(v, bound, eps, rng)[0]);
  return s / n;
}

TEST(LaplaceTest, ZeroSensitivityLeavesValue) {
  Rng rng(1);
  const std::vector<double> v{1.5, -2.0};
  EXPECT_EQ(LaplaceOutputPerturb(v, {0.0, SensitivityBound::Norm::kL1}, 1.0, rng), v);
}

TEST(LaplaceTest, ScaleMatchesMaximumLikelihood) {
  const double b1 = MeanAbsLaplace(1.0, 1.0, 1000000, 3);
  EXPECT_NEAR(b1, 1.0, 0.01);
  const double b2 = MeanAbsLaplace(2.0, 1.0, 1000000, 4);
  EXPECT_NEAR(b2 / b1, 2.0, 0.04);
}

}  // namespace
}  // namespace cds::dp
