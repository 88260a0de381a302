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

// DP-SGD aggregation and the Renyi-DP accountant for the Poisson-subsampled
// Gaussian mechanism.

#ifndef CDS_DP_H_
#define CDS_DP_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cds/common.h"
#include "cds/nd.h"
#include "json.hpp"

namespace cds::dp {

inline constexpr double kUnboundedClip = std::numeric_limits<double>::infinity();

struct PrivacySpec {
  double clip_norm = 1.0;         // C; kUnboundedClip only when sigma == 0
  double noise_multiplier = 0.0;  // sigma
  double delta = 1e-5;
  double sampling_rate = 1.0;     // q = batch / n

  // Throws kInvalidArgument on C <= 0, q outside (0, 1], delta outside
  // (0, 1), or an unbounded clip with sigma > 0.
  void Validate() const;
};

struct PrivacyAccount {
  PrivacySpec spec;
  uint64_t steps = 0;
  std::vector<double> orders;
  std::vector<double> rdp;  // cumulative, per order
  double epsilon = 0.0;
  double best_order = 0.0;

  nlohmann::json ToJson() const;
};

struct SensitivityBound {
  enum class Norm { kL1, kL2 };
  double value = 0.0;
  Norm norm = Norm::kL1;
};

// Scales `tape` by min(1, C / ||tape||_2) over all blocks jointly.
nd::GradientTape ClipGradient(const nd::GradientTape& tape, double clip_norm);
void ClipGradientInPlace(nd::GradientTape& tape, double clip_norm);

// Streams per-example gradients into a clipped sum and produces the noisy
// mean (sum + N(0, sigma^2 C^2 I)) / batch.
class NoisyAggregator {
 public:
  NoisyAggregator(const nd::GradientTape& shape, const PrivacySpec& spec);

  // Clips in place, then accumulates.
  void Add(nd::GradientTape& example);
  size_t count() const { return count_; }
  nd::GradientTape Finalize(size_t batch_size, Rng& rng);

 private:
  PrivacySpec spec_;
  nd::GradientTape sum_;
  size_t count_ = 0;
};

// Clipped, noised average of `tapes` with pairwise summation.
nd::GradientTape PrivatizeGradient(std::span<const nd::GradientTape> tapes,
                                   const PrivacySpec& spec, Rng& rng);

// params -= lr * PrivatizeGradient(tapes).
void DpStep(std::span<nd::Matrix* const> params, std::span<const nd::GradientTape> tapes,
            const PrivacySpec& spec, double lr, Rng& rng);

// Per-step RDP of the Poisson-subsampled Gaussian mechanism at integer
// order alpha >= 2.
double RdpSubsampledGaussian(double q, double sigma, int alpha);

const std::vector<double>& DefaultOrders();

PrivacyAccount Account(const PrivacySpec& spec, uint64_t steps);

// Smallest-order-wins conversion of an RDP ledger to epsilon at delta.
double EpsilonFromRdp(std::span<const double> orders, std::span<const double> rdp,
                      double delta, double* best_order = nullptr);

// Bisection on sigma (to 1e-3) so that Account(...).epsilon <= target and
// as close to it as the tolerance allows.
double CalibrateSigma(double sampling_rate, uint64_t steps, double delta,
                      double target_epsilon);

double LaplaceSample(double scale, Rng& rng);
std::vector<double> LaplaceOutputPerturb(std::span<const double> value,
                                         const SensitivityBound& bound,
                                         double epsilon, Rng& rng);

}  // namespace cds::dp

#endif  // CDS_DP_H_
