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

namespace cds::dp {
namespace {

double LogAddExp(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

void PairwiseSum(std::span<const nd::GradientTape> tapes, nd::GradientTape& out) {
  if (tapes.size() == 1) {
    out.AddScaled(tapes[0], 1.0);
    return;
  }
  const size_t half = tapes.size() / 2;
  nd::GradientTape right = out;
  right.SetZero();
  PairwiseSum(tapes.first(half), out);
  PairwiseSum(tapes.subspan(half), right);
  out.AddScaled(right, 1.0);
}

void AddNoiseAndAverage(nd::GradientTape& sum, const PrivacySpec& spec, size_t batch,
                        Rng& rng) {
  const double stddev = spec.noise_multiplier > 0 ? spec.noise_multiplier * spec.clip_norm : 0.0;
  const double inv = batch > 0 ? 1.0 / static_cast<double>(batch) : 0.0;
  for (auto& b : sum.blocks) {
    for (double& x : b.data()) {
      if (stddev > 0) x += stddev * StandardNormal(rng);
      x *= inv;
    }
  }
}

}  // namespace

void PrivacySpec::Validate() const {
  if (!(clip_norm > 0)) throw Error(ErrorCode::kInvalidArgument, "clip norm must be > 0");
  if (!(noise_multiplier >= 0) || !std::isfinite(noise_multiplier)) {
    throw Error(ErrorCode::kInvalidArgument, "noise multiplier must be finite and >= 0");
  }
  if (!(sampling_rate > 0 && sampling_rate <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling rate must lie in (0, 1]");
  }
  if (!(delta > 0 && delta < 1)) throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  if (std::isinf(clip_norm) && noise_multiplier > 0) {
    throw Error(ErrorCode::kInvalidArgument, "unbounded clip norm requires sigma = 0");
  }
}

nlohmann::json PrivacyAccount::ToJson() const {
  nlohmann::json j;
  j["C"] = std::isinf(spec.clip_norm) ? nlohmann::json(nullptr) : nlohmann::json(spec.clip_norm);
  j["sigma"] = spec.noise_multiplier;
  j["q"] = spec.sampling_rate;
  j["T"] = steps;
  j["delta"] = spec.delta;
  j["orders"] = orders;
  j["rdp"] = rdp;
  j["epsilon"] = std::isinf(epsilon) ? nlohmann::json(nullptr) : nlohmann::json(epsilon);
  j["best_order"] = best_order;
  j["sampling_assumption"] = "poisson-approx";
  return j;
}

nd::GradientTape ClipGradient(const nd::GradientTape& tape, double clip_norm) {
  nd::GradientTape out = tape;
  ClipGradientInPlace(out, clip_norm);
  return out;
}

void ClipGradientInPlace(nd::GradientTape& tape, double clip_norm) {
  if (!(clip_norm > 0)) throw Error(ErrorCode::kInvalidArgument, "clip norm must be > 0");
  if (std::isinf(clip_norm)) return;
  const double norm = tape.Norm();
  if (norm > clip_norm) tape.Scale(clip_norm / norm);
}

NoisyAggregator::NoisyAggregator(const nd::GradientTape& shape, const PrivacySpec& spec)
    : spec_(spec), sum_(shape) {
  sum_.SetZero();
}

void NoisyAggregator::Add(nd::GradientTape& example) {
  ClipGradientInPlace(example, spec_.clip_norm);
  sum_.AddScaled(example, 1.0);
  ++count_;
}

nd::GradientTape NoisyAggregator::Finalize(size_t batch_size, Rng& rng) {
  nd::GradientTape out = std::move(sum_);
  AddNoiseAndAverage(out, spec_, batch_size, rng);
  sum_ = out;
  sum_.SetZero();
  count_ = 0;
  return out;
}

nd::GradientTape PrivatizeGradient(std::span<const nd::GradientTape> tapes,
                                   const PrivacySpec& spec, Rng& rng) {
  if (tapes.empty()) throw Error(ErrorCode::kInvalidArgument, "no gradients to privatize");
  std::vector<nd::GradientTape> clipped;
  clipped.reserve(tapes.size());
  for (const auto& t : tapes) {
    if (!t.SameShape(tapes[0])) throw Error(ErrorCode::kShapeMismatch, "tape shapes differ");
    clipped.push_back(ClipGradient(t, spec.clip_norm));
  }
  nd::GradientTape sum = tapes[0];
  sum.SetZero();
  PairwiseSum(clipped, sum);
  AddNoiseAndAverage(sum, spec, tapes.size(), rng);
  return sum;
}

void DpStep(std::span<nd::Matrix* const> params, std::span<const nd::GradientTape> tapes,
            const PrivacySpec& spec, double lr, Rng& rng) {
  const nd::GradientTape g = PrivatizeGradient(tapes, spec, rng);
  nd::Sgd(lr).Step(params, g);
}

double RdpSubsampledGaussian(double q, double sigma, int alpha) {
  if (!(sigma > 0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be > 0");
  if (!(q >= 0 && q <= 1)) throw Error(ErrorCode::kInvalidArgument, "q must lie in [0, 1]");
  if (alpha < 2) throw Error(ErrorCode::kInvalidArgument, "order must be an integer >= 2");
  if (q == 0) return 0.0;
  const double a = alpha;
  const double log_q = std::log(q);
  const double log_1mq = q < 1 ? std::log1p(-q) : -INFINITY;
  double log_sum = -INFINITY;
  for (int j = 0; j <= alpha; ++j) {
    const double jj = j;
    double term = std::lgamma(a + 1) - std::lgamma(jj + 1) - std::lgamma(a - jj + 1) +
                  jj * log_q + jj * (jj - 1) / (2.0 * sigma * sigma);
    if (alpha - j > 0) term += (a - jj) * log_1mq;
    log_sum = LogAddExp(log_sum, term);
  }
  const double rdp = log_sum / (a - 1);
  if (!std::isfinite(rdp)) {
    throw Error(ErrorCode::kNumericalOverflow,
                "rdp overflow at q=" + std::to_string(q) + " sigma=" + std::to_string(sigma) +
                    " alpha=" + std::to_string(alpha));
  }
  return std::max(rdp, 0.0);
}

const std::vector<double>& DefaultOrders() {
  static const std::vector<double> orders = [] {
    std::vector<double> o;
    for (int a = 2; a <= 64; ++a) o.push_back(a);
    for (int a : {80, 128, 256, 512}) o.push_back(a);
    return o;
  }();
  return orders;
}

double EpsilonFromRdp(std::span<const double> orders, std::span<const double> rdp,
                      double delta, double* best_order) {
  double best = INFINITY;
  double best_a = orders.empty() ? 0.0 : orders[0];
  for (size_t i = 0; i < orders.size(); ++i) {
    const double eps = rdp[i] + std::log(1.0 / delta) / (orders[i] - 1.0);
    if (eps < best) {  // strict: ties keep the smaller order
      best = eps;
      best_a = orders[i];
    }
  }
  if (best_order) *best_order = best_a;
  return best;
}

namespace {

// Rounds x > 0 up to kLedgerBits significant bits. Step counts below
// 2^(53 - kLedgerBits) then multiply and add without rounding, so ledgers
// compose exactly over any split of the steps.
constexpr int kLedgerBits = 40;

double RoundUpToLedgerGrid(double x) {
  if (!(x > 0) || !std::isfinite(x)) return x;
  int e = 0;
  std::frexp(x, &e);
  return std::ldexp(std::ceil(std::ldexp(x, kLedgerBits - e)), e - kLedgerBits);
}

}  // namespace

PrivacyAccount Account(const PrivacySpec& spec, uint64_t steps) {
  PrivacyAccount acc;
  acc.spec = spec;
  acc.steps = steps;
  acc.orders = DefaultOrders();
  acc.rdp.assign(acc.orders.size(), 0.0);
  if (steps == 0) {
    acc.epsilon = 0.0;
    acc.best_order = acc.orders.front();
    return acc;
  }
  if (spec.noise_multiplier == 0) {
    acc.rdp.assign(acc.orders.size(), INFINITY);
    acc.epsilon = INFINITY;
    acc.best_order = acc.orders.front();
    return acc;
  }
  for (size_t i = 0; i < acc.orders.size(); ++i) {
    double per_step;
    try {
      per_step = RdpSubsampledGaussian(spec.sampling_rate, spec.noise_multiplier,
                                       static_cast<int>(acc.orders[i]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumericalOverflow) throw;
      per_step = INFINITY;  // this order is unusable; others may still bound epsilon
    }
    acc.rdp[i] = static_cast<double>(steps) * RoundUpToLedgerGrid(per_step);
  }
  acc.epsilon = EpsilonFromRdp(acc.orders, acc.rdp, spec.delta, &acc.best_order);
  return acc;
}

double CalibrateSigma(double sampling_rate, uint64_t steps, double delta,
                      double target_epsilon) {
  if (!(target_epsilon > 0) || !std::isfinite(target_epsilon)) {
    throw Error(ErrorCode::kUnreachableEpsilon, "target epsilon must be finite and > 0");
  }
  PrivacySpec spec;
  spec.sampling_rate = sampling_rate;
  spec.delta = delta;
  spec.clip_norm = 1.0;
  auto eps_at = [&](double sigma) {
    spec.noise_multiplier = sigma;
    return Account(spec, steps).epsilon;
  };
  double lo = 0.05;
  double hi = 1.0;
  if (eps_at(lo) <= target_epsilon) return lo;
  while (eps_at(hi) > target_epsilon) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) {
      throw Error(ErrorCode::kUnreachableEpsilon,
                  "no sigma below 1e4 reaches epsilon " + std::to_string(target_epsilon));
    }
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (eps_at(mid) > target_epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double LaplaceSample(double scale, Rng& rng) {
  if (scale == 0) return 0.0;
  double u = Uniform01(rng) - 0.5;
  while (u == -0.5) u = Uniform01(rng) - 0.5;
  return -scale * (u < 0 ? -1.0 : 1.0) * std::log1p(-2.0 * std::fabs(u));
}

std::vector<double> LaplaceOutputPerturb(std::span<const double> value,
                                         const SensitivityBound& bound, double epsilon,
                                         Rng& rng) {
  if (!(bound.value >= 0) || !std::isfinite(bound.value)) {
    throw Error(ErrorCode::kInvalidArgument, "sensitivity must be finite and >= 0");
  }
  if (!(epsilon > 0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be > 0");
  const double scale = bound.value / epsilon;
  std::vector<double> out(value.begin(), value.end());
  for (double& x : out) x += LaplaceSample(scale, rng);
  return out;
}

}  // namespace cds::dp
