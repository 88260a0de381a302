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

#ifndef CDS_COMMON_H_
#define CDS_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cds {

// Every failure raised by the library carries one of these codes so callers
// (and the CLI exit-code mapping) can branch without parsing messages.
enum class ErrorCode {
  kInvalidArgument,
  kCycleDetected,
  kMissingMechanism,
  kArityMismatch,
  kInvalidMechanism,
  kQuotientCycle,
  kShapeMismatch,
  kStaleCache,
  kMissingGraph,
  kSchemaMismatch,
  kNonFiniteLoss,
  kNumericalOverflow,
  kUnfittedBins,
  kGridMismatch,
  kInsufficientCategoricalTargets,
  kUnreachableEpsilon,
  kNonConvergence,
  kParseError,
  kSchemaViolation,
  kStageFailure,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

using Rng = std::mt19937_64;

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view bytes);

// SplitMix64 finalizer; used to decorrelate derived seeds.
uint64_t Mix64(uint64_t x);

// Seed for a stochastic consumer identified by `label` under `master`.
uint64_t DeriveSeed(uint64_t master, std::string_view label);
uint64_t DeriveSeed(uint64_t master, std::string_view label, uint64_t index);

// While enabled, every label passed to DeriveSeed is recorded. Enabling
// clears the record.
void SetSeedAudit(bool enabled);
std::vector<std::string> ConsumedSeedLabels();  // sorted, unique

double StandardNormal(Rng& rng);
double Uniform01(Rng& rng);

// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
// executed exactly once; results must be written to per-index slots.
void ParallelFor(size_t count, size_t workers,
                 const std::function<void(size_t)>& body);

size_t DefaultWorkers();

}  // namespace cds

#endif  // CDS_COMMON_H_
