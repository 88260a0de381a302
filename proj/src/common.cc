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

#include "cds/common.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

namespace cds {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kMissingMechanism: return "MissingMechanism";
    case ErrorCode::kArityMismatch: return "ArityMismatch";
    case ErrorCode::kInvalidMechanism: return "InvalidMechanism";
    case ErrorCode::kQuotientCycle: return "QuotientCycle";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kMissingGraph: return "MissingGraph";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kNumericalOverflow: return "NumericalOverflow";
    case ErrorCode::kUnfittedBins: return "UnfittedBins";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kInsufficientCategoricalTargets:
      return "InsufficientCategoricalTargets";
    case ErrorCode::kUnreachableEpsilon: return "UnreachableEpsilon";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kStageFailure: return "StageFailure";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::atomic<bool> g_audit{false};
std::mutex g_audit_mu;
std::set<std::string, std::less<>>& AuditSet() {
  static std::set<std::string, std::less<>> labels;
  return labels;
}

}  // namespace

void SetSeedAudit(bool enabled) {
  std::lock_guard<std::mutex> lock(g_audit_mu);
  if (enabled) AuditSet().clear();
  g_audit = enabled;
}

std::vector<std::string> ConsumedSeedLabels() {
  std::lock_guard<std::mutex> lock(g_audit_mu);
  return {AuditSet().begin(), AuditSet().end()};
}

uint64_t DeriveSeed(uint64_t master, std::string_view label) {
  if (g_audit.load(std::memory_order_relaxed)) {
    std::lock_guard<std::mutex> lock(g_audit_mu);
    if (AuditSet().find(label) == AuditSet().end()) AuditSet().emplace(label);
  }
  return Mix64(master ^ Mix64(Fnv1a64(label)));
}

uint64_t DeriveSeed(uint64_t master, std::string_view label, uint64_t index) {
  return Mix64(DeriveSeed(master, label) + Mix64(index + 1));
}

double StandardNormal(Rng& rng) {
  // Box-Muller on the raw engine keeps draws identical across standard
  // library implementations.
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  double u1 = Uniform01(rng);
  while (u1 <= 0.0) u1 = Uniform01(rng);
  const double u2 = Uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

size_t DefaultWorkers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void ParallelFor(size_t count, size_t workers,
                 const std::function<void(size_t)>& body) {
  workers = std::max<size_t>(1, std::min(workers, count));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cds
