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

// Downstream utility of synthetic data: predict each chosen attribute from
// all others, training once on original and once on synthetic rows, and
// score both on held-out original rows.

#ifndef CDS_UTILITY_H_
#define CDS_UTILITY_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cds/clf.h"
#include "cds/genmodel.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::utility {

struct UtilityTask {
  size_t target = 0;
  std::vector<size_t> features;
  std::vector<size_t> train_rows;  // original rows, target observed
  std::vector<size_t> test_rows;
};

// Distinct discrete targets drawn without replacement, each with its own
// stratified split. Throws kInsufficientCategoricalTargets when fewer than
// `count` discrete attributes exist.
std::vector<UtilityTask> MakeTasks(const scg::Dataset& data, size_t count, uint64_t seed,
                                   double train_fraction = 0.7);

// Design matrix for `rows` of `data` over `features`: binary and continuous
// values as-is, categorical one-hot, hidden cells as zeros.
nd::Matrix DesignMatrix(const scg::Dataset& data, const std::vector<size_t>& rows,
                        const std::vector<size_t>& features);
std::vector<int> Labels(const scg::Dataset& data, const std::vector<size_t>& rows, size_t target);

struct UtilityCell {
  size_t target = 0;
  std::string target_name;
  clf::Kind classifier = clf::Kind::kLogistic;
  double original = 0.0;   // accuracy, percent
  double synthetic = 0.0;
  double delta() const { return original - synthetic; }
};

struct UtilityReport {
  std::vector<UtilityCell> cells;

  double MeanDelta() const;
  double MeanOriginal() const;
  double MeanSynthetic() const;
  // Per-classifier mean delta in AllKinds() order (only kinds present).
  std::vector<std::pair<clf::Kind, double>> DeltaByClassifier() const;
  std::vector<std::pair<clf::Kind, double>> OriginalByClassifier() const;
  // "kernel & 6.83" rows.
  std::vector<std::string> TableRows() const;
  nlohmann::json ToJson() const;
};

// Throws kSchemaMismatch when the schemas differ and kSchemaViolation when
// the synthetic data has hidden cells.
UtilityReport EvaluateUtility(const scg::Dataset& original, const scg::Dataset& synthetic,
                              const std::vector<UtilityTask>& tasks,
                              const std::vector<clf::Kind>& kinds, uint64_t seed,
                              const clf::Hyper& hp = {});

struct SweepConfig {
  gen::ModelRecipe base;          // mode, graph and privacy are overwritten
  double causal_clip = 0.55;
  double associational_clip = 0.65;
  size_t tasks = 20;
  std::vector<clf::Kind> kinds = clf::AllKinds();
  clf::Hyper hp;
  double delta = 0.0;             // 0 means 1/n
};

struct SweepPoint {
  double target_epsilon = 0.0;    // infinity means non-private
  gen::Mode mode = gen::Mode::kCausal;
  double sigma = 0.0;
  double ledger_epsilon = 0.0;
  double mean_accuracy = 0.0;     // synthetic arm, percent
  double mean_delta = 0.0;
};

struct SweepTable {
  std::vector<SweepPoint> points;
  // Points whose utility dropped while epsilon grew (soft monotonicity).
  std::vector<size_t> flagged;
  nlohmann::json ToJson() const;
  std::string Csv() const;
};

// For each epsilon: calibrate sigma for the recipe's batch and epochs, train
// a causal and an associational model, sample |data| rows from each, and
// evaluate utility. Throws kUnreachableEpsilon.
SweepTable PrivacyUtilitySweep(const scg::Dataset& data, const scg::CausalGraph& graph,
                               const std::vector<double>& epsilons, const SweepConfig& cfg,
                               uint64_t seed);

struct PairplotResult {
  std::vector<size_t> attributes;
  std::string csv;
  std::string svg;
  // Diagonal histograms: [attribute][bin] for each source.
  std::vector<std::vector<double>> original_hist;
  std::vector<std::vector<double>> synthetic_hist;
};

PairplotResult PairplotExport(const scg::Dataset& original, const scg::Dataset& synthetic,
                              size_t attribute_count, uint64_t seed);

}  // namespace cds::utility

#endif  // CDS_UTILITY_H_
