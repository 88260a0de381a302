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

// Shadow-model membership inference against synthetic-data generators:
// generators are trained with and without a target record, their samples
// are summarized by feature extractors, and a classifier learns to tell the
// two apart.

#ifndef CDS_ATTACK_H_
#define CDS_ATTACK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cds/clf.h"
#include "cds/genmodel.h"
#include "cds/nd.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::attack {

enum class ExtractorKind { kNaive, kHistogram, kCorrelations, kEnsemble };

std::string ExtractorName(ExtractorKind kind);   // "naive", "hist", "corr", "ens"
std::string ExtractorLabel(ExtractorKind kind);  // "Naive", "Histogram", ...
ExtractorKind ParseExtractor(const std::string& name);
const std::vector<ExtractorKind>& AllExtractors();

class FeatureExtractor {
 public:
  explicit FeatureExtractor(ExtractorKind kind) : kind_(kind) {}

  // Records the schema and, for histogram-based kinds, the bins: one per
  // level for discrete attributes and ten equal-width bins over the
  // reference range for continuous ones.
  void Fit(const scg::Dataset& reference);
  bool fitted() const { return fitted_; }
  ExtractorKind kind() const { return kind_; }
  size_t Dimension() const;

  // Throws kUnfittedBins before Fit for histogram-based kinds and
  // kSchemaViolation on masked cells.
  std::vector<double> Extract(const scg::Dataset& sample) const;

  static constexpr size_t kContinuousBins = 10;

 private:
  std::vector<double> Naive(const scg::Dataset& s) const;
  std::vector<double> Histogram(const scg::Dataset& s) const;
  std::vector<double> Correlations(const scg::Dataset& s) const;

  ExtractorKind kind_;
  bool fitted_ = false;
  size_t cols_ = 0;
  std::vector<scg::Variable> schema_;
  std::vector<double> lo_, hi_;
};

// Anything that can be sampled after training.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual scg::Dataset Sample(size_t n, Rng& rng) const = 0;
};

// Trains a generator on `data` under `seed`; must be deterministic.
using Trainer = std::function<std::unique_ptr<Generator>(const scg::Dataset& data, uint64_t seed)>;

Trainer NeuralTrainer(gen::ModelRecipe recipe);
// Replays its training rows, each pass in a fresh shuffled order.
Trainer MemorizerTrainer();
// Resamples rows of `reference` with replacement, ignoring the training data.
Trainer ObliviousTrainer(scg::Dataset reference);

struct AttackConfig {
  size_t n_targets = 5;
  size_t reps = 5;
  size_t train_size = 0;      // t; 0 means |D|
  size_t n_samples = 100;     // n_s
  size_t sample_size = 100;   // s
  double train_fraction = 0.8;
  std::vector<size_t> targets;  // explicit targets override random choice
  size_t workers = 0;           // 0 means DefaultWorkers()

  nlohmann::json ToJson() const;
};

struct AttackDataset {
  nd::Matrix features;
  std::vector<int> labels;        // 1 = target was in the training data
  std::vector<size_t> model_ids;  // generator each row was sampled from
};

struct AttackCell {
  ExtractorKind extractor = ExtractorKind::kNaive;
  clf::Kind classifier = clf::Kind::kLogistic;
  clf::EvalReport eval;
};

struct AttackReport {
  bool dp = false;
  std::vector<AttackCell> cells;
  nlohmann::json metadata;

  // Rows shaped "Naive & kernel & 79.7 & 76.97 & 82.42".
  std::vector<std::string> TableRows() const;
  nlohmann::json ToJson() const;
  static AttackReport FromJson(const nlohmann::json& j);
};

struct AttackOutcome {
  AttackReport report;
  std::vector<size_t> targets;
  size_t models_trained = 0;
  std::vector<size_t> eval_models;  // held-out generator ids
};

AttackOutcome RunAttack(const scg::Dataset& data, const Trainer& trainer,
                        const AttackConfig& cfg, const std::vector<ExtractorKind>& extractors,
                        const std::vector<clf::Kind>& classifiers, uint64_t seed,
                        const clf::Hyper& hp = {});

struct DeltaCell {
  ExtractorKind extractor;
  clf::Kind classifier;
  double delta;  // accuracy(a) - accuracy(b)
};

// Throws kGridMismatch unless both reports cover the same cells in order.
std::vector<DeltaCell> AdvantageDelta(const AttackReport& a, const AttackReport& b);
nlohmann::json DeltaToJson(const std::vector<DeltaCell>& deltas);

// "79.7"-style number: two decimals with trailing zeros removed.
std::string FormatNumber(double v);

}  // namespace cds::attack

#endif  // CDS_ATTACK_H_
