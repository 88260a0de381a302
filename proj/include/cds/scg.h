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

// Structured causal graphs: variables, mechanisms, ground-truth sampling and
// graph coarsening.

#ifndef CDS_SCG_H_
#define CDS_SCG_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cds/common.h"
#include "json.hpp"

namespace cds::scg {

enum class Kind { kBinary, kCategorical, kContinuous };

std::string KindName(Kind kind);
Kind ParseKind(const std::string& name);

// Distribution of the exogenous noise term of a variable. For roots without a
// mechanism it is the full marginal.
struct NoiseSpec {
  enum class Family { kNone, kGaussian, kUniform, kBernoulli, kCategorical,
                      kConstant };
  Family family = Family::kNone;
  // gaussian: {mean, std}; uniform: {low, high}; bernoulli: {p};
  // categorical: probabilities; constant: {value}.
  std::vector<double> params;

  static NoiseSpec None() { return {}; }
  static NoiseSpec Gaussian(double mean, double std) {
    return {Family::kGaussian, {mean, std}};
  }
  static NoiseSpec Uniform(double low, double high) {
    return {Family::kUniform, {low, high}};
  }
  static NoiseSpec Bernoulli(double p) { return {Family::kBernoulli, {p}}; }
  static NoiseSpec Categorical(std::vector<double> probs) {
    return {Family::kCategorical, std::move(probs)};
  }
  static NoiseSpec Constant(double v) { return {Family::kConstant, {v}}; }

  double Draw(Rng& rng) const;
  // Closed interval containing every draw; infinite for Gaussian noise.
  std::pair<double, double> Support() const;
};

struct Variable {
  std::string name;
  Kind kind = Kind::kContinuous;
  int cardinality = 0;  // categorical only; binary is implicitly 2
  NoiseSpec noise;
  // Latent variables are sampled but never emitted into datasets.
  bool latent = false;
  // Non-empty for coarsened nodes: the original variables the node stands for.
  std::vector<std::string> members;

  bool IsDiscrete() const { return kind != Kind::kContinuous; }
  int Levels() const {
    return kind == Kind::kBinary ? 2 : (kind == Kind::kCategorical ? cardinality : 0);
  }
};

struct LinearGaussian {
  std::vector<double> weights;
  double bias = 0.0;
  double noise_std = 0.0;
};

struct LogisticBernoulli {
  std::vector<double> weights;
  double bias = 0.0;
};

// Rows are indexed by the mixed-radix parent configuration, first parent
// most significant; each row is a distribution over the child's levels.
struct TableCpd {
  std::vector<std::vector<double>> rows;
};

class Expression;

// Arithmetic over parent names and the symbol `noise`.
struct CustomExpression {
  std::string source;
  std::shared_ptr<const Expression> parsed;
};

using Mechanism =
    std::variant<LinearGaussian, LogisticBernoulli, TableCpd, CustomExpression>;

CustomExpression ParseExpression(const std::string& source);

// Evaluates a parsed expression; `bindings` maps names to values.
double Evaluate(const CustomExpression& expr,
                const std::map<std::string, double, std::less<>>& bindings);

struct CausalGraph {
  std::vector<Variable> variables;
  std::vector<std::pair<std::string, std::string>> edges;  // (parent, child)
  std::map<std::string, Mechanism> mechanisms;

  // Index of `name`, or -1.
  int IndexOf(const std::string& name) const;
  // Parent names of `child` in edge-declaration order.
  std::vector<std::string> Parents(const std::string& child) const;
  std::vector<std::string> Children(const std::string& parent) const;
};

// Structure-only check (names, edges, acyclicity). Ties resolve to
// declaration order.
std::vector<std::string> TopologicalOrder(const CausalGraph& graph);

// TopologicalOrder plus mechanism checks.
std::vector<std::string> ValidateGraph(const CausalGraph& graph);

// Ancestral sampling; latent variables are dropped from the output.
struct Dataset;
Dataset SampleDataset(const CausalGraph& graph, size_t n, Rng& rng);

// Quotient graph under `grouping` (variable -> group name). Variables absent
// from the map form singleton groups named after themselves.
CausalGraph PartialGraph(const CausalGraph& graph,
                         const std::map<std::string, std::string>& grouping);

// Continuous cells hidden by the mask hold NaN; discrete ones hold -1.
inline constexpr double kDiscreteSentinel = -1.0;

struct Dataset {
  std::vector<Variable> schema;
  size_t rows = 0;
  std::vector<double> values;   // row-major rows x cols
  std::vector<uint8_t> mask;    // 1 = observed

  size_t cols() const { return schema.size(); }
  bool observed(size_t r, size_t c) const { return mask[r * cols() + c] != 0; }
  // Throws kSchemaViolation when the cell is masked.
  double at(size_t r, size_t c) const;
  double raw(size_t r, size_t c) const { return values[r * cols() + c]; }
  std::span<const double> row(size_t r) const {
    return {values.data() + r * cols(), cols()};
  }
  std::span<const uint8_t> row_mask(size_t r) const {
    return {mask.data() + r * cols(), cols()};
  }
  bool FullyObserved() const;

  static Dataset Empty(std::vector<Variable> schema);
  void AppendRow(std::span<const double> row);
  void AppendRow(std::span<const double> row, std::span<const uint8_t> mask);
  Dataset SelectRows(std::span<const size_t> indices) const;
  Dataset WithoutRow(size_t index) const;
  // Throws kSchemaViolation naming the first offending cell.
  void Validate() const;
};

Dataset MaskAtRandom(const Dataset& data, double missing_rate, Rng& rng);

uint64_t SchemaHash(const std::vector<Variable>& schema);

// Reproducible stand-in for a 22-attribute synthetic table: a random DAG
// over mostly binary logistic nodes with a few linear-Gaussian continuous
// nodes.
struct SyntheticScgOptions {
  size_t variables = 22;
  size_t continuous = 2;
  size_t max_parents = 3;
  double weight_scale = 2.5;
};
CausalGraph MakeSyntheticScg(uint64_t seed, const SyntheticScgOptions& opts = {});

// JSON graph file:
// {variables:[{name,kind,cardinality?,noise:{family,params},latent?,members?}],
//  edges:[[p,c]], mechanisms:{child:{form,params}}}
nlohmann::json GraphToJson(const CausalGraph& graph);
CausalGraph GraphFromJson(const nlohmann::json& j);
nlohmann::json SchemaToJson(const std::vector<Variable>& schema);
std::vector<Variable> SchemaFromJson(const nlohmann::json& j);

}  // namespace cds::scg

#endif  // CDS_SCG_H_
