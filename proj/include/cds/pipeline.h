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

// End-to-end experiment: one manifest in, one run directory out. The run
// trains {causal, associational} x {DP, non-DP} generators, samples from
// each, and evaluates utility, membership inference and privacy ledgers.

#ifndef CDS_PIPELINE_H_
#define CDS_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cds/attack.h"
#include "cds/clf.h"
#include "cds/genmodel.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::pipeline {

inline constexpr int kManifestVersion = 1;
inline constexpr int kReportVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Every label the library and pipeline pass to DeriveSeed.
std::vector<std::string> DefaultSeedLabels();

struct ExperimentManifest {
  std::string run_id = "run";
  uint64_t seed = 1;

  std::string dataset_path;  // empty: sample the synthetic SCG
  size_t synthetic_rows = 1000;
  scg::SyntheticScgOptions synthetic;
  std::string graph_path;    // empty: the generating graph (synthetic data only)

  gen::ModelRecipe model;    // mode, graph and privacy are set per cell
  double target_epsilon = 3.9;
  double delta = 0.0;        // 0 means 1/n
  double causal_clip = 0.55;
  double associational_clip = 0.65;

  bool attack_enabled = true;
  attack::AttackConfig attack;
  std::vector<attack::ExtractorKind> extractors = attack::AllExtractors();
  std::vector<clf::Kind> attack_classifiers = clf::AllKinds();

  bool utility_enabled = true;
  size_t utility_tasks = 20;
  std::vector<clf::Kind> utility_classifiers = clf::AllKinds();

  std::vector<double> sweep_epsilons;
  size_t pairplot_attributes = 0;

  std::string tool_version = kToolVersion;
  std::vector<std::string> seed_labels = DefaultSeedLabels();
  size_t workers = 0;  // 0 means DefaultWorkers(); results do not depend on it

  // Throws kInvalidArgument.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing keys take defaults; unknown versions are rejected.
  static ExperimentManifest FromJson(const nlohmann::json& j);
  std::string Hash() const;  // over ToJson() without `workers`
  std::vector<std::string> PlannedStages() const;
};

struct ModelCell {
  gen::Mode mode = gen::Mode::kCausal;
  bool dp = true;
  std::string Name() const;  // "causal-dp", "associational-nodp", ...
};
// Fixed order: causal-dp, causal-nodp, associational-dp, associational-nodp.
std::vector<ModelCell> GridCells();

struct RunOptions {
  std::string out_root = "runs";
  std::string base_dir;       // resolves relative dataset and graph paths
  bool dry_run = false;
  bool audit_seeds = false;
};

struct RunResult {
  nlohmann::json report;      // the dry-run plan when dry_run is set
  std::string run_dir;        // empty for dry runs
  bool partial = false;
};

// Builds the run in a temporary sibling directory and renames it into
// place. Throws kIoError when the run directory already exists and
// kInvalidArgument for invalid manifests; stage errors are captured in the
// report and set `partial`.
RunResult RunPipeline(const ExperimentManifest& manifest, const RunOptions& options);

struct RenderedReport {
  std::string markdown;
  std::string attack_svg;   // advantage reduction per extractor x classifier
  std::string sweep_svg;    // epsilon vs utility; empty without a sweep
};

// Throws kInvalidArgument for unknown report versions.
RenderedReport RenderReport(const nlohmann::json& report);

// Markdown for one attack section; an empty report yields a "disabled" row.
std::vector<std::string> AttackTable(const attack::AttackReport* report);

}  // namespace cds::pipeline

#endif  // CDS_PIPELINE_H_
