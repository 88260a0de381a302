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

// Convex sensitivity lab: regularized linear ERM restricted to a target's
// causal parents versus all features, a loss-maximizing adversary that adds
// one record, and the output-perturbation budgets that follow.
//
// Per-point loss is (y - theta.x)^2 (squared) or log(1 + exp(-y theta.x))
// with y in {-1, +1} (logistic); the objective adds lambda * ||theta||^2.

#ifndef CDS_THEORY_H_
#define CDS_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cds/common.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::theory {

enum class Loss { kSquared, kLogistic };
enum class FitMode { kCausal, kAssociational };

std::string LossName(Loss loss);
Loss ParseLoss(const std::string& name);

struct ErmProblem {
  Loss loss = Loss::kSquared;
  double lambda = 0.1;
  size_t target = 0;                  // dataset column
  std::vector<size_t> features;       // dataset columns, in column order
  std::vector<size_t> causal;         // positions into `features`
  std::vector<size_t> associational;  // positions into `features`
  std::vector<double> lo, hi;         // feature box
  // Target generating process: y = bias + weights . x_causal + eta.
  std::vector<double> dgp_weights;    // aligned with `causal`
  double dgp_bias = 0.0;
  double eta_lo = 0.0, eta_hi = 0.0;
  double target_lo = 0.0, target_hi = 0.0;

  double TargetOf(std::span<const double> x, double eta) const;
  // Label used by the loss: the raw value (squared) or its sign (logistic).
  double LabelOf(double target_value) const;
};

// The target must have a linear-gaussian mechanism over observed parents and
// every variable bounded noise; bounds propagate by interval arithmetic.
ErmProblem ProblemFromGraph(const scg::CausalGraph& graph, const std::string& target,
                            Loss loss, double lambda);

enum class LabGraph {
  kSpurious,  // XC -> Y -> XA with a tight XA | Y relation
  kNoise,     // XA independent of everything
};
scg::CausalGraph MakeLabGraph(LabGraph kind);

struct ErmSolution {
  std::vector<double> theta;  // over problem.features; zeros off the mode's set
  FitMode mode = FitMode::kAssociational;
  double training_loss = 0.0;  // regularized objective
  double grad_norm = 0.0;
};

// Throws kNonConvergence when the optimality gradient stays above 1e-8.
ErmSolution SolveErm(const ErmProblem& problem, const scg::Dataset& data, FitMode mode);

// Same, over an explicit design (rows x features) and labels.
ErmSolution SolveErmMatrix(const ErmProblem& problem, const std::vector<double>& x,
                           const std::vector<double>& y, size_t rows, FitMode mode);

double PointLoss(const ErmProblem& problem, std::span<const double> theta,
                 std::span<const double> x, double label);
double RegularizedPointLoss(const ErmProblem& problem, std::span<const double> theta,
                            std::span<const double> x, double label);

struct AdversaryPoint {
  std::vector<double> x;  // over problem.features
  double eta = 0.0;
  double target = 0.0;
  double label = 0.0;
  double loss = 0.0;      // unregularized
};

// Maximizes the per-point loss over the box subject to the target's
// generating process: vertex enumeration (all vertices up to 2^16) and
// projected-gradient refinement from random starts.
AdversaryPoint LmAdversary(const ErmProblem& problem, const ErmSolution& solution, Rng& rng);

struct SensitivityEstimate {
  FitMode mode = FitMode::kAssociational;
  double max_change = 0.0;            // running max of ||theta - theta'||_2
  std::vector<double> running_max;
  AdversaryPoint argmax;
  size_t trials = 0;
  double max_theta_norm = 0.0;        // over theta and every theta'
  double max_bound_ratio = 0.0;       // max over probes of change / strong-convexity bound
};

// Probe 0 is the adversary's point; later probes alternate random box
// vertices and uniform interior points. Neighbours add one record.
SensitivityEstimate MeasureSensitivity(const ErmProblem& problem, const scg::Dataset& data,
                                       FitMode mode, size_t trials, Rng& rng);

// Lipschitz constant of the regularized per-point loss in theta over the box,
// for parameters with norm at most theta_max.
double LipschitzBound(const ErmProblem& problem, double theta_max);

// Grid evaluation of the associational-contribution condition relating the
// two fitted models. At most `max_grid` points per grid.
bool ContributionConditionHolds(const ErmProblem& problem, const ErmSolution& causal,
                      const ErmSolution& associational, size_t max_grid = 2500);

struct TrialConfig {
  size_t n = 500;
  double lambda = 0.1;
  Loss loss = Loss::kSquared;
  size_t probes = 64;
  double laplace_scale = 1.0;  // b; epsilon = sensitivity / b
  std::string target = "Y";
};

struct TrialRecord {
  uint64_t seed = 0;
  double delta_c = 0.0, delta_a = 0.0;        // l2 sensitivities
  double delta1_c = 0.0, delta1_a = 0.0;      // sqrt(dim) * l2
  double epsilon_c = 0.0, epsilon_a = 0.0;
  double rho = 0.0;
  bool contribution_condition_holds = false;
  bool n_condition_holds = false;
  double adversary_loss_c = 0.0, adversary_loss_a = 0.0;
  double bound_ratio_c = 0.0, bound_ratio_a = 0.0;
  double train_loss_c = 0.0, train_loss_a = 0.0;
  std::vector<double> released_c, released_a;  // Laplace-perturbed parameters

  bool Preconditions() const { return contribution_condition_holds && n_condition_holds; }
  bool CausalNotWorse() const { return epsilon_c <= epsilon_a; }
};

TrialRecord OrderingTrial(const scg::CausalGraph& graph, const TrialConfig& cfg, uint64_t seed);

struct TheorySummary {
  std::vector<TrialRecord> trials;
  size_t with_preconditions = 0;
  size_t holds_with_preconditions = 0;  // eps_c <= eps_a among those
  size_t without_preconditions = 0;
  size_t holds_without_preconditions = 0;

  nlohmann::json ToJson() const;
  std::string Csv() const;
};

TheorySummary RunOrderingTrials(const scg::CausalGraph& graph, const TrialConfig& cfg,
                               size_t trials, uint64_t seed, size_t workers = 0);

}  // namespace cds::theory

#endif  // CDS_THEORY_H_
