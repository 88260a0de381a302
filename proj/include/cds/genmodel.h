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

// Variational autoencoders whose decoder either models all attributes
// jointly given the latent code (associational) or factorizes along a causal
// graph (causal).

#ifndef CDS_GENMODEL_H_
#define CDS_GENMODEL_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cds/common.h"
#include "cds/dp.h"
#include "cds/nd.h"
#include "cds/scg.h"
#include "json.hpp"

namespace cds::gen {

enum class Mode { kCausal, kAssociational };

std::string ModeName(Mode mode);
Mode ParseMode(const std::string& name);

// p(targets | conditions [, z]); indices are schema columns.
struct Factor {
  std::string name;
  std::vector<size_t> targets;
  std::vector<size_t> conditions;
  std::vector<std::string> condition_groups;
  bool uses_latent = true;
};

// q(z | inputs).
struct EncoderFactor {
  std::vector<size_t> inputs;
  std::vector<std::string> input_groups;
};

struct FactorizationPlan {
  Mode mode = Mode::kAssociational;
  size_t latent_dim = 10;
  std::vector<Factor> decoder;
  std::vector<EncoderFactor> encoder;  // exactly one inference factor

  // e.g. "p(z) p(X1|z) p(X2|X1,z) ; q(z|X1,X2)"
  std::string Describe() const;
  nlohmann::json ToJson() const;
  static FactorizationPlan FromJson(const nlohmann::json& j);
};

// Causal mode requires `graph`; its (possibly coarsened) nodes must cover the
// schema exactly. Latent graph nodes all map onto the single code z; when the
// graph declares none, z conditions every factor.
FactorizationPlan BuildPlan(const std::vector<scg::Variable>& schema,
                            const scg::CausalGraph* graph, size_t latent_dim, Mode mode);

struct ModelConfig {
  size_t hidden = 50;
  nd::Activation activation = nd::Activation::kTanh;
  // Split every factor that conditions on both observed parents and z into
  // two networks whose head parameters add (product of experts).
  bool product_of_experts = false;

  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);
};

struct ElboEstimate {
  double reconstruction = 0.0;
  double kl = 0.0;
  double total = 0.0;
  size_t batch_size = 0;
  std::vector<double> factor_reconstruction;
};

struct ExampleTerms {
  double reconstruction = 0.0;
  double kl = 0.0;
  std::vector<double> factor_reconstruction;
  double elbo() const { return reconstruction - kl; }
};

class GenerativeModel {
 public:
  GenerativeModel() = default;
  static GenerativeModel Create(FactorizationPlan plan, std::vector<scg::Variable> schema,
                                ModelConfig config, Rng& rng);

  const FactorizationPlan& plan() const { return plan_; }
  const std::vector<scg::Variable>& schema() const { return schema_; }
  const ModelConfig& config() const { return config_; }

  size_t NumParams() const;
  nd::GradientTape ZeroTape() const;
  // Encoder blocks first, then each decoder factor's networks in plan order.
  std::vector<nd::Matrix*> MutableParameters();
  std::vector<const nd::Matrix*> Parameters() const;

  // ELBO terms for one record under fixed reparameterization noise. When
  // `loss_grad` is given, the gradient of -ELBO is accumulated into it.
  ExampleTerms EvaluateExample(std::span<const double> row, std::span<const uint8_t> mask,
                               std::span<const double> eps,
                               nd::GradientTape* loss_grad) const;

  // Raw head parameters of decoder factor `f` for latent `z` and a record
  // supplying the conditioning values.
  std::vector<double> FactorOutput(size_t f, std::span<const double> z,
                                   std::span<const double> row,
                                   std::span<const uint8_t> mask) const;

  // Posterior q(z | record) with log-stds clamped as in training.
  nd::GaussianHead Encode(std::span<const double> row, std::span<const uint8_t> mask) const;
  scg::Dataset Sample(size_t n, Rng& rng) const;

  nlohmann::json ToJson() const;
  static GenerativeModel FromJson(const nlohmann::json& j);

 private:
  struct DecoderNets {
    nd::Mlp joint;   // input: [z?, conditions]
    nd::Mlp latent;  // product-of-experts only; input: z
    bool split = false;
  };

  size_t EncodedWidth(std::span<const size_t> cols) const;
  size_t HeadWidth(std::span<const size_t> cols) const;
  void EncodeColumns(std::span<const size_t> cols, std::span<const double> row,
                     std::span<const uint8_t> mask, std::vector<double>& out) const;

  FactorizationPlan plan_;
  std::vector<scg::Variable> schema_;
  ModelConfig config_;
  nd::Mlp encoder_;
  std::vector<DecoderNets> decoders_;
};

// Per-example ELBO over a batch with fresh reparameterization noise.
// Tapes hold gradients of -ELBO averaged over the Monte Carlo samples.
struct ElboResult {
  ElboEstimate estimate;
  std::vector<nd::GradientTape> loss_grads;
};
ElboResult Elbo(const GenerativeModel& model, const scg::Dataset& batch, Rng& rng,
                size_t mc_samples = 1);

struct TrainConfig {
  size_t batch_size = 100;
  size_t epochs = 50;
  double lr = 0.001;
  nd::OptimizerKind optimizer = nd::OptimizerKind::kAdam;

  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

// Fisher-Yates permutation of [0, n) used for each training epoch.
std::vector<size_t> EpochOrder(size_t n, Rng& rng);

struct FitResult {
  std::optional<dp::PrivacyAccount> account;
  std::vector<double> loss_curve;  // mean -ELBO per epoch
  size_t steps = 0;
};

// Shuffled fixed-size minibatches; each step clips per-example gradients,
// adds noise, and hands the noisy mean to the configured optimizer. Only the
// clip norm, noise multiplier and delta of `privacy` are read (delta <= 0
// means 1/n); the sampling rate is batch / n. Without privacy the same path
// runs with C = inf and sigma = 0.
FitResult Fit(GenerativeModel& model, const scg::Dataset& data, const TrainConfig& config,
              const std::optional<dp::PrivacySpec>& privacy, Rng& rng);

// Everything needed to train a model from a dataset and a seed.
struct ModelRecipe {
  Mode mode = Mode::kAssociational;
  std::optional<scg::CausalGraph> graph;
  size_t latent_dim = 10;
  ModelConfig model;
  TrainConfig train;
  std::optional<dp::PrivacySpec> privacy;

  nlohmann::json ToJson() const;
  static ModelRecipe FromJson(const nlohmann::json& j);
};

struct TrainedModel {
  GenerativeModel model;
  FitResult fit;
};
TrainedModel TrainFromRecipe(const ModelRecipe& recipe, const scg::Dataset& data,
                             uint64_t seed);

}  // namespace cds::gen

#endif  // CDS_GENMODEL_H_
