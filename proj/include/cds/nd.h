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

// Small deterministic numerical core: dense matrices, three-layer
// perceptrons with hand-written backward passes, distribution heads.

#ifndef CDS_ND_H_
#define CDS_ND_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cds/common.h"
#include "json.hpp"

namespace cds::nd {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void SetZero();
  bool AllFinite() const;
  bool SameShape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// Gradient blocks aligned with some ordered list of parameter matrices.
struct GradientTape {
  std::vector<Matrix> blocks;

  double SquaredNorm() const;
  double Norm() const;
  void Scale(double factor);
  void AddScaled(const GradientTape& other, double factor);
  void SetZero();
  bool SameShape(const GradientTape& other) const;
  size_t NumParams() const;
};

enum class Activation { kTanh, kRelu, kIdentity };

std::string ActivationName(Activation a);
Activation ParseActivation(const std::string& name);

struct MlpCache {
  uint64_t version = 0;
  std::vector<double> input, pre1, act1, pre2, act2, output;
};

// Three weight layers: input -> hidden -> hidden -> output, activation on the
// two hidden layers, linear output. Weights are stored [out x in].
class Mlp {
 public:
  using Sizes = std::array<size_t, 4>;

  Mlp() = default;
  Mlp(Sizes sizes, Activation activation);
  static Mlp Glorot(Sizes sizes, Activation activation, Rng& rng);

  const Sizes& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  size_t input_size() const { return sizes_[0]; }
  size_t output_size() const { return sizes_[3]; }
  size_t NumParams() const;
  uint64_t version() const { return version_; }

  // Returns a view into cache.output.
  std::span<const double> Forward(std::span<const double> x, MlpCache& cache) const;

  // Gradient of <upstream, output> w.r.t. the parameters, accumulated into
  // grads[0..5] (W1, b1, W2, b2, W3, b3). When `dinput` is non-empty it
  // receives the gradient w.r.t. the input.
  void Backward(const MlpCache& cache, std::span<const double> upstream,
                std::span<Matrix> grads, std::span<double> dinput) const;
  GradientTape Backward(const MlpCache& cache, std::span<const double> upstream) const;

  GradientTape ZeroTape() const;

  std::span<const Matrix> parameters() const { return params_; }
  // Mutable access invalidates outstanding caches.
  std::span<Matrix> MutableParameters();

  nlohmann::json ToJson() const;
  static Mlp FromJson(const nlohmann::json& j);

 private:
  Sizes sizes_{0, 0, 0, 0};
  Activation activation_ = Activation::kTanh;
  std::vector<Matrix> params_;
  uint64_t version_ = 0;
};

// Clamp range for predicted log standard deviations.
inline constexpr double kLogStdMin = -6.0;
inline constexpr double kLogStdMax = 4.0;

struct GaussianHead {
  std::vector<double> mean;
  std::vector<double> log_std;

  // Clamps log_std into [kLogStdMin, kLogStdMax].
  static GaussianHead FromRaw(std::span<const double> mean,
                              std::span<const double> raw_log_std);
};

struct BernoulliHead {
  std::vector<double> logits;
};

// KL(q || N(0, I)).
double KlDiagGaussian(const GaussianHead& q);
// d KL / d mean and d KL / d log_std.
void KlDiagGaussianGrad(const GaussianHead& q, std::span<double> dmean,
                        std::span<double> dlog_std);

struct Reparameterized {
  std::vector<double> z;
  std::vector<double> eps;
};
Reparameterized Reparameterize(const GaussianHead& q, Rng& rng);
std::vector<double> Reparameterize(const GaussianHead& q, std::span<const double> eps);

// Sum of log densities over coordinates whose mask entry is non-zero.
double LogLikelihood(const GaussianHead& head, std::span<const double> x,
                     std::span<const uint8_t> mask);
double LogLikelihood(const BernoulliHead& head, std::span<const double> x,
                     std::span<const uint8_t> mask);
void LogLikelihoodGrad(const GaussianHead& head, std::span<const double> x,
                       std::span<const uint8_t> mask, std::span<double> dmean,
                       std::span<double> dlog_std);
void LogLikelihoodGrad(const BernoulliHead& head, std::span<const double> x,
                       std::span<const uint8_t> mask, std::span<double> dlogits);

double Sigmoid(double x);
// log(sigmoid(x)) without overflow.
double LogSigmoid(double x);

// Applies a descent step to an ordered parameter list.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void Step(std::span<Matrix* const> params, const GradientTape& grad) = 0;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void Step(std::span<Matrix* const> params, const GradientTape& grad) override;

 private:
  double lr_;
};

class Adam : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void Step(std::span<Matrix* const> params, const GradientTape& grad) override;

 private:
  double lr_, beta1_, beta2_, eps_;
  uint64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

enum class OptimizerKind { kSgd, kAdam };
std::unique_ptr<Optimizer> MakeOptimizer(OptimizerKind kind, double lr);
std::string OptimizerName(OptimizerKind kind);
OptimizerKind ParseOptimizer(const std::string& name);

}  // namespace cds::nd

#endif  // CDS_ND_H_
