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

#include "cds/nd.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

namespace cds::nd {
namespace {

std::atomic<uint64_t> g_next_version{1};

uint64_t NextVersion() { return g_next_version.fetch_add(1); }

void Activate(Activation a, std::span<const double> pre, std::span<double> out) {
  switch (a) {
    case Activation::kTanh:
      for (size_t i = 0; i < pre.size(); ++i) out[i] = std::tanh(pre[i]);
      break;
    case Activation::kRelu:
      for (size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0 ? pre[i] : 0.0;
      break;
    case Activation::kIdentity:
      std::copy(pre.begin(), pre.end(), out.begin());
      break;
  }
}

// Multiplies `grad` in place by the activation derivative.
void ActivationBackward(Activation a, std::span<const double> pre,
                        std::span<const double> act, std::span<double> grad) {
  switch (a) {
    case Activation::kTanh:
      for (size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - act[i] * act[i];
      break;
    case Activation::kRelu:
      for (size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0)) grad[i] = 0.0;
      }
      break;
    case Activation::kIdentity:
      break;
  }
}

// out = W x + b
void Affine(const Matrix& w, const Matrix& b, std::span<const double> x,
            std::vector<double>& out) {
  const size_t rows = w.rows();
  const size_t cols = w.cols();
  out.resize(rows);
  const double* wd = w.data().data();
  const double* bd = b.data().data();
  for (size_t r = 0; r < rows; ++r) {
    const double* wr = wd + r * cols;
    double acc = bd[r];
    for (size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// gw += g x^T; gb += g; dx = W^T g (when requested)
void AffineBackward(const Matrix& w, std::span<const double> x, std::span<const double> g,
                    Matrix& gw, Matrix& gb, std::span<double> dx) {
  const size_t rows = w.rows();
  const size_t cols = w.cols();
  double* gwd = gw.data().data();
  double* gbd = gb.data().data();
  const double* wd = w.data().data();
  if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double gr = g[r];
    gbd[r] += gr;
    if (gr == 0.0) continue;
    double* gwr = gwd + r * cols;
    for (size_t c = 0; c < cols; ++c) gwr[c] += gr * x[c];
    if (!dx.empty()) {
      const double* wr = wd + r * cols;
      for (size_t c = 0; c < cols; ++c) dx[c] += gr * wr[c];
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void Matrix::SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Matrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double GradientTape::SquaredNorm() const {
  double s = 0.0;
  for (const auto& b : blocks) {
    for (double x : b.data()) s += x * x;
  }
  return s;
}

double GradientTape::Norm() const { return std::sqrt(SquaredNorm()); }

void GradientTape::Scale(double factor) {
  for (auto& b : blocks) {
    for (double& x : b.data()) x *= factor;
  }
}

void GradientTape::AddScaled(const GradientTape& other, double factor) {
  if (!SameShape(other)) throw Error(ErrorCode::kShapeMismatch, "tape shapes differ");
  for (size_t i = 0; i < blocks.size(); ++i) {
    auto dst = blocks[i].data();
    auto src = other.blocks[i].data();
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += factor * src[j];
  }
}

void GradientTape::SetZero() {
  for (auto& b : blocks) b.SetZero();
}

bool GradientTape::SameShape(const GradientTape& other) const {
  if (blocks.size() != other.blocks.size()) return false;
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].SameShape(other.blocks[i])) return false;
  }
  return true;
}

size_t GradientTape::NumParams() const {
  size_t n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

std::string ActivationName(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "tanh";
}

Activation ParseActivation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw Error(ErrorCode::kParseError, "unknown activation '" + name + "'");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(Sizes sizes, Activation activation)
    : sizes_(sizes), activation_(activation), version_(NextVersion()) {
  for (size_t l = 0; l < 3; ++l) {
    params_.emplace_back(sizes_[l + 1], sizes_[l]);
    params_.emplace_back(sizes_[l + 1], 1);
  }
}

Mlp Mlp::Glorot(Sizes sizes, Activation activation, Rng& rng) {
  Mlp net(sizes, activation);
  for (size_t l = 0; l < 3; ++l) {
    const double fan = static_cast<double>(sizes[l] + sizes[l + 1]);
    const double limit = fan > 0 ? std::sqrt(6.0 / fan) : 0.0;
    for (double& w : net.params_[2 * l].data()) w = limit * (2.0 * Uniform01(rng) - 1.0);
  }
  return net;
}

size_t Mlp::NumParams() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

std::span<Matrix> Mlp::MutableParameters() {
  version_ = NextVersion();
  return params_;
}

std::span<const double> Mlp::Forward(std::span<const double> x, MlpCache& cache) const {
  if (x.size() != sizes_[0]) {
    throw Error(ErrorCode::kShapeMismatch, "mlp input has " + std::to_string(x.size()) +
                                               " entries, expected " + std::to_string(sizes_[0]));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "non-finite mlp input");
  }
  cache.version = version_;
  cache.input.assign(x.begin(), x.end());
  Affine(params_[0], params_[1], cache.input, cache.pre1);
  cache.act1.resize(cache.pre1.size());
  Activate(activation_, cache.pre1, cache.act1);
  Affine(params_[2], params_[3], cache.act1, cache.pre2);
  cache.act2.resize(cache.pre2.size());
  Activate(activation_, cache.pre2, cache.act2);
  Affine(params_[4], params_[5], cache.act2, cache.output);
  for (double v : cache.output) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNumericalOverflow, "non-finite mlp output");
  }
  return cache.output;
}

void Mlp::Backward(const MlpCache& cache, std::span<const double> upstream,
                   std::span<Matrix> grads, std::span<double> dinput) const {
  if (cache.version != version_) {
    throw Error(ErrorCode::kStaleCache, "cache does not belong to the current parameters");
  }
  if (upstream.size() != sizes_[3] || grads.size() != 6 ||
      (!dinput.empty() && dinput.size() != sizes_[0])) {
    throw Error(ErrorCode::kShapeMismatch, "mlp backward argument shapes");
  }
  thread_local std::vector<double> g2, g1;
  g2.resize(sizes_[2]);
  g1.resize(sizes_[1]);
  AffineBackward(params_[4], cache.act2, upstream, grads[4], grads[5], g2);
  ActivationBackward(activation_, cache.pre2, cache.act2, g2);
  AffineBackward(params_[2], cache.act1, g2, grads[2], grads[3], g1);
  ActivationBackward(activation_, cache.pre1, cache.act1, g1);
  AffineBackward(params_[0], cache.input, g1, grads[0], grads[1], dinput);
}

GradientTape Mlp::Backward(const MlpCache& cache, std::span<const double> upstream) const {
  GradientTape tape = ZeroTape();
  Backward(cache, upstream, tape.blocks, {});
  return tape;
}

GradientTape Mlp::ZeroTape() const {
  GradientTape tape;
  for (const auto& p : params_) tape.blocks.emplace_back(p.rows(), p.cols());
  return tape;
}

nlohmann::json Mlp::ToJson() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["sizes"] = sizes_;
  j["activation"] = ActivationName(activation_);
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (size_t l = 0; l < 3; ++l) {
    auto w = params_[2 * l].data();
    auto b = params_[2 * l + 1].data();
    j["weights"].push_back(std::vector<double>(w.begin(), w.end()));
    j["biases"].push_back(std::vector<double>(b.begin(), b.end()));
  }
  return j;
}

Mlp Mlp::FromJson(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1) {
    throw Error(ErrorCode::kParseError, "unsupported mlp checkpoint version");
  }
  Mlp net(j.at("sizes").get<Sizes>(), ParseActivation(j.at("activation").get<std::string>()));
  for (size_t l = 0; l < 3; ++l) {
    const auto w = j.at("weights").at(l).get<std::vector<double>>();
    const auto b = j.at("biases").at(l).get<std::vector<double>>();
    if (w.size() != net.params_[2 * l].size() || b.size() != net.params_[2 * l + 1].size()) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint layer " + std::to_string(l));
    }
    std::copy(w.begin(), w.end(), net.params_[2 * l].data().begin());
    std::copy(b.begin(), b.end(), net.params_[2 * l + 1].data().begin());
  }
  return net;
}

// ---------------------------------------------------------------------------
// Heads

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double LogSigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

GaussianHead GaussianHead::FromRaw(std::span<const double> mean,
                                   std::span<const double> raw_log_std) {
  if (mean.size() != raw_log_std.size()) {
    throw Error(ErrorCode::kShapeMismatch, "gaussian head mean/log_std sizes differ");
  }
  GaussianHead h;
  h.mean.assign(mean.begin(), mean.end());
  h.log_std.resize(raw_log_std.size());
  for (size_t i = 0; i < raw_log_std.size(); ++i) {
    h.log_std[i] = std::clamp(raw_log_std[i], kLogStdMin, kLogStdMax);
  }
  return h;
}

double KlDiagGaussian(const GaussianHead& q) {
  double kl = 0.0;
  for (size_t j = 0; j < q.mean.size(); ++j) {
    const double var = std::exp(2.0 * q.log_std[j]);
    kl += 0.5 * (var + q.mean[j] * q.mean[j] - 1.0 - 2.0 * q.log_std[j]);
  }
  return std::max(kl, 0.0);
}

void KlDiagGaussianGrad(const GaussianHead& q, std::span<double> dmean,
                        std::span<double> dlog_std) {
  for (size_t j = 0; j < q.mean.size(); ++j) {
    dmean[j] = q.mean[j];
    dlog_std[j] = std::exp(2.0 * q.log_std[j]) - 1.0;
  }
}

Reparameterized Reparameterize(const GaussianHead& q, Rng& rng) {
  Reparameterized out;
  out.eps.resize(q.mean.size());
  for (double& e : out.eps) e = StandardNormal(rng);
  out.z = Reparameterize(q, out.eps);
  return out;
}

std::vector<double> Reparameterize(const GaussianHead& q, std::span<const double> eps) {
  std::vector<double> z(q.mean.size());
  for (size_t j = 0; j < z.size(); ++j) z[j] = q.mean[j] + std::exp(q.log_std[j]) * eps[j];
  return z;
}

double LogLikelihood(const GaussianHead& head, std::span<const double> x,
                     std::span<const uint8_t> mask) {
  if (x.size() != head.mean.size() || mask.size() != x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "gaussian likelihood shapes");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;
  double ll = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) continue;
    const double s = head.log_std[i];
    const double d = (x[i] - head.mean[i]) * std::exp(-s);
    ll += -kHalfLog2Pi - s - 0.5 * d * d;
  }
  return ll;
}

double LogLikelihood(const BernoulliHead& head, std::span<const double> x,
                     std::span<const uint8_t> mask) {
  if (x.size() != head.logits.size() || mask.size() != x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "bernoulli likelihood shapes");
  }
  double ll = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) continue;
    const double l = head.logits[i];
    ll += x[i] * LogSigmoid(l) + (1.0 - x[i]) * LogSigmoid(-l);
  }
  return ll;
}

void LogLikelihoodGrad(const GaussianHead& head, std::span<const double> x,
                       std::span<const uint8_t> mask, std::span<double> dmean,
                       std::span<double> dlog_std) {
  for (size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) {
      dmean[i] = 0.0;
      dlog_std[i] = 0.0;
      continue;
    }
    const double inv_var = std::exp(-2.0 * head.log_std[i]);
    const double r = x[i] - head.mean[i];
    dmean[i] = r * inv_var;
    dlog_std[i] = r * r * inv_var - 1.0;
  }
}

void LogLikelihoodGrad(const BernoulliHead& head, std::span<const double> x,
                       std::span<const uint8_t> mask, std::span<double> dlogits) {
  for (size_t i = 0; i < x.size(); ++i) {
    dlogits[i] = mask[i] ? x[i] - Sigmoid(head.logits[i]) : 0.0;
  }
}

// ---------------------------------------------------------------------------
// Optimizers

void Sgd::Step(std::span<Matrix* const> params, const GradientTape& grad) {
  if (params.size() != grad.blocks.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer parameter/gradient count");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grad.blocks[i].data();
    for (size_t j = 0; j < p.size(); ++j) p[j] -= lr_ * g[j];
  }
}

void Adam::Step(std::span<Matrix* const> params, const GradientTape& grad) {
  if (params.size() != grad.blocks.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer parameter/gradient count");
  }
  if (m_.empty()) {
    for (const auto& b : grad.blocks) {
      m_.emplace_back(b.rows(), b.cols());
      v_.emplace_back(b.rows(), b.cols());
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grad.blocks[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::unique_ptr<Optimizer> MakeOptimizer(OptimizerKind kind, double lr) {
  if (kind == OptimizerKind::kAdam) return std::make_unique<Adam>(lr);
  return std::make_unique<Sgd>(lr);
}

std::string OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind ParseOptimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw Error(ErrorCode::kParseError, "unknown optimizer '" + name + "'");
}

}  // namespace cds::nd
