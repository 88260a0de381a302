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

#include "cds/genmodel.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace cds::gen {
namespace {

using json = nlohmann::json;

constexpr double kHalfLog2Pi = 0.91893853320467274178032973640562;

[[noreturn]] void Fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

bool Clamped(double raw) { return raw < nd::kLogStdMin || raw > nd::kLogStdMax; }
double ClampLogStd(double raw) { return std::clamp(raw, nd::kLogStdMin, nd::kLogStdMax); }

std::string JoinNames(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ",";
    out += n;
  }
  return out;
}

// Names of groups (graph nodes) reachable from any latent node.
std::set<std::string> LatentDescendants(const scg::CausalGraph& graph) {
  std::set<std::string> out;
  std::vector<std::string> stack;
  for (const auto& v : graph.variables) {
    if (v.latent) stack.push_back(v.name);
  }
  while (!stack.empty()) {
    const std::string cur = stack.back();
    stack.pop_back();
    for (const auto& c : graph.Children(cur)) {
      if (out.insert(c).second) stack.push_back(c);
    }
  }
  return out;
}

json PrivacyToJson(const dp::PrivacySpec& p) {
  json j;
  j["clip_norm"] = std::isinf(p.clip_norm) ? json(nullptr) : json(p.clip_norm);
  j["noise_multiplier"] = p.noise_multiplier;
  j["delta"] = p.delta;
  return j;
}

dp::PrivacySpec PrivacyFromJson(const json& j) {
  dp::PrivacySpec p;
  p.clip_norm = j.at("clip_norm").is_null() ? dp::kUnboundedClip : j.at("clip_norm").get<double>();
  p.noise_multiplier = j.at("noise_multiplier").get<double>();
  p.delta = j.at("delta").get<double>();
  return p;
}

}  // namespace

std::string ModeName(Mode mode) {
  return mode == Mode::kCausal ? "causal" : "associational";
}

Mode ParseMode(const std::string& name) {
  if (name == "causal") return Mode::kCausal;
  if (name == "associational") return Mode::kAssociational;
  Fail(ErrorCode::kInvalidArgument, "unknown mode '" + name + "'");
}

// ---------------------------------------------------------------------------
// Plans

std::string FactorizationPlan::Describe() const {
  std::string out = "p(z)";
  for (const Factor& f : decoder) {
    std::vector<std::string> cond = f.condition_groups;
    if (f.uses_latent) cond.push_back("z");
    out += " p(" + f.name + (cond.empty() ? "" : "|" + JoinNames(cond)) + ")";
  }
  for (const EncoderFactor& e : encoder) out += " ; q(z|" + JoinNames(e.input_groups) + ")";
  return out;
}

json FactorizationPlan::ToJson() const {
  json j;
  j["mode"] = ModeName(mode);
  j["latent_dim"] = latent_dim;
  j["decoder"] = json::array();
  for (const Factor& f : decoder) {
    j["decoder"].push_back({{"name", f.name},
                            {"targets", f.targets},
                            {"conditions", f.conditions},
                            {"condition_groups", f.condition_groups},
                            {"uses_latent", f.uses_latent}});
  }
  j["encoder"] = json::array();
  for (const EncoderFactor& e : encoder) {
    j["encoder"].push_back({{"inputs", e.inputs}, {"input_groups", e.input_groups}});
  }
  return j;
}

FactorizationPlan FactorizationPlan::FromJson(const json& j) {
  FactorizationPlan p;
  p.mode = ParseMode(j.at("mode").get<std::string>());
  p.latent_dim = j.at("latent_dim").get<size_t>();
  for (const auto& f : j.at("decoder")) {
    Factor x;
    x.name = f.at("name").get<std::string>();
    x.targets = f.at("targets").get<std::vector<size_t>>();
    x.conditions = f.at("conditions").get<std::vector<size_t>>();
    x.condition_groups = f.at("condition_groups").get<std::vector<std::string>>();
    x.uses_latent = f.at("uses_latent").get<bool>();
    p.decoder.push_back(std::move(x));
  }
  for (const auto& e : j.at("encoder")) {
    EncoderFactor x;
    x.inputs = e.at("inputs").get<std::vector<size_t>>();
    x.input_groups = e.at("input_groups").get<std::vector<std::string>>();
    p.encoder.push_back(std::move(x));
  }
  return p;
}

FactorizationPlan BuildPlan(const std::vector<scg::Variable>& schema,
                            const scg::CausalGraph* graph, size_t latent_dim, Mode mode) {
  if (latent_dim == 0) Fail(ErrorCode::kInvalidArgument, "latent_dim must be >= 1");
  if (schema.empty()) Fail(ErrorCode::kInvalidArgument, "empty schema");
  FactorizationPlan plan;
  plan.mode = mode;
  plan.latent_dim = latent_dim;

  std::vector<size_t> all(schema.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;

  if (mode == Mode::kAssociational) {
    Factor f;
    f.name = "x";
    f.targets = all;
    plan.decoder.push_back(f);
    plan.encoder.push_back({all, {"x"}});
    return plan;
  }

  if (graph == nullptr) Fail(ErrorCode::kMissingGraph, "causal mode requires a graph");
  const std::vector<std::string> order = scg::TopologicalOrder(*graph);

  std::map<std::string, size_t> column;
  for (size_t i = 0; i < schema.size(); ++i) column[schema[i].name] = i;

  // Group name -> schema columns.
  std::map<std::string, std::vector<size_t>> group_cols;
  std::vector<int> covered(schema.size(), 0);
  bool any_latent = false;
  for (const auto& v : graph->variables) {
    if (v.latent) {
      any_latent = true;
      continue;
    }
    const std::vector<std::string> members =
        v.members.empty() ? std::vector<std::string>{v.name} : v.members;
    for (const auto& m : members) {
      auto it = column.find(m);
      if (it == column.end()) {
        Fail(ErrorCode::kSchemaMismatch, "graph variable '" + m + "' is not in the schema");
      }
      group_cols[v.name].push_back(it->second);
      ++covered[it->second];
    }
  }
  for (size_t i = 0; i < schema.size(); ++i) {
    if (covered[i] != 1) {
      Fail(ErrorCode::kSchemaMismatch,
           "schema column '" + schema[i].name + "' must belong to exactly one graph node");
    }
  }

  for (const auto& name : order) {
    const scg::Variable& v = graph->variables[graph->IndexOf(name)];
    if (v.latent) continue;
    Factor f;
    f.name = name;
    f.targets = group_cols[name];
    f.uses_latent = !any_latent;
    for (const auto& p : graph->Parents(name)) {
      const scg::Variable& pv = graph->variables[graph->IndexOf(p)];
      if (pv.latent) {
        f.uses_latent = true;
        continue;
      }
      f.condition_groups.push_back(p);
      const auto& cols = group_cols[p];
      f.conditions.insert(f.conditions.end(), cols.begin(), cols.end());
    }
    plan.decoder.push_back(std::move(f));
  }

  EncoderFactor enc;
  const std::set<std::string> desc = any_latent ? LatentDescendants(*graph) : std::set<std::string>{};
  for (const auto& name : order) {
    const scg::Variable& v = graph->variables[graph->IndexOf(name)];
    if (v.latent) continue;
    if (!desc.empty() && !desc.count(name)) continue;
    enc.input_groups.push_back(name);
    const auto& cols = group_cols[name];
    enc.inputs.insert(enc.inputs.end(), cols.begin(), cols.end());
  }
  plan.encoder.push_back(std::move(enc));
  return plan;
}

// ---------------------------------------------------------------------------
// Configs

json ModelConfig::ToJson() const {
  return {{"hidden", hidden},
          {"activation", nd::ActivationName(activation)},
          {"product_of_experts", product_of_experts}};
}

ModelConfig ModelConfig::FromJson(const json& j) {
  ModelConfig c;
  c.hidden = j.at("hidden").get<size_t>();
  c.activation = nd::ParseActivation(j.at("activation").get<std::string>());
  c.product_of_experts = j.value("product_of_experts", false);
  return c;
}

json TrainConfig::ToJson() const {
  return {{"batch_size", batch_size},
          {"epochs", epochs},
          {"lr", lr},
          {"optimizer", nd::OptimizerName(optimizer)}};
}

TrainConfig TrainConfig::FromJson(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<size_t>();
  c.epochs = j.at("epochs").get<size_t>();
  c.lr = j.at("lr").get<double>();
  c.optimizer = nd::ParseOptimizer(j.at("optimizer").get<std::string>());
  return c;
}

json ModelRecipe::ToJson() const {
  json j;
  j["mode"] = ModeName(mode);
  j["graph"] = graph ? scg::GraphToJson(*graph) : json(nullptr);
  j["latent_dim"] = latent_dim;
  j["model"] = model.ToJson();
  j["train"] = train.ToJson();
  j["privacy"] = privacy ? PrivacyToJson(*privacy) : json(nullptr);
  return j;
}

ModelRecipe ModelRecipe::FromJson(const json& j) {
  ModelRecipe r;
  r.mode = ParseMode(j.at("mode").get<std::string>());
  if (!j.at("graph").is_null()) r.graph = scg::GraphFromJson(j.at("graph"));
  r.latent_dim = j.at("latent_dim").get<size_t>();
  r.model = ModelConfig::FromJson(j.at("model"));
  r.train = TrainConfig::FromJson(j.at("train"));
  if (!j.at("privacy").is_null()) r.privacy = PrivacyFromJson(j.at("privacy"));
  return r;
}

// ---------------------------------------------------------------------------
// Model

size_t GenerativeModel::EncodedWidth(std::span<const size_t> cols) const {
  size_t w = 0;
  for (size_t c : cols) {
    w += schema_[c].kind == scg::Kind::kCategorical ? schema_[c].cardinality : 1;
  }
  return w;
}

size_t GenerativeModel::HeadWidth(std::span<const size_t> cols) const {
  size_t w = 0;
  for (size_t c : cols) {
    switch (schema_[c].kind) {
      case scg::Kind::kBinary: w += 1; break;
      case scg::Kind::kCategorical: w += schema_[c].cardinality; break;
      case scg::Kind::kContinuous: w += 2; break;
    }
  }
  return w;
}

void GenerativeModel::EncodeColumns(std::span<const size_t> cols, std::span<const double> row,
                                    std::span<const uint8_t> mask,
                                    std::vector<double>& out) const {
  for (size_t c : cols) {
    const bool obs = mask[c] != 0;
    const double x = row[c];
    if (schema_[c].kind == scg::Kind::kCategorical) {
      for (int k = 0; k < schema_[c].cardinality; ++k) {
        out.push_back(obs && static_cast<int>(x) == k ? 1.0 : 0.0);
      }
    } else {
      out.push_back(obs ? x : 0.0);
    }
  }
}

GenerativeModel GenerativeModel::Create(FactorizationPlan plan,
                                        std::vector<scg::Variable> schema,
                                        ModelConfig config, Rng& rng) {
  if (plan.encoder.size() != 1) Fail(ErrorCode::kInvalidArgument, "plan needs one encoder factor");
  if (config.hidden == 0) Fail(ErrorCode::kInvalidArgument, "hidden width must be >= 1");
  GenerativeModel m;
  m.plan_ = std::move(plan);
  m.schema_ = std::move(schema);
  m.config_ = config;
  for (const auto& v : m.schema_) {
    if (v.kind == scg::Kind::kCategorical && v.cardinality < 2) {
      Fail(ErrorCode::kInvalidArgument, "categorical '" + v.name + "' needs cardinality >= 2");
    }
  }
  const size_t L = m.plan_.latent_dim;
  const size_t h = config.hidden;
  const auto& enc = m.plan_.encoder[0];
  m.encoder_ = nd::Mlp::Glorot({m.EncodedWidth(enc.inputs) + enc.inputs.size(), h, h, 2 * L},
                               config.activation, rng);
  for (const Factor& f : m.plan_.decoder) {
    DecoderNets nets;
    const size_t cond_w = m.EncodedWidth(f.conditions);
    const size_t out_w = m.HeadWidth(f.targets);
    nets.split = config.product_of_experts && f.uses_latent && !f.conditions.empty();
    if (nets.split) {
      nets.joint = nd::Mlp::Glorot({cond_w, h, h, out_w}, config.activation, rng);
      nets.latent = nd::Mlp::Glorot({L, h, h, out_w}, config.activation, rng);
    } else {
      nets.joint = nd::Mlp::Glorot({(f.uses_latent ? L : 0) + cond_w, h, h, out_w},
                                   config.activation, rng);
    }
    m.decoders_.push_back(std::move(nets));
  }
  return m;
}

size_t GenerativeModel::NumParams() const {
  size_t n = encoder_.NumParams();
  for (const auto& d : decoders_) n += d.joint.NumParams() + (d.split ? d.latent.NumParams() : 0);
  return n;
}

nd::GradientTape GenerativeModel::ZeroTape() const {
  nd::GradientTape t;
  auto add = [&](const nd::Mlp& net) {
    for (const auto& p : net.parameters()) t.blocks.emplace_back(p.rows(), p.cols());
  };
  add(encoder_);
  for (const auto& d : decoders_) {
    add(d.joint);
    if (d.split) add(d.latent);
  }
  return t;
}

std::vector<nd::Matrix*> GenerativeModel::MutableParameters() {
  std::vector<nd::Matrix*> out;
  auto add = [&](nd::Mlp& net) {
    for (auto& p : net.MutableParameters()) out.push_back(&p);
  };
  add(encoder_);
  for (auto& d : decoders_) {
    add(d.joint);
    if (d.split) add(d.latent);
  }
  return out;
}

std::vector<const nd::Matrix*> GenerativeModel::Parameters() const {
  std::vector<const nd::Matrix*> out;
  auto add = [&](const nd::Mlp& net) {
    for (const auto& p : net.parameters()) out.push_back(&p);
  };
  add(encoder_);
  for (const auto& d : decoders_) {
    add(d.joint);
    if (d.split) add(d.latent);
  }
  return out;
}

namespace {

// Log-likelihood of the target columns under raw head outputs `out`;
// d loglik / d out is written into `dout` when non-empty.
double FactorLogLik(const std::vector<scg::Variable>& schema, std::span<const size_t> targets,
                    std::span<const double> row, std::span<const uint8_t> mask,
                    std::span<const double> out, std::span<double> dout) {
  double ll = 0.0;
  size_t p = 0;
  const bool grad = !dout.empty();
  auto bernoulli = [&](double x, double l, size_t pos) {
    ll += x * nd::LogSigmoid(l) + (1.0 - x) * nd::LogSigmoid(-l);
    if (grad) dout[pos] = x - nd::Sigmoid(l);
  };
  for (size_t c : targets) {
    const scg::Variable& v = schema[c];
    const bool obs = mask[c] != 0;
    switch (v.kind) {
      case scg::Kind::kBinary:
        if (obs) bernoulli(row[c], out[p], p);
        p += 1;
        break;
      case scg::Kind::kCategorical:
        if (obs) {
          const int level = static_cast<int>(row[c]);
          for (int k = 0; k < v.cardinality; ++k) {
            bernoulli(level == k ? 1.0 : 0.0, out[p + k], p + k);
          }
        }
        p += v.cardinality;
        break;
      case scg::Kind::kContinuous:
        if (obs) {
          const double raw = out[p + 1];
          const double s = ClampLogStd(raw);
          const double inv_var = std::exp(-2.0 * s);
          const double r = row[c] - out[p];
          ll += -kHalfLog2Pi - s - 0.5 * r * r * inv_var;
          if (grad) {
            dout[p] = r * inv_var;
            dout[p + 1] = Clamped(raw) ? 0.0 : r * r * inv_var - 1.0;
          }
        }
        p += 2;
        break;
    }
  }
  return ll;
}

}  // namespace

ExampleTerms GenerativeModel::EvaluateExample(std::span<const double> row,
                                              std::span<const uint8_t> mask,
                                              std::span<const double> eps,
                                              nd::GradientTape* loss_grad) const {
  const size_t L = plan_.latent_dim;
  if (row.size() != schema_.size() || mask.size() != schema_.size()) {
    Fail(ErrorCode::kSchemaMismatch, "record width does not match the model schema");
  }
  if (eps.size() != L) Fail(ErrorCode::kShapeMismatch, "eps must have latent_dim entries");

  // Encoder.
  const auto& enc = plan_.encoder[0];
  std::vector<double> enc_in;
  enc_in.reserve(encoder_.input_size());
  EncodeColumns(enc.inputs, row, mask, enc_in);
  for (size_t c : enc.inputs) enc_in.push_back(mask[c] ? 1.0 : 0.0);
  nd::MlpCache enc_cache;
  const auto enc_out = encoder_.Forward(enc_in, enc_cache);
  std::vector<double> mean(enc_out.begin(), enc_out.begin() + L);
  std::vector<double> raw_ls(enc_out.begin() + L, enc_out.end());
  std::vector<double> std_dev(L), z(L);
  for (size_t i = 0; i < L; ++i) {
    std_dev[i] = std::exp(ClampLogStd(raw_ls[i]));
    z[i] = mean[i] + std_dev[i] * eps[i];
  }

  ExampleTerms terms;
  terms.factor_reconstruction.resize(plan_.decoder.size());
  std::vector<double> dz(L, 0.0);
  size_t block = 6;  // encoder occupies blocks 0..5

  for (size_t f = 0; f < plan_.decoder.size(); ++f) {
    const Factor& fac = plan_.decoder[f];
    const DecoderNets& nets = decoders_[f];
    std::vector<double> in;
    if (fac.uses_latent && !nets.split) in.assign(z.begin(), z.end());
    EncodeColumns(fac.conditions, row, mask, in);
    nd::MlpCache cache, lcache;
    const auto out_j = nets.joint.Forward(in, cache);
    std::vector<double> out(out_j.begin(), out_j.end());
    if (nets.split) {
      const auto out_l = nets.latent.Forward(z, lcache);
      for (size_t i = 0; i < out.size(); ++i) out[i] += out_l[i];
    }
    std::vector<double> dout;
    if (loss_grad) dout.assign(out.size(), 0.0);
    const double ll = FactorLogLik(schema_, fac.targets, row, mask, out, dout);
    terms.factor_reconstruction[f] = ll;
    terms.reconstruction += ll;

    if (loss_grad) {
      for (double& d : dout) d = -d;  // loss = -ELBO
      std::vector<double> din(nets.joint.input_size(), 0.0);
      nets.joint.Backward(cache, dout, std::span<nd::Matrix>(loss_grad->blocks).subspan(block, 6),
                          din);
      block += 6;
      if (nets.split) {
        std::vector<double> dzl(L, 0.0);
        nets.latent.Backward(lcache, dout,
                             std::span<nd::Matrix>(loss_grad->blocks).subspan(block, 6), dzl);
        block += 6;
        for (size_t i = 0; i < L; ++i) dz[i] += dzl[i];
      } else if (fac.uses_latent) {
        for (size_t i = 0; i < L; ++i) dz[i] += din[i];
      }
    }
  }

  double kl = 0.0;
  for (size_t i = 0; i < L; ++i) {
    const double s = ClampLogStd(raw_ls[i]);
    kl += 0.5 * (mean[i] * mean[i] + std_dev[i] * std_dev[i] - 1.0 - 2.0 * s);
  }
  terms.kl = kl;

  if (loss_grad) {
    std::vector<double> upstream(2 * L);
    for (size_t i = 0; i < L; ++i) {
      upstream[i] = dz[i] + mean[i];
      const double dls = dz[i] * std_dev[i] * eps[i] + std_dev[i] * std_dev[i] - 1.0;
      upstream[L + i] = Clamped(raw_ls[i]) ? 0.0 : dls;
    }
    encoder_.Backward(enc_cache, upstream, std::span<nd::Matrix>(loss_grad->blocks).subspan(0, 6),
                      {});
  }
  return terms;
}

nd::GaussianHead GenerativeModel::Encode(std::span<const double> row,
                                         std::span<const uint8_t> mask) const {
  if (row.size() != schema_.size() || mask.size() != schema_.size()) {
    Fail(ErrorCode::kSchemaMismatch, "record width does not match the model schema");
  }
  const size_t L = plan_.latent_dim;
  const auto& enc = plan_.encoder[0];
  std::vector<double> in;
  EncodeColumns(enc.inputs, row, mask, in);
  for (size_t c : enc.inputs) in.push_back(mask[c] ? 1.0 : 0.0);
  nd::MlpCache cache;
  const auto out = encoder_.Forward(in, cache);
  nd::GaussianHead q;
  q.mean.assign(out.begin(), out.begin() + L);
  q.log_std.resize(L);
  for (size_t i = 0; i < L; ++i) q.log_std[i] = ClampLogStd(out[L + i]);
  return q;
}

std::vector<double> GenerativeModel::FactorOutput(size_t f, std::span<const double> z,
                                                  std::span<const double> row,
                                                  std::span<const uint8_t> mask) const {
  if (f >= plan_.decoder.size()) Fail(ErrorCode::kInvalidArgument, "factor index out of range");
  const Factor& fac = plan_.decoder[f];
  const DecoderNets& nets = decoders_[f];
  std::vector<double> in;
  if (fac.uses_latent && !nets.split) in.assign(z.begin(), z.end());
  EncodeColumns(fac.conditions, row, mask, in);
  nd::MlpCache cache;
  const auto o = nets.joint.Forward(in, cache);
  std::vector<double> out(o.begin(), o.end());
  if (nets.split) {
    nd::MlpCache lcache;
    const auto l = nets.latent.Forward(z, lcache);
    for (size_t i = 0; i < out.size(); ++i) out[i] += l[i];
  }
  return out;
}

scg::Dataset GenerativeModel::Sample(size_t n, Rng& rng) const {
  scg::Dataset out = scg::Dataset::Empty(schema_);
  out.values.reserve(n * schema_.size());
  out.mask.reserve(n * schema_.size());
  const size_t L = plan_.latent_dim;
  const std::vector<uint8_t> full(schema_.size(), 1);
  std::vector<double> z(L), row(schema_.size());
  for (size_t r = 0; r < n; ++r) {
    for (double& x : z) x = StandardNormal(rng);
    std::fill(row.begin(), row.end(), 0.0);
    for (size_t f = 0; f < plan_.decoder.size(); ++f) {
      const std::vector<double> o = FactorOutput(f, z, row, full);
      size_t p = 0;
      for (size_t c : plan_.decoder[f].targets) {
        const scg::Variable& v = schema_[c];
        switch (v.kind) {
          case scg::Kind::kBinary:
            row[c] = Uniform01(rng) < nd::Sigmoid(o[p]) ? 1.0 : 0.0;
            p += 1;
            break;
          case scg::Kind::kCategorical: {
            const size_t k = v.cardinality;
            double mx = o[p];
            for (size_t i = 1; i < k; ++i) mx = std::max(mx, o[p + i]);
            std::vector<double> w(k);
            double total = 0.0;
            for (size_t i = 0; i < k; ++i) total += (w[i] = std::exp(o[p + i] - mx));
            double u = Uniform01(rng) * total;
            size_t level = k - 1;
            for (size_t i = 0; i < k; ++i) {
              if (u < w[i]) {
                level = i;
                break;
              }
              u -= w[i];
            }
            row[c] = static_cast<double>(level);
            p += k;
            break;
          }
          case scg::Kind::kContinuous:
            row[c] = o[p] + std::exp(ClampLogStd(o[p + 1])) * StandardNormal(rng);
            p += 2;
            break;
        }
      }
    }
    out.AppendRow(row);
  }
  return out;
}

json GenerativeModel::ToJson() const {
  json j;
  j["format_version"] = 1;
  j["plan"] = plan_.ToJson();
  j["schema"] = scg::SchemaToJson(schema_);
  j["config"] = config_.ToJson();
  j["encoder"] = encoder_.ToJson();
  j["decoders"] = json::array();
  for (const auto& d : decoders_) {
    json dj;
    dj["joint"] = d.joint.ToJson();
    dj["latent"] = d.split ? d.latent.ToJson() : json(nullptr);
    j["decoders"].push_back(dj);
  }
  return j;
}

GenerativeModel GenerativeModel::FromJson(const json& j) {
  if (j.value("format_version", 0) != 1) {
    Fail(ErrorCode::kSchemaMismatch, "unsupported model format_version");
  }
  GenerativeModel m;
  m.plan_ = FactorizationPlan::FromJson(j.at("plan"));
  m.schema_ = scg::SchemaFromJson(j.at("schema"));
  m.config_ = ModelConfig::FromJson(j.at("config"));
  m.encoder_ = nd::Mlp::FromJson(j.at("encoder"));
  const auto& ds = j.at("decoders");
  if (ds.size() != m.plan_.decoder.size()) {
    Fail(ErrorCode::kSchemaMismatch, "decoder count does not match the plan");
  }
  for (const auto& dj : ds) {
    DecoderNets d;
    d.joint = nd::Mlp::FromJson(dj.at("joint"));
    if (!dj.at("latent").is_null()) {
      d.latent = nd::Mlp::FromJson(dj.at("latent"));
      d.split = true;
    }
    m.decoders_.push_back(std::move(d));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

ElboResult Elbo(const GenerativeModel& model, const scg::Dataset& batch, Rng& rng,
                size_t mc_samples) {
  if (mc_samples == 0) Fail(ErrorCode::kInvalidArgument, "mc_samples must be >= 1");
  if (scg::SchemaHash(batch.schema) != scg::SchemaHash(model.schema())) {
    Fail(ErrorCode::kSchemaMismatch, "batch schema differs from the model schema");
  }
  const size_t L = model.plan().latent_dim;
  const size_t F = model.plan().decoder.size();
  ElboResult res;
  res.estimate.batch_size = batch.rows;
  res.estimate.factor_reconstruction.assign(F, 0.0);
  std::vector<double> eps(L);
  const double inv_mc = 1.0 / static_cast<double>(mc_samples);
  for (size_t r = 0; r < batch.rows; ++r) {
    nd::GradientTape tape = model.ZeroTape();
    for (size_t s = 0; s < mc_samples; ++s) {
      for (double& e : eps) e = StandardNormal(rng);
      const ExampleTerms t = model.EvaluateExample(batch.row(r), batch.row_mask(r), eps, &tape);
      res.estimate.reconstruction += t.reconstruction * inv_mc;
      res.estimate.kl += t.kl * inv_mc;
      for (size_t f = 0; f < F; ++f) {
        res.estimate.factor_reconstruction[f] += t.factor_reconstruction[f] * inv_mc;
      }
    }
    if (mc_samples > 1) tape.Scale(inv_mc);
    res.loss_grads.push_back(std::move(tape));
  }
  if (batch.rows > 0) {
    const double inv_n = 1.0 / static_cast<double>(batch.rows);
    res.estimate.reconstruction *= inv_n;
    res.estimate.kl *= inv_n;
    for (double& x : res.estimate.factor_reconstruction) x *= inv_n;
  }
  res.estimate.total = res.estimate.reconstruction - res.estimate.kl;
  return res;
}

std::vector<size_t> EpochOrder(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

FitResult Fit(GenerativeModel& model, const scg::Dataset& data, const TrainConfig& config,
              const std::optional<dp::PrivacySpec>& privacy, Rng& rng) {
  if (config.batch_size == 0) Fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(config.lr > 0)) Fail(ErrorCode::kInvalidArgument, "lr must be > 0");
  if (scg::SchemaHash(data.schema) != scg::SchemaHash(model.schema())) {
    Fail(ErrorCode::kSchemaMismatch, "dataset schema differs from the model schema");
  }
  FitResult res;
  const size_t n = data.rows;
  const size_t batch = std::min(config.batch_size, std::max<size_t>(n, 1));

  dp::PrivacySpec spec;
  spec.clip_norm = dp::kUnboundedClip;
  spec.noise_multiplier = 0.0;
  spec.delta = n > 0 ? 1.0 / static_cast<double>(n) : 0.5;
  spec.sampling_rate = n > 0 ? static_cast<double>(batch) / static_cast<double>(n) : 1.0;
  if (privacy) {
    spec.clip_norm = privacy->clip_norm;
    spec.noise_multiplier = privacy->noise_multiplier;
    if (privacy->delta > 0) spec.delta = privacy->delta;
    spec.Validate();
  }

  const size_t steps_per_epoch = n == 0 ? 0 : (n + batch - 1) / batch;
  if (config.epochs == 0 || n == 0) {
    if (privacy) res.account = dp::Account(spec, 0);
    return res;
  }

  std::unique_ptr<nd::Optimizer> opt = nd::MakeOptimizer(config.optimizer, config.lr);
  const std::vector<nd::Matrix*> params = model.MutableParameters();
  const size_t L = model.plan().latent_dim;
  std::vector<double> eps(L);
  nd::GradientTape tape = model.ZeroTape();
  dp::NoisyAggregator agg(tape, spec);

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<size_t> order = EpochOrder(n, rng);
    double epoch_loss = 0.0;
    for (size_t s = 0; s < steps_per_epoch; ++s) {
      const size_t begin = s * batch;
      const size_t end = std::min(n, begin + batch);
      for (size_t i = begin; i < end; ++i) {
        const size_t r = order[i];
        tape.SetZero();
        for (double& e : eps) e = StandardNormal(rng);
        const ExampleTerms t = model.EvaluateExample(data.row(r), data.row_mask(r), eps, &tape);
        const double loss = -t.elbo();
        if (!std::isfinite(loss)) {
          Fail(ErrorCode::kNonFiniteLoss, "step " + std::to_string(res.steps));
        }
        epoch_loss += loss;
        agg.Add(tape);
      }
      const nd::GradientTape g = agg.Finalize(end - begin, rng);
      opt->Step(params, g);
      ++res.steps;
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(n));
  }
  if (privacy) res.account = dp::Account(spec, res.steps);
  return res;
}

TrainedModel TrainFromRecipe(const ModelRecipe& recipe, const scg::Dataset& data,
                             uint64_t seed) {
  const FactorizationPlan plan =
      BuildPlan(data.schema, recipe.graph ? &*recipe.graph : nullptr, recipe.latent_dim,
                recipe.mode);
  Rng init_rng(DeriveSeed(seed, "genmodel.init"));
  TrainedModel out;
  out.model = GenerativeModel::Create(plan, data.schema, recipe.model, init_rng);
  Rng fit_rng(DeriveSeed(seed, "genmodel.fit"));
  out.fit = Fit(out.model, data, recipe.train, recipe.privacy, fit_rng);
  return out;
}

}  // namespace cds::gen
