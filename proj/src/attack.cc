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

#include "cds/attack.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace cds::attack {
namespace {

using json = nlohmann::json;

[[noreturn]] void Fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

void RequireObserved(const scg::Dataset& s) {
  if (!s.FullyObserved()) Fail(ErrorCode::kSchemaViolation, "feature extraction needs observed cells");
}

class NeuralGenerator : public Generator {
 public:
  explicit NeuralGenerator(gen::GenerativeModel m) : model_(std::move(m)) {}
  scg::Dataset Sample(size_t n, Rng& rng) const override { return model_.Sample(n, rng); }

 private:
  gen::GenerativeModel model_;
};

class Memorizer : public Generator {
 public:
  explicit Memorizer(scg::Dataset d) : data_(std::move(d)) {}
  scg::Dataset Sample(size_t n, Rng& rng) const override {
    std::vector<size_t> idx;
    idx.reserve(n);
    std::vector<size_t> pass(data_.rows);
    while (idx.size() < n && data_.rows > 0) {
      pass = gen::EpochOrder(data_.rows, rng);
      for (size_t i : pass) {
        if (idx.size() == n) break;
        idx.push_back(i);
      }
    }
    return data_.SelectRows(idx);
  }

 private:
  scg::Dataset data_;
};

class Oblivious : public Generator {
 public:
  explicit Oblivious(std::shared_ptr<const scg::Dataset> ref) : ref_(std::move(ref)) {}
  scg::Dataset Sample(size_t n, Rng& rng) const override {
    std::vector<size_t> idx(n);
    for (size_t& i : idx) i = static_cast<size_t>(rng() % ref_->rows);
    return ref_->SelectRows(idx);
  }

 private:
  std::shared_ptr<const scg::Dataset> ref_;
};

}  // namespace

std::string ExtractorName(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kNaive: return "naive";
    case ExtractorKind::kHistogram: return "hist";
    case ExtractorKind::kCorrelations: return "corr";
    case ExtractorKind::kEnsemble: return "ens";
  }
  return "unknown";
}

std::string ExtractorLabel(ExtractorKind kind) {
  switch (kind) {
    case ExtractorKind::kNaive: return "Naive";
    case ExtractorKind::kHistogram: return "Histogram";
    case ExtractorKind::kCorrelations: return "Correlations";
    case ExtractorKind::kEnsemble: return "Ensemble";
  }
  return "Unknown";
}

ExtractorKind ParseExtractor(const std::string& name) {
  if (name == "naive" || name == "Naive") return ExtractorKind::kNaive;
  if (name == "hist" || name == "histogram" || name == "Histogram") return ExtractorKind::kHistogram;
  if (name == "corr" || name == "correlations" || name == "Correlations") {
    return ExtractorKind::kCorrelations;
  }
  if (name == "ens" || name == "ensemble" || name == "Ensemble") return ExtractorKind::kEnsemble;
  Fail(ErrorCode::kInvalidArgument, "unknown extractor '" + name + "'");
}

const std::vector<ExtractorKind>& AllExtractors() {
  static const std::vector<ExtractorKind> all = {ExtractorKind::kNaive, ExtractorKind::kHistogram,
                                                 ExtractorKind::kCorrelations,
                                                 ExtractorKind::kEnsemble};
  return all;
}

// ---------------------------------------------------------------------------
// Feature extraction

void FeatureExtractor::Fit(const scg::Dataset& reference) {
  schema_ = reference.schema;
  cols_ = reference.cols();
  lo_.assign(cols_, 0.0);
  hi_.assign(cols_, 0.0);
  for (size_t c = 0; c < cols_; ++c) {
    if (schema_[c].IsDiscrete()) continue;
    double lo = INFINITY, hi = -INFINITY;
    for (size_t r = 0; r < reference.rows; ++r) {
      if (!reference.observed(r, c)) continue;
      lo = std::min(lo, reference.raw(r, c));
      hi = std::max(hi, reference.raw(r, c));
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    lo_[c] = lo;
    hi_[c] = hi;
  }
  fitted_ = true;
}

size_t FeatureExtractor::Dimension() const {
  size_t hist = 0;
  for (const auto& v : schema_) hist += v.IsDiscrete() ? v.Levels() : kContinuousBins;
  const size_t naive = 3 * cols_;
  const size_t corr = cols_ * (cols_ - (cols_ > 0 ? 1 : 0)) / 2;
  switch (kind_) {
    case ExtractorKind::kNaive: return naive;
    case ExtractorKind::kHistogram: return hist;
    case ExtractorKind::kCorrelations: return corr;
    case ExtractorKind::kEnsemble: return naive + hist + corr;
  }
  return 0;
}

std::vector<double> FeatureExtractor::Naive(const scg::Dataset& s) const {
  std::vector<double> out;
  out.reserve(3 * s.cols());
  std::vector<double> col(s.rows);
  for (size_t c = 0; c < s.cols(); ++c) {
    double mean = 0.0;
    for (size_t r = 0; r < s.rows; ++r) {
      col[r] = s.raw(r, c);
      mean += col[r];
    }
    const double n = static_cast<double>(s.rows);
    mean = s.rows ? mean / n : 0.0;
    double var = 0.0;
    for (double x : col) var += (x - mean) * (x - mean);
    var = s.rows ? var / n : 0.0;
    double median = 0.0;
    if (s.rows > 0) {
      std::vector<double> sorted = col;
      std::sort(sorted.begin(), sorted.end());
      const size_t m = sorted.size() / 2;
      median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    }
    out.push_back(mean);
    out.push_back(median);
    out.push_back(var);
  }
  return out;
}

std::vector<double> FeatureExtractor::Histogram(const scg::Dataset& s) const {
  if (!fitted_) Fail(ErrorCode::kUnfittedBins, "histogram extractor used before Fit");
  if (s.cols() != cols_) Fail(ErrorCode::kSchemaMismatch, "sample width differs from fitted schema");
  std::vector<double> out;
  for (size_t c = 0; c < cols_; ++c) {
    const scg::Variable& v = schema_[c];
    const size_t bins = v.IsDiscrete() ? static_cast<size_t>(v.Levels()) : kContinuousBins;
    std::vector<double> counts(bins, 0.0);
    for (size_t r = 0; r < s.rows; ++r) {
      const double x = s.raw(r, c);
      long b;
      if (v.IsDiscrete()) {
        b = static_cast<long>(x);
      } else {
        const double width = hi_[c] - lo_[c];
        b = width > 0 ? static_cast<long>(std::floor((x - lo_[c]) / width * bins)) : 0;
      }
      b = std::clamp<long>(b, 0, static_cast<long>(bins) - 1);
      counts[b] += 1.0;
    }
    out.insert(out.end(), counts.begin(), counts.end());
  }
  return out;
}

std::vector<double> FeatureExtractor::Correlations(const scg::Dataset& s) const {
  const size_t k = s.cols();
  const size_t n = s.rows;
  std::vector<double> mean(k, 0.0), sd(k, 0.0);
  for (size_t c = 0; c < k; ++c) {
    for (size_t r = 0; r < n; ++r) mean[c] += s.raw(r, c);
    if (n) mean[c] /= static_cast<double>(n);
    for (size_t r = 0; r < n; ++r) sd[c] += (s.raw(r, c) - mean[c]) * (s.raw(r, c) - mean[c]);
    sd[c] = std::sqrt(sd[c]);
  }
  std::vector<double> out;
  out.reserve(k * (k - (k > 0)) / 2);
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a + 1; b < k; ++b) {
      if (!(sd[a] > 0) || !(sd[b] > 0)) {
        out.push_back(0.0);
        continue;
      }
      double cov = 0.0;
      for (size_t r = 0; r < n; ++r) cov += (s.raw(r, a) - mean[a]) * (s.raw(r, b) - mean[b]);
      out.push_back(std::clamp(cov / (sd[a] * sd[b]), -1.0, 1.0));
    }
  }
  return out;
}

std::vector<double> FeatureExtractor::Extract(const scg::Dataset& sample) const {
  RequireObserved(sample);
  switch (kind_) {
    case ExtractorKind::kNaive: return Naive(sample);
    case ExtractorKind::kHistogram: return Histogram(sample);
    case ExtractorKind::kCorrelations: return Correlations(sample);
    case ExtractorKind::kEnsemble: {
      std::vector<double> out = Naive(sample);
      const std::vector<double> h = Histogram(sample);
      const std::vector<double> c = Correlations(sample);
      out.insert(out.end(), h.begin(), h.end());
      out.insert(out.end(), c.begin(), c.end());
      return out;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Trainers

Trainer NeuralTrainer(gen::ModelRecipe recipe) {
  return [recipe = std::move(recipe)](const scg::Dataset& data, uint64_t seed) {
    gen::TrainedModel t = gen::TrainFromRecipe(recipe, data, seed);
    return std::unique_ptr<Generator>(new NeuralGenerator(std::move(t.model)));
  };
}

Trainer MemorizerTrainer() {
  return [](const scg::Dataset& data, uint64_t) {
    return std::unique_ptr<Generator>(new Memorizer(data));
  };
}

Trainer ObliviousTrainer(scg::Dataset reference) {
  if (reference.rows == 0) Fail(ErrorCode::kInvalidArgument, "oblivious reference is empty");
  auto ref = std::make_shared<const scg::Dataset>(std::move(reference));
  return [ref](const scg::Dataset&, uint64_t) {
    return std::unique_ptr<Generator>(new Oblivious(ref));
  };
}

// ---------------------------------------------------------------------------
// Attack

json AttackConfig::ToJson() const {
  return {{"n_T", n_targets},     {"n", reps},
          {"t", train_size},      {"n_s", n_samples},
          {"s", sample_size},     {"train_fraction", train_fraction},
          {"targets", targets}};
}

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", clf::Round2(v));
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::vector<std::string> AttackReport::TableRows() const {
  std::vector<std::string> rows;
  for (const auto& c : cells) {
    rows.push_back(ExtractorLabel(c.extractor) + " & " + clf::KindName(c.classifier) + " & " +
                   FormatNumber(c.eval.accuracy) + " & " + FormatNumber(c.eval.pa()) + " & " +
                   FormatNumber(c.eval.na()));
  }
  return rows;
}

json AttackReport::ToJson() const {
  json j;
  j["dp"] = dp;
  j["rows"] = json::array();
  for (const auto& c : cells) {
    json r = c.eval.ToJson();
    r["dp"] = dp;
    r["extractor"] = ExtractorLabel(c.extractor);
    r["attack_model"] = clf::KindName(c.classifier);
    j["rows"].push_back(r);
  }
  j["metadata"] = metadata;
  return j;
}

AttackReport AttackReport::FromJson(const json& j) {
  AttackReport r;
  r.dp = j.value("dp", false);
  for (const auto& row : j.at("rows")) {
    AttackCell c;
    c.extractor = ParseExtractor(row.at("extractor").get<std::string>());
    c.classifier = clf::ParseKind(row.at("attack_model").get<std::string>());
    c.eval.accuracy = row.at("accuracy").get<double>();
    c.eval.classes = {0, 1};
    c.eval.recall = {row.at("NA").get<double>(), row.at("PA").get<double>()};
    c.eval.n = row.value("n", size_t{0});
    r.cells.push_back(c);
  }
  if (j.contains("metadata")) r.metadata = j.at("metadata");
  return r;
}

AttackOutcome RunAttack(const scg::Dataset& data, const Trainer& trainer,
                        const AttackConfig& cfg, const std::vector<ExtractorKind>& extractors,
                        const std::vector<clf::Kind>& classifiers, uint64_t seed,
                        const clf::Hyper& hp) {
  const size_t t = cfg.train_size == 0 ? data.rows : cfg.train_size;
  if (cfg.reps == 0 || cfg.n_samples == 0 || cfg.sample_size == 0) {
    Fail(ErrorCode::kInvalidArgument, "attack counts must be positive");
  }
  if (t > data.rows || t < 1) Fail(ErrorCode::kInvalidArgument, "train size must lie in [1, |D|]");
  if (!(cfg.train_fraction > 0 && cfg.train_fraction < 1)) {
    Fail(ErrorCode::kInvalidArgument, "train fraction must lie in (0, 1)");
  }

  AttackOutcome out;
  if (!cfg.targets.empty()) {
    out.targets = cfg.targets;
    for (size_t tg : out.targets) {
      if (tg >= data.rows) Fail(ErrorCode::kInvalidArgument, "target index out of range");
    }
  } else {
    if (cfg.n_targets == 0 || cfg.n_targets > data.rows) {
      Fail(ErrorCode::kInvalidArgument, "n_T must lie in [1, |D|]");
    }
    Rng rng(DeriveSeed(seed, "attack.targets"));
    const std::vector<size_t> perm = gen::EpochOrder(data.rows, rng);
    out.targets.assign(perm.begin(), perm.begin() + cfg.n_targets);
  }
  const size_t n_targets = out.targets.size();
  const size_t models = 2 * n_targets * cfg.reps;

  std::vector<FeatureExtractor> fx;
  for (ExtractorKind k : extractors) {
    fx.emplace_back(k);
    fx.back().Fit(data);
  }

  // features[model][extractor] = n_s rows of that extractor's features.
  std::vector<std::vector<std::vector<std::vector<double>>>> features(models);
  std::vector<int> model_label(models);
  std::vector<std::string> errors(models);
  const size_t workers = cfg.workers ? cfg.workers : DefaultWorkers();

  ParallelFor(models, workers, [&](size_t m) {
    const size_t target_slot = m / (2 * cfg.reps);
    const size_t rep = (m / 2) % cfg.reps;
    const bool member = m % 2 == 0;
    model_label[m] = member ? 1 : 0;
    const size_t target = out.targets[target_slot];
    try {
      // The out-set is a random (t-1)-subset of D without the target; the
      // in-set adds the target back. Both keep D's row order.
      Rng split_rng(DeriveSeed(seed, "attack.subset", target_slot * cfg.reps + rep));
      std::vector<size_t> others;
      for (size_t i = 0; i < data.rows; ++i) {
        if (i != target) others.push_back(i);
      }
      std::vector<size_t> keep = others;
      if (t - 1 < others.size()) {
        const std::vector<size_t> perm = gen::EpochOrder(others.size(), split_rng);
        keep.clear();
        for (size_t i = 0; i < t - 1; ++i) keep.push_back(others[perm[i]]);
      }
      if (member) keep.push_back(target);
      std::sort(keep.begin(), keep.end());
      const scg::Dataset train = data.SelectRows(keep);
      const std::unique_ptr<Generator> g = trainer(train, DeriveSeed(seed, "attack.model", m));
      Rng sample_rng(DeriveSeed(seed, "attack.sample", m));
      features[m].assign(fx.size(), {});
      for (size_t s = 0; s < cfg.n_samples; ++s) {
        const scg::Dataset sample = g->Sample(cfg.sample_size, sample_rng);
        for (size_t e = 0; e < fx.size(); ++e) features[m][e].push_back(fx[e].Extract(sample));
      }
    } catch (const std::exception& e) {
      errors[m] = "target " + std::to_string(target) + " repetition " + std::to_string(rep) +
                  (member ? " (in)" : " (out)") + ": " + e.what();
    }
  });
  for (size_t m = 0; m < models; ++m) {
    if (!errors[m].empty()) Fail(ErrorCode::kStageFailure, errors[m]);
  }
  out.models_trained = models;

  // Model-level split, stratified by label.
  Rng split_rng(DeriveSeed(seed, "attack.split"));
  std::vector<uint8_t> is_eval(models, 0);
  for (int label : {1, 0}) {
    std::vector<size_t> ids;
    for (size_t m = 0; m < models; ++m) {
      if (model_label[m] == label) ids.push_back(m);
    }
    const std::vector<size_t> perm = gen::EpochOrder(ids.size(), split_rng);
    const size_t n_eval = std::max<size_t>(
        1, static_cast<size_t>(std::llround((1.0 - cfg.train_fraction) * ids.size())));
    for (size_t i = 0; i < n_eval && i < ids.size(); ++i) is_eval[ids[perm[i]]] = 1;
  }
  for (size_t m = 0; m < models; ++m) {
    if (is_eval[m]) out.eval_models.push_back(m);
  }

  struct Job {
    size_t e;
    clf::Kind kind;
  };
  std::vector<Job> jobs;
  for (size_t e = 0; e < fx.size(); ++e) {
    for (clf::Kind k : classifiers) jobs.push_back({e, k});
  }
  std::vector<AttackCell> cells(jobs.size());
  ParallelFor(jobs.size(), workers, [&](size_t ji) {
    const Job& job = jobs[ji];
    const size_t dim = fx[job.e].Dimension();
    size_t n_train = 0, n_eval = 0;
    for (size_t m = 0; m < models; ++m) (is_eval[m] ? n_eval : n_train) += cfg.n_samples;
    nd::Matrix xtr(n_train, dim), xev(n_eval, dim);
    std::vector<int> ytr, yev;
    size_t rt = 0, re = 0;
    for (size_t m = 0; m < models; ++m) {
      for (const auto& row : features[m][job.e]) {
        nd::Matrix& dst = is_eval[m] ? xev : xtr;
        size_t& r = is_eval[m] ? re : rt;
        std::copy(row.begin(), row.end(), dst.data().begin() + r * dim);
        ++r;
        (is_eval[m] ? yev : ytr).push_back(model_label[m]);
      }
    }
    const uint64_t cseed = DeriveSeed(seed, "attack.classifier", ji);
    const clf::Classifier c = clf::Classifier::Fit(job.kind, xtr, ytr, hp, cseed);
    cells[ji] = {fx[job.e].kind(), job.kind, clf::Evaluate(c, xev, yev)};
  });
  out.report.cells = std::move(cells);
  out.report.metadata = {{"config", cfg.ToJson()},
                         {"seed", seed},
                         {"targets", out.targets},
                         {"models_trained", models}};
  return out;
}

std::vector<DeltaCell> AdvantageDelta(const AttackReport& a, const AttackReport& b) {
  if (a.cells.size() != b.cells.size()) Fail(ErrorCode::kGridMismatch, "reports differ in size");
  std::vector<DeltaCell> out;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    const auto& x = a.cells[i];
    const auto& y = b.cells[i];
    if (x.extractor != y.extractor || x.classifier != y.classifier) {
      Fail(ErrorCode::kGridMismatch, "cell " + std::to_string(i) + " differs between reports");
    }
    out.push_back({x.extractor, x.classifier, x.eval.accuracy - y.eval.accuracy});
  }
  return out;
}

json DeltaToJson(const std::vector<DeltaCell>& deltas) {
  json j = json::array();
  for (const auto& d : deltas) {
    j.push_back({{"extractor", ExtractorLabel(d.extractor)},
                 {"attack_model", clf::KindName(d.classifier)},
                 {"delta", clf::Round2(d.delta)}});
  }
  return j;
}

}  // namespace cds::attack
