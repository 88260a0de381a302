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

#include "cds/utility.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "cds/dp.h"
#include "cds/svg.h"

namespace cds::utility {
namespace {

using json = nlohmann::json;

[[noreturn]] void Fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

std::string FormatCell(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", clf::Round2(v));
  const std::string out = buf;
  return out == "-0.00" ? "0.00" : out;
}

std::vector<std::pair<clf::Kind, double>> MeanBy(const std::vector<UtilityCell>& cells,
                                                 double (*get)(const UtilityCell&)) {
  std::vector<std::pair<clf::Kind, double>> out;
  for (clf::Kind k : clf::AllKinds()) {
    double s = 0.0;
    size_t n = 0;
    for (const auto& c : cells) {
      if (c.classifier == k) {
        s += get(c);
        ++n;
      }
    }
    if (n) out.emplace_back(k, s / static_cast<double>(n));
  }
  return out;
}

}  // namespace

std::vector<UtilityTask> MakeTasks(const scg::Dataset& data, size_t count, uint64_t seed,
                                   double train_fraction) {
  std::vector<size_t> discrete;
  for (size_t c = 0; c < data.cols(); ++c) {
    if (data.schema[c].IsDiscrete()) discrete.push_back(c);
  }
  if (count > discrete.size()) {
    Fail(ErrorCode::kInsufficientCategoricalTargets,
         "requested " + std::to_string(count) + " tasks but only " +
             std::to_string(discrete.size()) + " discrete attributes exist");
  }
  Rng rng(DeriveSeed(seed, "utility.tasks"));
  const std::vector<size_t> perm = gen::EpochOrder(discrete.size(), rng);
  std::vector<UtilityTask> tasks;
  for (size_t i = 0; i < count; ++i) {
    UtilityTask t;
    t.target = discrete[perm[i]];
    for (size_t c = 0; c < data.cols(); ++c) {
      if (c != t.target) t.features.push_back(c);
    }
    std::map<int, std::vector<size_t>> by_label;
    for (size_t r = 0; r < data.rows; ++r) {
      if (data.observed(r, t.target)) by_label[static_cast<int>(data.raw(r, t.target))].push_back(r);
    }
    Rng split_rng(DeriveSeed(seed, "utility.split", t.target));
    for (auto& [label, rows] : by_label) {
      const std::vector<size_t> order = gen::EpochOrder(rows.size(), split_rng);
      const size_t n_train =
          static_cast<size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
      for (size_t j = 0; j < rows.size(); ++j) {
        (j < n_train ? t.train_rows : t.test_rows).push_back(rows[order[j]]);
      }
    }
    std::sort(t.train_rows.begin(), t.train_rows.end());
    std::sort(t.test_rows.begin(), t.test_rows.end());
    tasks.push_back(std::move(t));
  }
  return tasks;
}

nd::Matrix DesignMatrix(const scg::Dataset& data, const std::vector<size_t>& rows,
                        const std::vector<size_t>& features) {
  size_t width = 0;
  for (size_t c : features) {
    width += data.schema[c].kind == scg::Kind::kCategorical ? data.schema[c].cardinality : 1;
  }
  nd::Matrix x(rows.size(), width);
  for (size_t i = 0; i < rows.size(); ++i) {
    size_t p = 0;
    for (size_t c : features) {
      const bool obs = data.observed(rows[i], c);
      const double v = data.raw(rows[i], c);
      if (data.schema[c].kind == scg::Kind::kCategorical) {
        if (obs) x(i, p + static_cast<size_t>(v)) = 1.0;
        p += data.schema[c].cardinality;
      } else {
        x(i, p++) = obs ? v : 0.0;
      }
    }
  }
  return x;
}

std::vector<int> Labels(const scg::Dataset& data, const std::vector<size_t>& rows, size_t target) {
  std::vector<int> y(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) y[i] = static_cast<int>(data.at(rows[i], target));
  return y;
}

double UtilityReport::MeanDelta() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.delta();
  return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

double UtilityReport::MeanOriginal() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.original;
  return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

double UtilityReport::MeanSynthetic() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.synthetic;
  return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
}

std::vector<std::pair<clf::Kind, double>> UtilityReport::DeltaByClassifier() const {
  return MeanBy(cells, [](const UtilityCell& c) { return c.delta(); });
}

std::vector<std::pair<clf::Kind, double>> UtilityReport::OriginalByClassifier() const {
  return MeanBy(cells, [](const UtilityCell& c) { return c.original; });
}

std::vector<std::string> UtilityReport::TableRows() const {
  std::vector<std::string> rows;
  for (const auto& [k, d] : DeltaByClassifier()) rows.push_back(clf::KindName(k) + " & " + FormatCell(d));
  return rows;
}

json UtilityReport::ToJson() const {
  json j;
  j["cells"] = json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"target", c.target_name},
                          {"classifier", clf::KindName(c.classifier)},
                          {"original", clf::Round2(c.original)},
                          {"synthetic", clf::Round2(c.synthetic)},
                          {"delta", clf::Round2(c.delta())}});
  }
  j["by_classifier"] = json::array();
  const auto base = OriginalByClassifier();
  const auto deltas = DeltaByClassifier();
  for (size_t i = 0; i < deltas.size(); ++i) {
    j["by_classifier"].push_back({{"classifier", clf::KindName(deltas[i].first)},
                                  {"baseline", clf::Round2(base[i].second)},
                                  {"delta", clf::Round2(deltas[i].second)}});
  }
  j["mean_delta"] = clf::Round2(MeanDelta());
  j["mean_original"] = clf::Round2(MeanOriginal());
  j["mean_synthetic"] = clf::Round2(MeanSynthetic());
  return j;
}

UtilityReport EvaluateUtility(const scg::Dataset& original, const scg::Dataset& synthetic,
                              const std::vector<UtilityTask>& tasks,
                              const std::vector<clf::Kind>& kinds, uint64_t seed,
                              const clf::Hyper& hp) {
  if (scg::SchemaHash(original.schema) != scg::SchemaHash(synthetic.schema)) {
    Fail(ErrorCode::kSchemaMismatch, "original and synthetic schemas differ");
  }
  if (!synthetic.FullyObserved()) {
    Fail(ErrorCode::kSchemaViolation, "synthetic data must be fully observed");
  }
  if (synthetic.rows == 0 && !tasks.empty()) {
    Fail(ErrorCode::kInvalidArgument, "synthetic dataset is empty");
  }
  UtilityReport report;
  report.cells.resize(tasks.size() * kinds.size());
  ParallelFor(report.cells.size(), DefaultWorkers(), [&](size_t idx) {
    const size_t ti = idx / kinds.size();
    const clf::Kind kind = kinds[idx % kinds.size()];
    const UtilityTask& task = tasks[ti];

    Rng rng(DeriveSeed(seed, "utility.synthetic_rows", ti));
    std::vector<size_t> syn_rows = gen::EpochOrder(synthetic.rows, rng);
    const size_t want = task.train_rows.size();
    if (syn_rows.size() >= want) {
      syn_rows.resize(want);
    } else {
      while (syn_rows.size() < want) syn_rows.push_back(static_cast<size_t>(rng() % synthetic.rows));
    }

    const uint64_t cseed = DeriveSeed(seed, "utility.classifier", idx);
    const nd::Matrix x_test = DesignMatrix(original, task.test_rows, task.features);
    const std::vector<int> y_test = Labels(original, task.test_rows, task.target);

    const clf::Classifier on_orig =
        clf::Classifier::Fit(kind, DesignMatrix(original, task.train_rows, task.features),
                             Labels(original, task.train_rows, task.target), hp, cseed);
    const clf::Classifier on_syn =
        clf::Classifier::Fit(kind, DesignMatrix(synthetic, syn_rows, task.features),
                             Labels(synthetic, syn_rows, task.target), hp, cseed);
    UtilityCell& cell = report.cells[idx];
    cell.target = task.target;
    cell.target_name = original.schema[task.target].name;
    cell.classifier = kind;
    cell.original = clf::Evaluate(on_orig, x_test, y_test).accuracy;
    cell.synthetic = clf::Evaluate(on_syn, x_test, y_test).accuracy;
  });
  return report;
}

json SweepTable::ToJson() const {
  json j;
  j["points"] = json::array();
  for (const auto& p : points) {
    j["points"].push_back(
        {{"target_epsilon", std::isinf(p.target_epsilon) ? json(nullptr) : json(p.target_epsilon)},
         {"mode", gen::ModeName(p.mode)},
         {"sigma", p.sigma},
         {"ledger_epsilon", std::isinf(p.ledger_epsilon) ? json(nullptr) : json(p.ledger_epsilon)},
         {"mean_accuracy", clf::Round2(p.mean_accuracy)},
         {"mean_delta", clf::Round2(p.mean_delta)}});
  }
  j["flagged"] = flagged;
  return j;
}

std::string SweepTable::Csv() const {
  std::string out = "target_epsilon,mode,sigma,ledger_epsilon,mean_accuracy,mean_delta\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%s,%.2f,%.2f\n",
                  std::isinf(p.target_epsilon) ? "inf" : svg::Num(p.target_epsilon).c_str(),
                  gen::ModeName(p.mode).c_str(), p.sigma,
                  std::isinf(p.ledger_epsilon) ? "inf" : svg::Num(p.ledger_epsilon).c_str(),
                  p.mean_accuracy, p.mean_delta);
    out += buf;
  }
  return out;
}

SweepTable PrivacyUtilitySweep(const scg::Dataset& data, const scg::CausalGraph& graph,
                               const std::vector<double>& epsilons, const SweepConfig& cfg,
                               uint64_t seed) {
  if (data.rows == 0) Fail(ErrorCode::kInvalidArgument, "sweep needs data");
  const size_t n = data.rows;
  const size_t batch = std::min(cfg.base.train.batch_size, n);
  const uint64_t steps = cfg.base.train.epochs * ((n + batch - 1) / batch);
  const double q = static_cast<double>(batch) / static_cast<double>(n);
  const double delta = cfg.delta > 0 ? cfg.delta : 1.0 / static_cast<double>(n);
  const std::vector<UtilityTask> tasks = MakeTasks(data, cfg.tasks, seed);

  SweepTable table;
  for (size_t ei = 0; ei < epsilons.size(); ++ei) {
    const double eps = epsilons[ei];
    const bool private_run = std::isfinite(eps);
    const double sigma = private_run ? dp::CalibrateSigma(q, steps, delta, eps) : 0.0;
    for (gen::Mode mode : {gen::Mode::kCausal, gen::Mode::kAssociational}) {
      gen::ModelRecipe recipe = cfg.base;
      recipe.mode = mode;
      recipe.graph = graph;
      recipe.privacy.reset();
      if (private_run) {
        dp::PrivacySpec spec;
        spec.clip_norm = mode == gen::Mode::kCausal ? cfg.causal_clip : cfg.associational_clip;
        spec.noise_multiplier = sigma;
        spec.delta = delta;
        recipe.privacy = spec;
      }
      const gen::TrainedModel tm = gen::TrainFromRecipe(recipe, data, DeriveSeed(seed, "sweep.train", ei));
      Rng sample_rng(DeriveSeed(seed, "sweep.sample", ei));
      const scg::Dataset syn = tm.model.Sample(n, sample_rng);
      const UtilityReport rep =
          EvaluateUtility(data, syn, tasks, cfg.kinds, DeriveSeed(seed, "sweep.utility"), cfg.hp);
      SweepPoint p;
      p.target_epsilon = eps;
      p.mode = mode;
      p.sigma = sigma;
      p.ledger_epsilon = tm.fit.account ? tm.fit.account->epsilon : INFINITY;
      p.mean_accuracy = rep.MeanSynthetic();
      p.mean_delta = rep.MeanDelta();
      table.points.push_back(p);
    }
  }
  for (gen::Mode mode : {gen::Mode::kCausal, gen::Mode::kAssociational}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < table.points.size(); ++i) {
      if (table.points[i].mode == mode) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return table.points[a].target_epsilon < table.points[b].target_epsilon;
    });
    for (size_t i = 1; i < idx.size(); ++i) {
      if (table.points[idx[i]].mean_accuracy < table.points[idx[i - 1]].mean_accuracy) {
        table.flagged.push_back(idx[i]);
      }
    }
  }
  std::sort(table.flagged.begin(), table.flagged.end());
  return table;
}

PairplotResult PairplotExport(const scg::Dataset& original, const scg::Dataset& synthetic,
                              size_t attribute_count, uint64_t seed) {
  if (scg::SchemaHash(original.schema) != scg::SchemaHash(synthetic.schema)) {
    Fail(ErrorCode::kSchemaMismatch, "original and synthetic schemas differ");
  }
  const size_t k = original.cols();
  if (attribute_count > k) Fail(ErrorCode::kInvalidArgument, "attribute_count exceeds k");
  PairplotResult res;
  Rng rng(DeriveSeed(seed, "pairplot.attributes"));
  const std::vector<size_t> perm = gen::EpochOrder(k, rng);
  res.attributes.assign(perm.begin(), perm.begin() + attribute_count);
  std::sort(res.attributes.begin(), res.attributes.end());
  const auto& attrs = res.attributes;

  // CSV.
  char buf[64];
  for (size_t a : attrs) res.csv += original.schema[a].name + ",";
  res.csv += "source\n";
  auto emit = [&](const scg::Dataset& d, const char* tag) {
    for (size_t r = 0; r < d.rows; ++r) {
      for (size_t a : attrs) {
        if (d.observed(r, a)) {
          if (d.schema[a].IsDiscrete()) {
            std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(d.raw(r, a)));
          } else {
            std::snprintf(buf, sizeof(buf), "%.6g", d.raw(r, a));
          }
          res.csv += buf;
        }
        res.csv += ",";
      }
      res.csv += tag;
      res.csv += "\n";
    }
  };
  emit(original, "original");
  emit(synthetic, "synthetic");

  // Shared ranges and diagonal histograms.
  std::vector<double> lo(attrs.size()), hi(attrs.size());
  for (size_t i = 0; i < attrs.size(); ++i) {
    const auto& v = original.schema[attrs[i]];
    if (v.IsDiscrete()) {
      lo[i] = 0;
      hi[i] = v.Levels() - 1;
      continue;
    }
    double l = INFINITY, h = -INFINITY;
    for (const scg::Dataset* d : {&original, &synthetic}) {
      for (size_t r = 0; r < d->rows; ++r) {
        if (!d->observed(r, attrs[i])) continue;
        l = std::min(l, d->raw(r, attrs[i]));
        h = std::max(h, d->raw(r, attrs[i]));
      }
    }
    if (!std::isfinite(l)) l = 0, h = 1;
    lo[i] = l;
    hi[i] = h > l ? h : l + 1;
  }
  auto hist = [&](const scg::Dataset& d, size_t i) {
    const auto& v = d.schema[attrs[i]];
    const size_t bins = v.IsDiscrete() ? static_cast<size_t>(v.Levels()) : 10;
    std::vector<double> counts(bins, 0.0);
    for (size_t r = 0; r < d.rows; ++r) {
      if (!d.observed(r, attrs[i])) continue;
      const double x = d.raw(r, attrs[i]);
      long b = v.IsDiscrete() ? static_cast<long>(x)
                              : static_cast<long>(std::floor((x - lo[i]) / (hi[i] - lo[i]) * bins));
      b = std::clamp<long>(b, 0, static_cast<long>(bins) - 1);
      counts[b] += 1;
    }
    return counts;
  };
  for (size_t i = 0; i < attrs.size(); ++i) {
    res.original_hist.push_back(hist(original, i));
    res.synthetic_hist.push_back(hist(synthetic, i));
  }

  // SVG scatter matrix.
  const double cell = 90, pad = 30;
  const double side = pad + cell * static_cast<double>(attrs.size()) + 10;
  svg::Canvas c(side, side + 20);
  c.Text(side / 2, 14, "original (blue) vs synthetic (orange)", 11, "middle");
  Rng jitter(DeriveSeed(seed, "pairplot.jitter"));
  const size_t max_points = 150;
  for (size_t i = 0; i < attrs.size(); ++i) {
    for (size_t j = 0; j < attrs.size(); ++j) {
      const double x0 = pad + cell * static_cast<double>(j);
      const double y0 = pad + cell * static_cast<double>(i);
      c.Rect(x0, y0, cell - 4, cell - 4, "#f4f4f4");
      if (i == j) {
        const auto& ho = res.original_hist[i];
        const auto& hs = res.synthetic_hist[i];
        double mx = 1.0;
        for (double v : ho) mx = std::max(mx, v);
        for (double v : hs) mx = std::max(mx, v);
        const double bw = (cell - 8) / static_cast<double>(ho.size());
        for (size_t b = 0; b < ho.size(); ++b) {
          const double ho_h = ho[b] / mx * (cell - 10);
          const double hs_h = hs[b] / mx * (cell - 10);
          c.Rect(x0 + 2 + bw * b, y0 + cell - 6 - ho_h, bw * 0.9, ho_h, "#1f77b4", 0.5);
          c.Rect(x0 + 2 + bw * b, y0 + cell - 6 - hs_h, bw * 0.9, hs_h, "#ff7f0e", 0.5);
        }
        c.Text(x0 + 3, y0 + 10, original.schema[attrs[i]].name, 8);
        continue;
      }
      for (const auto& [d, color] : {std::pair{&original, "#1f77b4"}, std::pair{&synthetic, "#ff7f0e"}}) {
        for (size_t r = 0; r < std::min(max_points, d->rows); ++r) {
          if (!d->observed(r, attrs[i]) || !d->observed(r, attrs[j])) continue;
          auto pos = [&](size_t a, double v) {
            double t = (v - lo[a]) / (hi[a] - lo[a]);
            if (d->schema[attrs[a]].IsDiscrete()) t += (Uniform01(jitter) - 0.5) * 0.15;
            return std::clamp(t, 0.0, 1.0);
          };
          const double px = x0 + 4 + pos(j, d->raw(r, attrs[j])) * (cell - 12);
          const double py = y0 + cell - 8 - pos(i, d->raw(r, attrs[i])) * (cell - 12);
          c.Circle(px, py, 1.2, color, 0.5);
        }
      }
    }
  }
  res.svg = c.Str();
  return res;
}

}  // namespace cds::utility
