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

#include "cds/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "cds/dp.h"
#include "cds/io.h"
#include "cds/svg.h"
#include "cds/utility.h"

namespace cds::pipeline {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void Invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); }

json EpsilonToJson(double eps) { return std::isfinite(eps) ? json(eps) : json("inf"); }

double EpsilonFromJson(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    Invalid("epsilon must be a number or \"inf\"");
  }
  return j.get<double>();
}

std::string Resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).string();
}

std::string Cell(const std::string& s) { return s.empty() ? "-" : s; }

std::string MarkdownRow(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + Cell(c) + " |";
  return out;
}

std::string MarkdownRule(size_t n) {
  std::string out = "|";
  for (size_t i = 0; i < n; ++i) out += "---|";
  return out;
}

// Three significant digits, for small quantities such as delta.
std::string ShortNumber(const json& j) {
  if (!j.is_number()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", j.get<double>());
  return buf;
}

std::string JsonNumber(const json& j) {
  if (j.is_number()) return attack::FormatNumber(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  return "-";
}

// Stage bookkeeping: captures failures so later stages can still run.
class StageLog {
 public:
  bool Run(const std::string& name, const std::function<void()>& body) {
    try {
      body();
      stages_.push_back({{"name", name}, {"status", "ok"}});
      return true;
    } catch (const std::exception& e) {
      Fail(name, e.what());
      return false;
    }
  }
  void Fail(const std::string& name, const std::string& error) {
    stages_.push_back({{"name", name}, {"status", "failed"}});
    failures_.push_back({{"stage", name}, {"error", error}});
  }
  void Skip(const std::string& name) { stages_.push_back({{"name", name}, {"status", "skipped"}}); }
  const json& stages() const { return stages_; }
  const json& failures() const { return failures_; }

 private:
  json stages_ = json::array();
  json failures_ = json::array();
};

}  // namespace

std::vector<std::string> DefaultSeedLabels() {
  return {"attack.classifier", "attack.model", "attack.sample", "attack.split",
          "attack.subset", "attack.targets", "clf.rf.tree", "genmodel.fit",
          "genmodel.init", "pairplot.attributes", "pairplot.jitter", "pipeline.attack",
          "pipeline.data", "pipeline.graph", "pipeline.pairplot", "pipeline.sample",
          "pipeline.sweep", "pipeline.train", "pipeline.utility", "sweep.sample",
          "sweep.train", "sweep.utility", "utility.classifier", "utility.split",
          "utility.synthetic_rows", "utility.tasks"};
}

std::string ModelCell::Name() const { return gen::ModeName(mode) + (dp ? "-dp" : "-nodp"); }

std::vector<ModelCell> GridCells() {
  return {{gen::Mode::kCausal, true},
          {gen::Mode::kCausal, false},
          {gen::Mode::kAssociational, true},
          {gen::Mode::kAssociational, false}};
}

void ExperimentManifest::Validate() const {
  if (run_id.empty()) Invalid("run_id must be non-empty");
  for (char c : run_id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) {
      Invalid("run_id may only contain letters, digits, '-', '_' and '.'");
    }
  }
  if (run_id.front() == '.') Invalid("run_id must not start with '.'");
  if (dataset_path.empty() && synthetic_rows < 2) Invalid("synthetic_rows must be >= 2");
  if (!dataset_path.empty() && graph_path.empty()) {
    Invalid("a dataset file needs graph_path for the causal models");
  }
  if (!(target_epsilon > 0)) Invalid("target_epsilon must be > 0");
  if (!(delta >= 0 && delta < 1)) Invalid("delta must be in [0, 1)");
  if (!(causal_clip > 0) || !(associational_clip > 0)) Invalid("clip norms must be > 0");
  if (model.train.batch_size == 0 || model.train.epochs == 0) {
    Invalid("batch_size and epochs must be >= 1");
  }
  if (!(model.train.lr > 0)) Invalid("lr must be > 0");
  if (model.latent_dim == 0 || model.model.hidden == 0) Invalid("latent_dim and hidden must be >= 1");
  if (attack_enabled) {
    if (extractors.empty() || attack_classifiers.empty()) {
      Invalid("attack needs at least one extractor and classifier");
    }
    if (attack.n_targets == 0 || attack.reps == 0 || attack.n_samples == 0 ||
        attack.sample_size == 0) {
      Invalid("attack sizes must be >= 1");
    }
    if (!(attack.train_fraction > 0 && attack.train_fraction < 1)) {
      Invalid("attack train_fraction must be in (0, 1)");
    }
  }
  if (utility_enabled && (utility_tasks == 0 || utility_classifiers.empty())) {
    Invalid("utility needs tasks and classifiers");
  }
  for (double e : sweep_epsilons) {
    if (!(e > 0)) Invalid("sweep epsilons must be > 0");
  }
}

json ExperimentManifest::ToJson() const {
  json extractors_j = json::array();
  for (auto e : extractors) extractors_j.push_back(attack::ExtractorName(e));
  json attack_kinds = json::array();
  for (auto k : attack_classifiers) attack_kinds.push_back(clf::KindName(k));
  json utility_kinds = json::array();
  for (auto k : utility_classifiers) utility_kinds.push_back(clf::KindName(k));
  json sweep = json::array();
  for (double e : sweep_epsilons) sweep.push_back(EpsilonToJson(e));
  json attack_j = attack.ToJson();
  attack_j["enabled"] = attack_enabled;
  attack_j["extractors"] = extractors_j;
  attack_j["classifiers"] = attack_kinds;
  return {
      {"manifest_version", kManifestVersion},
      {"run_id", run_id},
      {"seed", seed},
      {"dataset",
       {{"path", dataset_path},
        {"synthetic_rows", synthetic_rows},
        {"synthetic",
         {{"variables", synthetic.variables},
          {"continuous", synthetic.continuous},
          {"max_parents", synthetic.max_parents},
          {"weight_scale", synthetic.weight_scale}}}}},
      {"graph_path", graph_path},
      {"model",
       {{"latent_dim", model.latent_dim},
        {"model", model.model.ToJson()},
        {"train", model.train.ToJson()}}},
      {"privacy",
       {{"target_epsilon", target_epsilon},
        {"delta", delta},
        {"causal_clip", causal_clip},
        {"associational_clip", associational_clip}}},
      {"attack", attack_j},
      {"utility",
       {{"enabled", utility_enabled}, {"tasks", utility_tasks}, {"classifiers", utility_kinds}}},
      {"sweep", {{"epsilons", sweep}}},
      {"pairplot", {{"attributes", pairplot_attributes}}},
      {"tool_version", tool_version},
      {"seed_labels", seed_labels},
      {"workers", workers},
  };
}

ExperimentManifest ExperimentManifest::FromJson(const json& in) {
  if (!in.is_object()) Invalid("manifest must be a JSON object");
  const int version = in.value("manifest_version", kManifestVersion);
  if (version != kManifestVersion) {
    Invalid("unsupported manifest_version " + std::to_string(version));
  }
  json j = ExperimentManifest{}.ToJson();
  j.merge_patch(in);
  try {
    ExperimentManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    const json& d = j.at("dataset");
    m.dataset_path = d.at("path").get<std::string>();
    m.synthetic_rows = d.at("synthetic_rows").get<size_t>();
    const json& s = d.at("synthetic");
    m.synthetic.variables = s.at("variables").get<size_t>();
    m.synthetic.continuous = s.at("continuous").get<size_t>();
    m.synthetic.max_parents = s.at("max_parents").get<size_t>();
    m.synthetic.weight_scale = s.at("weight_scale").get<double>();
    m.graph_path = j.at("graph_path").get<std::string>();
    const json& mj = j.at("model");
    m.model.latent_dim = mj.at("latent_dim").get<size_t>();
    m.model.model = gen::ModelConfig::FromJson(mj.at("model"));
    m.model.train = gen::TrainConfig::FromJson(mj.at("train"));
    const json& p = j.at("privacy");
    m.target_epsilon = p.at("target_epsilon").get<double>();
    m.delta = p.at("delta").get<double>();
    m.causal_clip = p.at("causal_clip").get<double>();
    m.associational_clip = p.at("associational_clip").get<double>();
    const json& a = j.at("attack");
    m.attack_enabled = a.at("enabled").get<bool>();
    m.attack.n_targets = a.at("n_T").get<size_t>();
    m.attack.reps = a.at("n").get<size_t>();
    m.attack.train_size = a.at("t").get<size_t>();
    m.attack.n_samples = a.at("n_s").get<size_t>();
    m.attack.sample_size = a.at("s").get<size_t>();
    m.attack.train_fraction = a.at("train_fraction").get<double>();
    m.attack.targets = a.at("targets").get<std::vector<size_t>>();
    m.extractors.clear();
    for (const auto& e : a.at("extractors")) m.extractors.push_back(attack::ParseExtractor(e));
    m.attack_classifiers.clear();
    for (const auto& k : a.at("classifiers")) m.attack_classifiers.push_back(clf::ParseKind(k));
    const json& u = j.at("utility");
    m.utility_enabled = u.at("enabled").get<bool>();
    m.utility_tasks = u.at("tasks").get<size_t>();
    m.utility_classifiers.clear();
    for (const auto& k : u.at("classifiers")) m.utility_classifiers.push_back(clf::ParseKind(k));
    for (const auto& e : j.at("sweep").at("epsilons")) m.sweep_epsilons.push_back(EpsilonFromJson(e));
    m.pairplot_attributes = j.at("pairplot").at("attributes").get<size_t>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed_labels = j.at("seed_labels").get<std::vector<std::string>>();
    m.workers = j.at("workers").get<size_t>();
    return m;
  } catch (const json::exception& e) {
    Invalid(std::string("manifest: ") + e.what());
  }
}

std::string ExperimentManifest::Hash() const {
  json j = ToJson();
  j.erase("workers");
  return io::Hex64(Fnv1a64(j.dump()));
}

std::vector<std::string> ExperimentManifest::PlannedStages() const {
  std::vector<std::string> out = {"data"};
  for (const auto& c : GridCells()) out.push_back("train:" + c.Name());
  out.push_back("sample");
  if (utility_enabled) out.push_back("utility");
  if (attack_enabled) {
    for (const auto& c : GridCells()) out.push_back("attack:" + c.Name());
    out.push_back("deltas");
  }
  if (!sweep_epsilons.empty()) out.push_back("sweep");
  if (pairplot_attributes > 0) out.push_back("pairplot");
  out.push_back("report");
  return out;
}

RunResult RunPipeline(const ExperimentManifest& m, const RunOptions& options) {
  m.Validate();
  RunResult result;
  if (options.dry_run) {
    result.report = {{"dry_run", true},
                     {"manifest", m.ToJson()},
                     {"manifest_hash", m.Hash()},
                     {"stages", m.PlannedStages()}};
    return result;
  }

  const fs::path final_dir = fs::path(options.out_root) / m.run_id;
  if (fs::exists(final_dir)) {
    throw Error(ErrorCode::kIoError,
                "run directory '" + final_dir.string() + "' exists; runs are never overwritten");
  }
  const fs::path tmp_dir = fs::path(options.out_root) / ("." + m.run_id + ".incomplete");
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  io::MakeDirs(tmp_dir.string());

  // Every file goes through this writer, from this thread.
  std::set<std::string> artifacts;
  auto write = [&](const std::string& rel, const std::string& content) {
    io::WriteFile((tmp_dir / rel).string(), content);
    artifacts.insert(rel);
  };

  const size_t workers = m.workers == 0 ? DefaultWorkers() : m.workers;
  SetSeedAudit(options.audit_seeds);
  StageLog log;
  const std::vector<ModelCell> cells = GridCells();
  json report;
  report["report_version"] = kReportVersion;
  report["run_id"] = m.run_id;
  report["manifest_hash"] = m.Hash();
  report["tool_version"] = m.tool_version;

  // data
  scg::Dataset data;
  std::optional<scg::CausalGraph> graph;
  const bool have_data = log.Run("data", [&] {
    if (m.dataset_path.empty()) {
      graph = scg::MakeSyntheticScg(DeriveSeed(m.seed, "pipeline.graph"), m.synthetic);
      Rng rng(DeriveSeed(m.seed, "pipeline.data"));
      data = scg::SampleDataset(*graph, m.synthetic_rows, rng);
    } else {
      data = io::LoadDataset(Resolve(options.base_dir, m.dataset_path));
      graph = scg::GraphFromJson(io::ReadJson(Resolve(options.base_dir, m.graph_path)));
    }
    if (data.rows < 2) throw Error(ErrorCode::kInvalidArgument, "dataset needs >= 2 rows");
    io::SaveDataset((tmp_dir / "data/original.csv").string(), data);
    artifacts.insert("data/original.csv");
    artifacts.insert("data/original.csv.schema.json");
    write("data/graph.json", scg::GraphToJson(*graph).dump(2) + "\n");
  });
  report["dataset_hash"] = have_data ? io::DatasetHash(data) : "";

  // train
  std::vector<std::optional<gen::TrainedModel>> trained(cells.size());
  std::vector<std::string> train_errors(cells.size());
  std::vector<gen::ModelRecipe> recipes(cells.size());
  json ledger = json::array();
  if (have_data) {
    const size_t n = data.rows;
    const size_t batch = std::min(m.model.train.batch_size, n);
    const uint64_t steps = m.model.train.epochs * ((n + batch - 1) / batch);
    const double q = static_cast<double>(batch) / static_cast<double>(n);
    const double delta = m.delta > 0 ? m.delta : 1.0 / static_cast<double>(n);
    std::optional<double> sigma;
    std::string sigma_error;
    try {
      sigma = dp::CalibrateSigma(q, steps, delta, m.target_epsilon);
    } catch (const std::exception& e) {
      sigma_error = e.what();
    }
    for (size_t i = 0; i < cells.size(); ++i) {
      recipes[i] = m.model;
      recipes[i].mode = cells[i].mode;
      recipes[i].graph = graph;
      if (cells[i].dp && sigma) {
        dp::PrivacySpec spec;
        spec.clip_norm = cells[i].mode == gen::Mode::kCausal ? m.causal_clip : m.associational_clip;
        spec.noise_multiplier = *sigma;
        spec.delta = delta;
        recipes[i].privacy = spec;
      }
    }
    ParallelFor(cells.size(), workers, [&](size_t i) {
      try {
        if (cells[i].dp && !sigma) throw Error(ErrorCode::kUnreachableEpsilon, sigma_error);
        trained[i] = gen::TrainFromRecipe(recipes[i], data, DeriveSeed(m.seed, "pipeline.train"));
      } catch (const std::exception& e) {
        train_errors[i] = e.what();
      }
    });
    for (size_t i = 0; i < cells.size(); ++i) {
      const std::string stage = "train:" + cells[i].Name();
      if (!trained[i]) {
        log.Fail(stage, train_errors[i]);
        continue;
      }
      log.Run(stage, [&] {
        const gen::FitResult& fit = trained[i]->fit;
        json entry = {{"model", cells[i].Name()},
                      {"mode", gen::ModeName(cells[i].mode)},
                      {"dp", cells[i].dp},
                      {"steps", fit.steps},
                      {"final_loss", fit.loss_curve.empty() ? 0.0 : fit.loss_curve.back()}};
        if (cells[i].dp) {
          entry["clip"] = recipes[i].privacy->clip_norm;
          entry["sigma"] = recipes[i].privacy->noise_multiplier;
          entry["delta"] = recipes[i].privacy->delta;
          entry["epsilon"] = fit.account->epsilon;
          entry["best_order"] = fit.account->best_order;
        } else {
          entry["clip"] = nullptr;
          entry["sigma"] = 0.0;
          entry["delta"] = nullptr;
          entry["epsilon"] = "inf";
          entry["best_order"] = nullptr;
        }
        ledger.push_back(entry);
        write("models/" + cells[i].Name() + ".json", trained[i]->model.ToJson().dump() + "\n");
        std::string curve = "epoch,loss\n";
        for (size_t e = 0; e < fit.loss_curve.size(); ++e) {
          curve += std::to_string(e + 1) + "," + nlohmann::json(fit.loss_curve[e]).dump() + "\n";
        }
        write("models/" + cells[i].Name() + ".loss.csv", curve);
      });
    }
  } else {
    for (const auto& c : cells) log.Skip("train:" + c.Name());
  }
  report["ledger"] = ledger;

  // sample
  std::vector<std::optional<scg::Dataset>> synthetic(cells.size());
  const bool any_model =
      std::any_of(trained.begin(), trained.end(), [](const auto& t) { return t.has_value(); });
  if (any_model) {
    log.Run("sample", [&] {
      for (size_t i = 0; i < cells.size(); ++i) {
        if (!trained[i]) continue;
        Rng rng(DeriveSeed(m.seed, "pipeline.sample"));
        synthetic[i] = trained[i]->model.Sample(data.rows, rng);
        write("synthetic/" + cells[i].Name() + ".csv", io::DatasetToCsv(*synthetic[i]));
      }
    });
  } else {
    log.Skip("sample");
  }

  // utility
  json utility = {{"enabled", m.utility_enabled}, {"models", json::array()}};
  if (m.utility_enabled) {
    if (any_model) {
      log.Run("utility", [&] {
        const auto tasks =
            utility::MakeTasks(data, m.utility_tasks, DeriveSeed(m.seed, "pipeline.utility"));
        json targets = json::array();
        for (const auto& t : tasks) targets.push_back(data.schema[t.target].name);
        utility["targets"] = targets;
        for (size_t i = 0; i < cells.size(); ++i) {
          if (!synthetic[i]) continue;
          const utility::UtilityReport rep =
              utility::EvaluateUtility(data, *synthetic[i], tasks, m.utility_classifiers,
                                       DeriveSeed(m.seed, "pipeline.utility"));
          json mj = rep.ToJson();
          mj["model"] = cells[i].Name();
          utility["models"].push_back(mj);
        }
      });
    } else {
      log.Skip("utility");
    }
  }
  report["utility"] = utility;

  // attack
  json attack_j = {{"enabled", m.attack_enabled}, {"models", json::array()}};
  std::vector<std::optional<attack::AttackReport>> attacks(cells.size());
  if (m.attack_enabled) {
    attack_j["config"] = m.attack.ToJson();
    attack::AttackConfig cfg = m.attack;
    cfg.workers = workers;
    for (size_t i = 0; i < cells.size(); ++i) {
      const std::string stage = "attack:" + cells[i].Name();
      if (!trained[i]) {
        log.Skip(stage);
        continue;
      }
      log.Run(stage, [&] {
        attack::AttackOutcome out = attack::RunAttack(
            data, attack::NeuralTrainer(recipes[i]), cfg, m.extractors, m.attack_classifiers,
            DeriveSeed(m.seed, "pipeline.attack"));
        out.report.dp = cells[i].dp;
        attacks[i] = out.report;
        json mj = out.report.ToJson();
        mj["model"] = cells[i].Name();
        mj["targets"] = out.targets;
        attack_j["models"].push_back(mj);
        write("attack/" + cells[i].Name() + ".json", mj.dump(2) + "\n");
      });
    }
    // Cells 0/1 are causal dp/nodp, 2/3 associational dp/nodp.
    log.Run("deltas", [&] {
      json deltas = json::array();
      auto add = [&](const std::string& name, const std::string& kind, size_t a, size_t b) {
        if (!attacks[a] || !attacks[b]) return;
        const auto d = attack::AdvantageDelta(*attacks[a], *attacks[b]);
        double mean = 0.0;
        for (const auto& c : d) mean += c.delta;
        mean /= static_cast<double>(std::max<size_t>(d.size(), 1));
        deltas.push_back({{"name", name},
                          {"kind", kind},
                          {"minuend", cells[a].Name()},
                          {"subtrahend", cells[b].Name()},
                          {"mean", clf::Round2(mean)},
                          {"cells", attack::DeltaToJson(d)}});
      };
      add("causal", "reduction", 3, 0);
      add("associational", "reduction", 3, 2);
      add("causal", "dp_effect", 1, 0);
      add("associational", "dp_effect", 3, 2);
      attack_j["deltas"] = deltas;
    });
  }
  report["attack"] = attack_j;

  // sweep
  if (!m.sweep_epsilons.empty()) {
    if (have_data) {
      log.Run("sweep", [&] {
        utility::SweepConfig sc;
        sc.base = m.model;
        sc.causal_clip = m.causal_clip;
        sc.associational_clip = m.associational_clip;
        sc.tasks = m.utility_tasks;
        sc.kinds = m.utility_classifiers;
        sc.delta = m.delta;
        const utility::SweepTable table = utility::PrivacyUtilitySweep(
            data, *graph, m.sweep_epsilons, sc, DeriveSeed(m.seed, "pipeline.sweep"));
        json sj = table.ToJson();
        sj["csv"] = "sweep/sweep.csv";
        sj["svg"] = "figures/sweep.svg";
        report["sweep"] = sj;
        write("sweep/sweep.csv", table.Csv());
      });
    } else {
      log.Skip("sweep");
    }
  }

  // pairplot
  if (m.pairplot_attributes > 0) {
    if (any_model) {
      log.Run("pairplot", [&] {
        json pj = json::array();
        for (size_t i = 0; i < cells.size(); ++i) {
          if (!synthetic[i]) continue;
          const auto pp = utility::PairplotExport(data, *synthetic[i], m.pairplot_attributes,
                                                  DeriveSeed(m.seed, "pipeline.pairplot"));
          const std::string base = "pairplot/" + cells[i].Name();
          write(base + ".csv", pp.csv);
          write(base + ".svg", pp.svg);
          pj.push_back({{"model", cells[i].Name()}, {"csv", base + ".csv"}, {"svg", base + ".svg"}});
        }
        report["pairplot"] = pj;
      });
    } else {
      log.Skip("pairplot");
    }
  }

  if (options.audit_seeds) {
    const std::set<std::string> registered(m.seed_labels.begin(), m.seed_labels.end());
    std::string missing;
    for (const std::string& label : ConsumedSeedLabels()) {
      if (!registered.count(label)) missing += (missing.empty() ? "" : ", ") + label;
    }
    if (!missing.empty()) log.Fail("seed-audit", "unregistered seed labels: " + missing);
  }
  SetSeedAudit(false);

  // report
  log.Run("report", [&] {
    report["stages"] = log.stages();
    report["failures"] = log.failures();
    report["status"] = log.failures().empty() ? "complete" : "partial";
    artifacts.insert("manifest.json");
    artifacts.insert("report.md");
    artifacts.insert("figures/attack_deltas.svg");
    if (report.contains("sweep")) artifacts.insert("figures/sweep.svg");
    report["artifacts"] = std::vector<std::string>(artifacts.begin(), artifacts.end());
    const RenderedReport r = RenderReport(report);
    write("manifest.json", m.ToJson().dump(2) + "\n");
    write("report.md", r.markdown);
    write("figures/attack_deltas.svg", r.attack_svg);
    if (!r.sweep_svg.empty()) write("figures/sweep.svg", r.sweep_svg);
  });
  // A failure of the report stage itself still leaves a readable report.json.
  report["stages"] = log.stages();
  report["failures"] = log.failures();
  report["status"] = log.failures().empty() ? "complete" : "partial";
  io::WriteFile((tmp_dir / "report.json").string(), report.dump(2) + "\n");

  fs::rename(tmp_dir, final_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot publish run directory: " + ec.message());
  result.report = report;
  result.run_dir = final_dir.string();
  result.partial = !log.failures().empty();
  return result;
}

std::vector<std::string> AttackTable(const attack::AttackReport* report) {
  std::vector<std::string> out = {MarkdownRow({"Features", "Attack model", "Accuracy", "PA", "NA"}),
                                  MarkdownRule(5)};
  if (!report || report->cells.empty()) {
    out.push_back(MarkdownRow({"disabled", "-", "-", "-", "-"}));
    return out;
  }
  for (const auto& c : report->cells) {
    out.push_back(MarkdownRow({attack::ExtractorLabel(c.extractor), clf::KindName(c.classifier),
                               attack::FormatNumber(c.eval.accuracy),
                               attack::FormatNumber(c.eval.pa()),
                               attack::FormatNumber(c.eval.na())}));
  }
  return out;
}

RenderedReport RenderReport(const json& report) {
  if (!report.is_object() || !report.contains("report_version") ||
      !report.at("report_version").is_number_integer() ||
      report.at("report_version").get<int>() != kReportVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported report_version");
  }
  RenderedReport out;
  std::vector<std::string> md;
  auto section = [&](const std::string& title) {
    md.push_back("");
    md.push_back("## " + title);
    md.push_back("");
  };
  md.push_back("# Run report: " + report.value("run_id", std::string("?")));
  md.push_back("");
  md.push_back("- Status: " + report.value("status", std::string("complete")));
  md.push_back("- Manifest hash: " + report.value("manifest_hash", std::string("-")));
  md.push_back("- Dataset hash: " + report.value("dataset_hash", std::string("-")));
  if (report.contains("failures")) {
    for (const auto& f : report.at("failures")) {
      md.push_back("- Failed stage `" + f.at("stage").get<std::string>() +
                   "`: " + f.at("error").get<std::string>());
    }
  }

  section("Privacy ledger");
  md.push_back(MarkdownRow({"Model", "Clip", "Sigma", "Epsilon", "Delta", "Steps"}));
  md.push_back(MarkdownRule(6));
  for (const auto& e : report.value("ledger", json::array())) {
    md.push_back(MarkdownRow({e.at("model").get<std::string>(), JsonNumber(e.at("clip")),
                              JsonNumber(e.at("sigma")), JsonNumber(e.at("epsilon")),
                              ShortNumber(e.at("delta")),
                              std::to_string(e.at("steps").get<size_t>())}));
  }

  section("Downstream utility change");
  const json utility = report.value("utility", json::object());
  const json umodels = utility.value("models", json::array());
  if (!utility.value("enabled", false) || umodels.empty()) {
    md.push_back(MarkdownRow({"Classifier", "Delta"}));
    md.push_back(MarkdownRule(2));
    md.push_back(MarkdownRow({"disabled", "-"}));
  } else {
    std::vector<std::string> header = {"Classifier"};
    for (const auto& um : umodels) header.push_back(um.at("model").get<std::string>());
    md.push_back(MarkdownRow(header));
    md.push_back(MarkdownRule(header.size()));
    const json& first = umodels.at(0).at("by_classifier");
    for (size_t r = 0; r < first.size(); ++r) {
      std::vector<std::string> row = {first.at(r).at("classifier").get<std::string>()};
      for (const auto& um : umodels) row.push_back(JsonNumber(um.at("by_classifier").at(r).at("delta")));
      md.push_back(MarkdownRow(row));
    }
    std::vector<std::string> mean = {"mean"};
    for (const auto& um : umodels) mean.push_back(JsonNumber(um.at("mean_delta")));
    md.push_back(MarkdownRow(mean));
  }

  const json attack_j = report.value("attack", json::object());
  const json amodels = attack_j.value("models", json::array());
  if (!attack_j.value("enabled", false) || amodels.empty()) {
    section("Membership inference");
    for (const auto& line : AttackTable(nullptr)) md.push_back(line);
  } else {
    for (const auto& am : amodels) {
      section("Membership inference: " + am.at("model").get<std::string>());
      const attack::AttackReport rep = attack::AttackReport::FromJson(am);
      for (const auto& line : AttackTable(&rep)) md.push_back(line);
    }
  }

  // Advantage reduction relative to the non-private associational model.
  std::vector<std::string> groups;
  std::vector<std::string> series;
  std::vector<std::vector<double>> values;
  for (const auto& d : attack_j.value("deltas", json::array())) {
    if (d.at("kind") != "reduction") continue;
    series.push_back(d.at("name").get<std::string>());
    std::vector<double> v;
    std::vector<std::string> g;
    for (const auto& c : d.at("cells")) {
      g.push_back(c.at("extractor").get<std::string>() + "/" + c.at("attack_model").get<std::string>());
      v.push_back(c.at("delta").get<double>());
    }
    if (groups.empty()) groups = g;
    values.push_back(v);
  }
  section("Advantage reduction");
  if (series.empty()) {
    md.push_back(MarkdownRow({"Features", "Attack model", "Reduction"}));
    md.push_back(MarkdownRule(3));
    md.push_back(MarkdownRow({"disabled", "-", "-"}));
  } else {
    std::vector<std::string> header = {"Features / attack model"};
    for (const auto& s : series) header.push_back(s);
    md.push_back(MarkdownRow(header));
    md.push_back(MarkdownRule(header.size()));
    for (size_t g = 0; g < groups.size(); ++g) {
      std::vector<std::string> row = {groups[g]};
      for (const auto& v : values) row.push_back(attack::FormatNumber(v[g]));
      md.push_back(MarkdownRow(row));
    }
    md.push_back("");
    md.push_back("![advantage reduction](figures/attack_deltas.svg)");
  }
  out.attack_svg = svg::GroupedBarChart("Advantage reduction", groups, series, values);

  if (report.contains("sweep")) {
    section("Privacy-utility sweep");
    md.push_back(MarkdownRow({"Target epsilon", "Mode", "Sigma", "Ledger epsilon", "Mean accuracy",
                              "Mean delta"}));
    md.push_back(MarkdownRule(6));
    std::map<std::string, svg::LineSeries> lines;
    for (const auto& p : report.at("sweep").at("points")) {
      const std::string mode = p.at("mode").get<std::string>();
      md.push_back(MarkdownRow({p.at("target_epsilon").is_null() ? "inf" : JsonNumber(p.at("target_epsilon")),
                                mode, svg::Num(p.at("sigma").get<double>()),
                                p.at("ledger_epsilon").is_null() ? "inf" : JsonNumber(p.at("ledger_epsilon")),
                                JsonNumber(p.at("mean_accuracy")), JsonNumber(p.at("mean_delta"))}));
      if (p.at("target_epsilon").is_number()) {
        lines[mode].name = mode;
        lines[mode].points.emplace_back(p.at("target_epsilon").get<double>(),
                                        p.at("mean_accuracy").get<double>());
      }
    }
    std::vector<svg::LineSeries> series_list;
    for (auto& [name, s] : lines) series_list.push_back(s);
    out.sweep_svg = svg::LineChart("Utility versus privacy", "epsilon", "accuracy", series_list);
    md.push_back("");
    md.push_back("![sweep](figures/sweep.svg)");
  }

  if (report.contains("pairplot")) {
    section("Pair plots");
    for (const auto& p : report.at("pairplot")) {
      md.push_back("- " + p.at("model").get<std::string>() + ": [csv](" +
                   p.at("csv").get<std::string>() + "), [svg](" + p.at("svg").get<std::string>() +
                   ")");
    }
  }

  for (const auto& line : md) out.markdown += line + "\n";
  return out;
}

}  // namespace cds::pipeline
