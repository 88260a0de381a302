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

// Command-line front end. Exit codes: 0 success, 2 validation error,
// 3 stage failure (partial results kept).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cds/attack.h"
#include "cds/clf.h"
#include "cds/common.h"
#include "cds/dp.h"
#include "cds/genmodel.h"
#include "cds/io.h"
#include "cds/pipeline.h"
#include "cds/scg.h"
#include "cds/svg.h"
#include "cds/theory.h"
#include "cds/utility.h"
#include "json.hpp"

namespace {

using nlohmann::json;
using namespace cds;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

void Emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
  } else {
    io::WriteFile(out_path, content);
  }
}

std::vector<clf::Kind> ParseKinds(const std::vector<std::string>& names) {
  if (names.empty()) return clf::AllKinds();
  std::vector<clf::Kind> out;
  for (const auto& n : names) out.push_back(clf::ParseKind(n));
  return out;
}

std::vector<attack::ExtractorKind> ParseExtractors(const std::vector<std::string>& names) {
  if (names.empty()) return attack::AllExtractors();
  std::vector<attack::ExtractorKind> out;
  for (const auto& n : names) out.push_back(attack::ParseExtractor(n));
  return out;
}

// Training flags shared by train, attack and sweep.
struct TrainFlags {
  std::string mode = "causal";
  std::string graph;
  size_t latent = 10;
  size_t hidden = 50;
  size_t batch = 100;
  size_t epochs = 50;
  double lr = 0.001;
  std::string optimizer = "adam";
  bool poe = false;

  void Register(CLI::App* app) {
    app->add_option("--mode", mode, "causal or associational");
    app->add_option("--graph", graph, "causal graph JSON");
    app->add_option("--latent", latent, "latent dimension");
    app->add_option("--hidden", hidden, "hidden width");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--epochs", epochs, "epochs");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--optimizer", optimizer, "sgd or adam");
    app->add_flag("--product-of-experts", poe, "split latent and parent networks");
  }

  gen::ModelRecipe Recipe() const {
    gen::ModelRecipe r;
    r.mode = gen::ParseMode(mode);
    if (!graph.empty()) r.graph = scg::GraphFromJson(io::ReadJson(graph));
    r.latent_dim = latent;
    r.model.hidden = hidden;
    r.model.product_of_experts = poe;
    r.train.batch_size = batch;
    r.train.epochs = epochs;
    r.train.lr = lr;
    r.train.optimizer = nd::ParseOptimizer(optimizer);
    return r;
  }
};

// Privacy flags: either a target epsilon (sigma is calibrated) or sigma.
struct PrivacyFlags {
  double epsilon = 0.0;
  double sigma = -1.0;
  double clip = -1.0;
  double delta = 0.0;

  void Register(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "target epsilon (calibrates sigma)");
    app->add_option("--sigma", sigma, "noise multiplier");
    app->add_option("--clip", clip, "clip norm (default 0.55 causal, 0.65 associational)");
    app->add_option("--delta", delta, "delta (default 1/n)");
  }

  std::optional<dp::PrivacySpec> Spec(const gen::ModelRecipe& r, size_t n) const {
    if (epsilon <= 0 && sigma < 0) return std::nullopt;
    dp::PrivacySpec spec;
    const size_t batch = std::min(r.train.batch_size, n);
    spec.delta = delta > 0 ? delta : 1.0 / static_cast<double>(n);
    spec.clip_norm = clip > 0 ? clip : (r.mode == gen::Mode::kCausal ? 0.55 : 0.65);
    if (sigma >= 0) {
      spec.noise_multiplier = sigma;
    } else {
      const uint64_t steps = r.train.epochs * ((n + batch - 1) / batch);
      spec.noise_multiplier = dp::CalibrateSigma(static_cast<double>(batch) / static_cast<double>(n),
                                                 steps, spec.delta, epsilon);
    }
    return spec;
  }
};

int CmdGenData(uint64_t seed, size_t rows, size_t variables, size_t continuous, double missing,
               const std::string& graph_in, const std::string& graph_out, const std::string& out) {
  scg::CausalGraph graph;
  if (graph_in.empty()) {
    scg::SyntheticScgOptions opts;
    opts.variables = variables;
    opts.continuous = continuous;
    graph = scg::MakeSyntheticScg(seed, opts);
  } else {
    graph = scg::GraphFromJson(io::ReadJson(graph_in));
  }
  Rng rng(DeriveSeed(seed, "pipeline.data"));
  scg::Dataset data = scg::SampleDataset(graph, rows, rng);
  if (missing > 0) data = scg::MaskAtRandom(data, missing, rng);
  io::SaveDataset(out, data);
  if (!graph_out.empty()) io::WriteJson(graph_out, scg::GraphToJson(graph));
  std::cerr << "wrote " << data.rows << " rows x " << data.cols() << " columns to " << out << "\n";
  return kExitOk;
}

int CmdTrain(const std::string& data_path, const TrainFlags& tf, const PrivacyFlags& pf,
             uint64_t seed, const std::string& out) {
  const scg::Dataset data = io::LoadDataset(data_path);
  gen::ModelRecipe recipe = tf.Recipe();
  recipe.privacy = pf.Spec(recipe, data.rows);
  const gen::TrainedModel tm = gen::TrainFromRecipe(recipe, data, seed);
  json j = {{"recipe", recipe.ToJson()},
            {"model", tm.model.ToJson()},
            {"loss_curve", tm.fit.loss_curve},
            {"steps", tm.fit.steps},
            {"account", tm.fit.account ? tm.fit.account->ToJson() : json(nullptr)}};
  io::WriteJson(out, j);
  std::cerr << "plan: " << tm.model.plan().Describe() << "\n";
  if (tm.fit.account) std::cerr << "epsilon: " << tm.fit.account->epsilon << "\n";
  return kExitOk;
}

int CmdSample(const std::string& model_path, size_t n, uint64_t seed, const std::string& out) {
  const json j = io::ReadJson(model_path);
  const gen::GenerativeModel model = gen::GenerativeModel::FromJson(j.contains("model") ? j.at("model") : j);
  Rng rng(seed);
  const scg::Dataset syn = model.Sample(n, rng);
  if (out.empty()) {
    std::cout << io::DatasetToCsv(syn);
  } else {
    io::SaveDataset(out, syn);
  }
  return kExitOk;
}

int CmdAccountant(double q, double sigma, uint64_t steps, double delta, double target,
                  double clip) {
  dp::PrivacySpec spec;
  spec.sampling_rate = q;
  spec.delta = delta;
  spec.clip_norm = clip;
  spec.noise_multiplier = target > 0 ? dp::CalibrateSigma(q, steps, delta, target) : sigma;
  json j = dp::Account(spec, steps).ToJson();
  if (target > 0) j["target_epsilon"] = target;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int CmdAttack(const std::string& data_path, const std::string& generator, const TrainFlags& tf,
              const PrivacyFlags& pf, const attack::AttackConfig& cfg,
              const std::vector<std::string>& extractors, const std::vector<std::string>& kinds,
              uint64_t seed, const std::string& out) {
  const scg::Dataset data = io::LoadDataset(data_path);
  attack::Trainer trainer;
  bool dp = false;
  if (generator == "neural") {
    gen::ModelRecipe recipe = tf.Recipe();
    const size_t t = cfg.train_size == 0 ? data.rows : cfg.train_size;
    recipe.privacy = pf.Spec(recipe, t);
    dp = recipe.privacy.has_value();
    trainer = attack::NeuralTrainer(recipe);
  } else if (generator == "memorizer") {
    trainer = attack::MemorizerTrainer();
  } else if (generator == "oblivious") {
    trainer = attack::ObliviousTrainer(data);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown generator '" + generator + "'");
  }
  attack::AttackOutcome outcome =
      attack::RunAttack(data, trainer, cfg, ParseExtractors(extractors), ParseKinds(kinds), seed);
  outcome.report.dp = dp;
  json j = outcome.report.ToJson();
  j["targets"] = outcome.targets;
  j["config"] = cfg.ToJson();
  j["generator"] = generator;
  Emit(out, j.dump(2) + "\n");
  for (const auto& row : outcome.report.TableRows()) std::cerr << row << "\n";
  return kExitOk;
}

int CmdAttackDiff(const std::string& a, const std::string& b, const std::string& out,
                  const std::string& svg_path) {
  const auto ra = attack::AttackReport::FromJson(io::ReadJson(a));
  const auto rb = attack::AttackReport::FromJson(io::ReadJson(b));
  const auto deltas = attack::AdvantageDelta(ra, rb);
  Emit(out, attack::DeltaToJson(deltas).dump(2) + "\n");
  if (!svg_path.empty()) {
    std::vector<std::string> groups;
    std::vector<double> values;
    for (const auto& d : deltas) {
      groups.push_back(attack::ExtractorLabel(d.extractor) + "/" + clf::KindName(d.classifier));
      values.push_back(d.delta);
    }
    io::WriteFile(svg_path, svg::GroupedBarChart("Advantage delta", groups, {"delta"}, {values}));
  }
  return kExitOk;
}

int CmdUtility(const std::string& data_path, const std::string& syn_path, size_t tasks,
               const std::vector<std::string>& kinds, uint64_t seed, const std::string& out) {
  const scg::Dataset data = io::LoadDataset(data_path);
  const scg::Dataset syn = io::LoadDataset(syn_path, data.schema);
  const auto t = utility::MakeTasks(data, tasks, seed);
  const auto rep = utility::EvaluateUtility(data, syn, t, ParseKinds(kinds), seed);
  Emit(out, rep.ToJson().dump(2) + "\n");
  for (const auto& row : rep.TableRows()) std::cerr << row << "\n";
  return kExitOk;
}

int CmdSweep(const std::string& data_path, const TrainFlags& tf, const std::vector<double>& eps,
             size_t tasks, const std::vector<std::string>& kinds, uint64_t seed,
             const std::string& out, const std::string& csv, const std::string& svg_path) {
  const scg::Dataset data = io::LoadDataset(data_path);
  if (tf.graph.empty()) throw Error(ErrorCode::kMissingGraph, "sweep needs --graph");
  utility::SweepConfig cfg;
  cfg.base = tf.Recipe();
  cfg.tasks = tasks;
  cfg.kinds = ParseKinds(kinds);
  const auto table = utility::PrivacyUtilitySweep(data, *cfg.base.graph, eps, cfg, seed);
  Emit(out, table.ToJson().dump(2) + "\n");
  if (!csv.empty()) io::WriteFile(csv, table.Csv());
  if (!svg_path.empty()) {
    std::vector<svg::LineSeries> series(2);
    series[0].name = "causal";
    series[1].name = "associational";
    for (const auto& p : table.points) {
      if (!std::isfinite(p.target_epsilon)) continue;
      series[p.mode == gen::Mode::kCausal ? 0 : 1].points.emplace_back(p.target_epsilon,
                                                                        p.mean_accuracy);
    }
    io::WriteFile(svg_path, svg::LineChart("Utility versus privacy", "epsilon", "accuracy", series));
  }
  return kExitOk;
}

int CmdPairplot(const std::string& data_path, const std::string& syn_path, size_t attributes,
                uint64_t seed, const std::string& out_dir) {
  const scg::Dataset data = io::LoadDataset(data_path);
  const scg::Dataset syn = io::LoadDataset(syn_path, data.schema);
  const auto pp = utility::PairplotExport(data, syn, attributes, seed);
  io::WriteFile((std::filesystem::path(out_dir) / "pairplot.csv").string(), pp.csv);
  io::WriteFile((std::filesystem::path(out_dir) / "pairplot.svg").string(), pp.svg);
  return kExitOk;
}

int CmdTheory(const std::string& graph_path, const theory::TrialConfig& cfg, size_t trials,
              double eta_bound, uint64_t seed, const std::string& csv, const std::string& out) {
  scg::CausalGraph graph = graph_path.empty() ? theory::MakeLabGraph(theory::LabGraph::kSpurious)
                                              : scg::GraphFromJson(io::ReadJson(graph_path));
  if (eta_bound > 0) {
    const int ti = graph.IndexOf(cfg.target);
    if (ti < 0) throw Error(ErrorCode::kInvalidArgument, "unknown target '" + cfg.target + "'");
    graph.variables[static_cast<size_t>(ti)].noise = scg::NoiseSpec::Uniform(-eta_bound, eta_bound);
  }
  const auto summary = theory::RunOrderingTrials(graph, cfg, trials, seed);
  json j = summary.ToJson();
  j["config"] = {{"n", cfg.n},
                 {"lambda", cfg.lambda},
                 {"loss", theory::LossName(cfg.loss)},
                 {"probes", cfg.probes},
                 {"laplace_scale", cfg.laplace_scale},
                 {"trials", trials}};
  if (!csv.empty()) io::WriteFile(csv, summary.Csv());
  Emit(out, j.dump(2) + "\n");
  std::cerr << "preconditions hold in " << summary.with_preconditions << "/" << trials
            << " trials; eps_c <= eps_a in " << summary.holds_with_preconditions << " of them\n";
  return kExitOk;
}

int CmdRun(const std::string& manifest_path, const std::string& out_root, bool dry_run,
           bool audit) {
  const auto m = pipeline::ExperimentManifest::FromJson(io::ReadJson(manifest_path));
  pipeline::RunOptions opts;
  opts.out_root = out_root;
  opts.dry_run = dry_run;
  opts.audit_seeds = audit;
  opts.base_dir = std::filesystem::path(manifest_path).parent_path().string();
  const auto result = pipeline::RunPipeline(m, opts);
  if (dry_run) {
    std::cout << result.report.dump(2) << "\n";
    return kExitOk;
  }
  std::cerr << "run directory: " << result.run_dir << "\n";
  if (result.partial) {
    for (const auto& f : result.report.at("failures")) {
      std::cerr << "stage " << f.at("stage").get<std::string>() << " failed: "
                << f.at("error").get<std::string>() << "\n";
    }
    return kExitStage;
  }
  return kExitOk;
}

int CmdReport(const std::string& report_path, const std::string& out_dir) {
  const auto rendered = pipeline::RenderReport(io::ReadJson(report_path));
  if (out_dir.empty()) {
    std::cout << rendered.markdown;
    return kExitOk;
  }
  const std::filesystem::path dir(out_dir);
  io::WriteFile((dir / "report.md").string(), rendered.markdown);
  io::WriteFile((dir / "figures/attack_deltas.svg").string(), rendered.attack_svg);
  if (!rendered.sweep_svg.empty()) {
    io::WriteFile((dir / "figures/sweep.svg").string(), rendered.sweep_svg);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal, differentially private synthetic data toolkit"};
  app.require_subcommand(1);
  uint64_t seed = 1;
  app.add_option("--seed", seed, "master seed")->capture_default_str();

  // gen-data
  auto* gen_cmd = app.add_subcommand("gen-data", "sample a dataset from a causal graph");
  size_t rows = 1000, variables = 22, continuous = 2;
  double missing = 0.0;
  std::string graph_in, graph_out, out;
  gen_cmd->add_option("--rows", rows);
  gen_cmd->add_option("--variables", variables);
  gen_cmd->add_option("--continuous", continuous);
  gen_cmd->add_option("--missing-rate", missing);
  gen_cmd->add_option("--graph", graph_in, "sample this graph instead of the synthetic SCG");
  gen_cmd->add_option("--graph-out", graph_out);
  gen_cmd->add_option("--out", out)->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a generative model");
  std::string data_path;
  TrainFlags train_flags;
  PrivacyFlags privacy_flags;
  train_cmd->add_option("--data", data_path)->required();
  train_flags.Register(train_cmd);
  privacy_flags.Register(train_cmd);
  train_cmd->add_option("--out", out)->required();

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "sample rows from a trained model");
  std::string model_path;
  size_t n_rows = 1000;
  sample_cmd->add_option("--model", model_path)->required();
  sample_cmd->add_option("--n", n_rows);
  sample_cmd->add_option("--out", out);

  // accountant
  auto* acc_cmd = app.add_subcommand("accountant", "RDP ledger for the subsampled Gaussian");
  double q = 0.1, sigma = 1.0, delta = 1e-3, target = 0.0, clip = 1.0;
  uint64_t steps = 500;
  acc_cmd->add_option("--q", q);
  acc_cmd->add_option("--sigma", sigma);
  acc_cmd->add_option("--steps", steps);
  acc_cmd->add_option("--delta", delta);
  acc_cmd->add_option("--clip", clip);
  acc_cmd->add_option("--target-epsilon", target, "calibrate sigma to this epsilon");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "membership inference against a generator");
  std::string generator = "neural";
  attack::AttackConfig attack_cfg;
  std::vector<std::string> extractor_names, kind_names;
  attack_cmd->add_option("--data", data_path)->required();
  attack_cmd->add_option("--generator", generator, "neural, memorizer or oblivious");
  train_flags.Register(attack_cmd);
  privacy_flags.Register(attack_cmd);
  attack_cmd->add_option("--n-targets", attack_cfg.n_targets);
  attack_cmd->add_option("--reps", attack_cfg.reps);
  attack_cmd->add_option("--train-size", attack_cfg.train_size, "0 means |D|");
  attack_cmd->add_option("--n-samples", attack_cfg.n_samples);
  attack_cmd->add_option("--sample-size", attack_cfg.sample_size);
  attack_cmd->add_option("--targets", attack_cfg.targets)->delimiter(',');
  attack_cmd->add_option("--extractors", extractor_names)->delimiter(',');
  attack_cmd->add_option("--classifiers", kind_names)->delimiter(',');
  attack_cmd->add_option("--out", out);

  // attack-diff
  auto* diff_cmd = app.add_subcommand("attack-diff", "per-cell accuracy deltas of two reports");
  std::string report_a, report_b, svg_path;
  diff_cmd->add_option("--a", report_a)->required();
  diff_cmd->add_option("--b", report_b)->required();
  diff_cmd->add_option("--out", out);
  diff_cmd->add_option("--svg", svg_path);

  // utility
  auto* util_cmd = app.add_subcommand("utility", "downstream utility of synthetic data");
  std::string syn_path;
  size_t tasks = 20;
  util_cmd->add_option("--data", data_path)->required();
  util_cmd->add_option("--synthetic", syn_path)->required();
  util_cmd->add_option("--tasks", tasks);
  util_cmd->add_option("--classifiers", kind_names)->delimiter(',');
  util_cmd->add_option("--out", out);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "utility across privacy budgets");
  std::vector<double> epsilons = {1.0, 3.9, 10.0};
  std::string csv_path;
  sweep_cmd->add_option("--data", data_path)->required();
  train_flags.Register(sweep_cmd);
  sweep_cmd->add_option("--epsilons", epsilons)->delimiter(',');
  sweep_cmd->add_option("--tasks", tasks);
  sweep_cmd->add_option("--classifiers", kind_names)->delimiter(',');
  sweep_cmd->add_option("--out", out);
  sweep_cmd->add_option("--csv", csv_path);
  sweep_cmd->add_option("--svg", svg_path);

  // pairplot
  auto* pair_cmd = app.add_subcommand("pairplot", "scatter-matrix export");
  size_t attributes = 5;
  std::string out_dir;
  pair_cmd->add_option("--data", data_path)->required();
  pair_cmd->add_option("--synthetic", syn_path)->required();
  pair_cmd->add_option("--attributes", attributes);
  pair_cmd->add_option("--out-dir", out_dir)->required();

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "convex sensitivity lab trials");
  std::string graph_path, loss_name = "squared";
  theory::TrialConfig tcfg;
  size_t trials = 100;
  double eta_bound = 0.0;
  theory_cmd->add_option("--graph", graph_path, "bounded linear graph (default: spurious lab graph)");
  theory_cmd->add_option("--target", tcfg.target);
  theory_cmd->add_option("--n", tcfg.n);
  theory_cmd->add_option("--trials", trials);
  theory_cmd->add_option("--loss", loss_name, "squared or logistic");
  theory_cmd->add_option("--lambda", tcfg.lambda);
  theory_cmd->add_option("--eta-bound", eta_bound, "replace the target noise by U[-b, b]");
  theory_cmd->add_option("--probes", tcfg.probes);
  theory_cmd->add_option("--laplace-scale", tcfg.laplace_scale);
  theory_cmd->add_option("--csv", csv_path);
  theory_cmd->add_option("--out", out);

  // run
  auto* run_cmd = app.add_subcommand("run", "full pipeline from a manifest");
  std::string manifest_path, out_root = "runs";
  bool dry_run = false, audit = false;
  run_cmd->add_option("--manifest", manifest_path)->required();
  run_cmd->add_option("--out-root", out_root);
  run_cmd->add_flag("--dry-run", dry_run);
  run_cmd->add_flag("--audit-seeds", audit);

  // report
  auto* report_cmd = app.add_subcommand("report", "render a report JSON");
  std::string report_path;
  report_cmd->add_option("--report", report_path)->required();
  report_cmd->add_option("--out-dir", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen_cmd) return CmdGenData(seed, rows, variables, continuous, missing, graph_in, graph_out, out);
    if (*train_cmd) return CmdTrain(data_path, train_flags, privacy_flags, seed, out);
    if (*sample_cmd) return CmdSample(model_path, n_rows, seed, out);
    if (*acc_cmd) return CmdAccountant(q, sigma, steps, delta, target, clip);
    if (*attack_cmd) {
      return CmdAttack(data_path, generator, train_flags, privacy_flags, attack_cfg,
                       extractor_names, kind_names, seed, out);
    }
    if (*diff_cmd) return CmdAttackDiff(report_a, report_b, out, svg_path);
    if (*util_cmd) return CmdUtility(data_path, syn_path, tasks, kind_names, seed, out);
    if (*sweep_cmd) {
      return CmdSweep(data_path, train_flags, epsilons, tasks, kind_names, seed, out, csv_path,
                      svg_path);
    }
    if (*pair_cmd) return CmdPairplot(data_path, syn_path, attributes, seed, out_dir);
    if (*theory_cmd) {
      tcfg.loss = theory::ParseLoss(loss_name);
      return CmdTheory(graph_path, tcfg, trials, eta_bound, seed, csv_path, out);
    }
    if (*run_cmd) return CmdRun(manifest_path, out_root, dry_run, audit);
    if (*report_cmd) return CmdReport(report_path, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kStageFailure ? kExitStage : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
