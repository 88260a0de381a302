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

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "cds/io.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace cds::pipeline {
namespace {

namespace fs = std::filesystem;

ExperimentManifest Tiny() {
  ExperimentManifest m;
  m.run_id = "tiny";
  m.seed = 7;
  m.synthetic_rows = 60;
  m.synthetic.variables = 6;
  m.synthetic.continuous = 1;
  m.model.latent_dim = 2;
  m.model.model.hidden = 4;
  m.model.train.epochs = 2;
  m.model.train.batch_size = 20;
  m.model.train.lr = 0.01;
  m.attack.n_targets = 1;
  m.attack.reps = 2;
  m.attack.n_samples = 4;
  m.attack.sample_size = 10;
  m.extractors = {attack::ExtractorKind::kNaive};
  m.attack_classifiers = {clf::Kind::kLogistic};
  m.utility_tasks = 2;
  m.utility_classifiers = {clf::Kind::kLogistic};
  m.workers = 1;
  return m;
}

TEST(ManifestTest, JsonRoundTripAndHash) {
  ExperimentManifest m = Tiny();
  m.sweep_epsilons = {1.0, INFINITY};
  const ExperimentManifest back = ExperimentManifest::FromJson(m.ToJson());
  EXPECT_EQ(back.ToJson().dump(), m.ToJson().dump());
  EXPECT_EQ(back.Hash(), m.Hash());
  back.Validate();
  ExperimentManifest w = m;
  w.workers = 3;
  EXPECT_EQ(w.Hash(), m.Hash());
  w.seed = 8;
  EXPECT_NE(w.Hash(), m.Hash());
  // Missing keys take defaults.
  EXPECT_EQ(ExperimentManifest::FromJson(nlohmann::json::object()).ToJson().dump(),
            ExperimentManifest{}.ToJson().dump());
}

TEST(ManifestTest, RejectsUnknownVersionAndBadValues) {
  nlohmann::json j = Tiny().ToJson();
  j["manifest_version"] = 99;
  EXPECT_THROW(ExperimentManifest::FromJson(j), Error);
  ExperimentManifest m = Tiny();
  m.run_id = "../escape";
  EXPECT_THROW(m.Validate(), Error);
  m = Tiny();
  m.dataset_path = "data.csv";
  EXPECT_THROW(m.Validate(), Error);
  m = Tiny();
  m.sweep_epsilons = {0.0};
  EXPECT_THROW(m.Validate(), Error);
}

TEST(PipelineTest, DryRunPlansWithoutWriting) {
  const testing::TempDir dir("dry");
  RunOptions opts;
  opts.out_root = dir.str();
  opts.dry_run = true;
  const RunResult r = RunPipeline(Tiny(), opts);
  EXPECT_TRUE(r.run_dir.empty());
  EXPECT_TRUE(fs::is_empty(dir.str()));
  const auto stages = r.report.at("stages").get<std::vector<std::string>>();
  EXPECT_EQ(stages.front(), "data");
  EXPECT_EQ(stages.back(), "report");
  EXPECT_EQ(std::count(stages.begin(), stages.end(), "utility"), 1);
}

TEST(ReportTest, DisabledAttackRowAndVersionCheck) {
  const std::vector<std::string> rows = AttackTable(nullptr);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(rows[2].find("disabled"), std::string::npos);
  EXPECT_THROW(RenderReport({{"report_version", 2}}), Error);
  EXPECT_NO_THROW(RenderReport({{"report_version", kReportVersion}}));
}

TEST(PipelineTest, RunIsDeterministicAndAppendOnly) {
  const testing::TempDir a("run_a"), b("run_b");
  RunOptions opts;
  opts.out_root = a.str();
  opts.audit_seeds = true;
  const RunResult ra = RunPipeline(Tiny(), opts);
  EXPECT_FALSE(ra.partial) << ra.report.at("failures").dump();
  EXPECT_EQ(ra.report.at("status"), "complete");
  for (const char* f : {"report.json", "report.md", "manifest.json", "data/original.csv",
                        "synthetic/causal-dp.csv", "attack/associational-nodp.json",
                        "figures/attack_deltas.svg"}) {
    EXPECT_TRUE(fs::exists(fs::path(ra.run_dir) / f)) << f;
  }
  EXPECT_EQ(ra.report.at("ledger").size(), 4u);
  EXPECT_EQ(ra.report.at("attack").at("deltas").size(), 4u);

  opts.out_root = b.str();
  const RunResult rb = RunPipeline(Tiny(), opts);
  EXPECT_EQ(io::ReadFile(ra.run_dir + "/report.json"), io::ReadFile(rb.run_dir + "/report.json"));
  EXPECT_EQ(io::ReadFile(ra.run_dir + "/report.md"), io::ReadFile(rb.run_dir + "/report.md"));

  try {
    RunPipeline(Tiny(), opts);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(PipelineTest, StageFailureYieldsPartialReport) {
  const testing::TempDir dir("partial");
  ExperimentManifest m = Tiny();
  m.utility_tasks = 50;  // more targets than discrete columns
  m.attack_enabled = false;
  RunOptions opts;
  opts.out_root = dir.str();
  const RunResult r = RunPipeline(m, opts);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r.report.at("status"), "partial");
  ASSERT_EQ(r.report.at("failures").size(), 1u);
  EXPECT_EQ(r.report.at("failures")[0].at("stage"), "utility");
  EXPECT_TRUE(fs::exists(r.run_dir + "/report.md"));
  EXPECT_NE(io::ReadFile(r.run_dir + "/report.md").find("disabled"), std::string::npos);
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(CDS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  const testing::TempDir dir("cli");
  EXPECT_EQ(RunCli("accountant --q 0.1 --sigma 1 --steps 10"), 0);
  EXPECT_EQ(RunCli("no-such-command"), 2);
  EXPECT_EQ(RunCli("accountant --q 0.1 --sigma -1"), 2);
  EXPECT_EQ(RunCli("run --manifest " + (dir / "missing.json")), 2);

  ExperimentManifest m = Tiny();
  m.utility_tasks = 50;
  m.attack_enabled = false;
  io::WriteJson(dir / "m.json", m.ToJson());
  EXPECT_EQ(RunCli("run --manifest " + (dir / "m.json") + " --dry-run"), 0);
  EXPECT_EQ(RunCli("run --manifest " + (dir / "m.json") + " --out-root " + (dir / "runs")), 3);
  EXPECT_EQ(RunCli("run --manifest " + (dir / "m.json") + " --out-root " + (dir / "runs")), 2);
  EXPECT_EQ(RunCli("report --report " + (dir / "runs/tiny/report.json") + " --out-dir " +
                   (dir / "rendered")),
            0);
  EXPECT_TRUE(fs::exists(dir / "rendered/report.md"));
}

}  // namespace
}  // namespace cds::pipeline
