/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/audit.hpp"
#include "dtsnl/config.hpp"
#include "dtsnl/synth.hpp"
#include "dtsnl/trainer.hpp"
#include "support.hpp"

using namespace dtsnl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) { return io::read_text(p); }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DTSNL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, ParsesSectionsAndLiterals) {
  auto f = ConfigFile::parse_string(R"(
# comment
[train]
epochs = 12       # trailing comment
learning_rate = 1e-3
eval_model = "teacher"
[model]
channels = [8, 16]
[dta]
enabled = false
)");
  auto c = RunConfig::resolve(f);
  EXPECT_EQ(c.epochs, 12);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.eval_model, "teacher");
  EXPECT_EQ(c.model.channels, (std::vector<int>{8, 16}));
  EXPECT_FALSE(c.dta.enabled);
}

TEST(Config, ReportsEveryProblemAtOnce) {
  auto f = ConfigFile::parse_string("[train]\nepochs = 0\nbogus = 1\n[loss]\nlambda1 = \"x\"\n[dta]\nmu = 2.0\n");
  try {
    RunConfig::resolve(f);
    FAIL() << "expected a throw";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("train.epochs"), std::string::npos);
    EXPECT_NE(msg.find("train.bogus"), std::string::npos);
    EXPECT_NE(msg.find("loss.lambda1"), std::string::npos);
    EXPECT_NE(msg.find("dta.mu"), std::string::npos);
    EXPECT_NE(msg.find("4 configuration error"), std::string::npos) << msg;
  }
}

TEST(Config, OverridesOfDistinctKeysCommute) {
  const std::vector<std::string> sets = {"loss.lambda1=0", "train.epochs=3", "snl.delta=0.1", "strong.op_subset=Identity,Rotate"};
  ConfigFile a, b;
  for (const auto& s : sets) a.set(s);
  for (auto it = sets.rbegin(); it != sets.rend(); ++it) b.set(*it);
  EXPECT_EQ(RunConfig::resolve(a).snapshot(), RunConfig::resolve(b).snapshot());
  EXPECT_EQ(RunConfig::resolve(a).strong_op_subset, (std::vector<std::string>{"Identity", "Rotate"}));
}

TEST(Config, SnapshotRoundTrips) {
  ConfigFile f;
  f.set("train.seed=42");
  f.set("attention.drop_p=0.3");
  auto c = RunConfig::resolve(f);
  auto back = RunConfig::resolve(ConfigFile::parse_string(c.snapshot()));
  EXPECT_EQ(back.snapshot(), c.snapshot());
  EXPECT_EQ(back.seed, 42u);
}

TEST(Config, CommittedBaseConfigHoldsTheDefaults) {
  auto base = RunConfig::resolve(ConfigFile::load(fs::path(DTSNL_SOURCE_DIR) / "configs" / "base.toml"));
  RunConfig defaults;
  defaults.manifest = base.manifest;
  EXPECT_EQ(base.snapshot(), defaults.snapshot());
  EXPECT_EQ(base.batch_size, 128);
  EXPECT_DOUBLE_EQ(base.learning_rate, 0.0005);
  EXPECT_EQ(base.epochs, 30);
  EXPECT_DOUBLE_EQ(base.loss.lambda1, 0.5);
  EXPECT_DOUBLE_EQ(base.loss.lambda2, 0.1);
  EXPECT_DOUBLE_EQ(base.dta.tau_init, 0.8);
  EXPECT_DOUBLE_EQ(base.dta.mu, 0.9);
  EXPECT_DOUBLE_EQ(base.dta.ema_decay, 0.999);
  EXPECT_DOUBLE_EQ(base.snl.delta, 0.05);
  EXPECT_EQ(base.model.attention.num_branches, 6);
  EXPECT_EQ(base.model.attention.reduction, 16);
  EXPECT_DOUBLE_EQ(base.model.attention.drop_p, 0.5);
  EXPECT_EQ(base.strong_n_ops, 3);
  EXPECT_EQ(base.strong_magnitude, 5);
  EXPECT_EQ(base.augment.working_size, 64);
  EXPECT_EQ(base.augment.crop_size, 56);
}

// ---------------------------------------------------------------- synth

TEST(Synth, LabelBudgetPresetMatchesTable) {
  SynthSpec s;
  EXPECT_EQ(s.labeled, (std::vector<int>{15, 15, 15, 10, 15, 15, 15}));
  EXPECT_EQ(label_budget_preset(4000), (std::vector<int>{625, 625, 625, 250, 625, 625, 625}));
  EXPECT_THROW(label_budget_preset(123), InvalidArgument);
}

TEST(Synth, WritesExactSplitsAndIsByteDeterministic) {
  dtsnl::testing::TempDir dir("synth");
  SynthSpec s;
  s.image_size = 12;
  s.unlabeled = std::vector<int>(7, 3);
  s.eval = std::vector<int>(7, 5);
  synth_gen(s, dir.path() / "a");
  synth_gen(s, dir.path() / "b");
  auto m = DatasetManifest::load_file(dir.path() / "a" / "manifest.jsonl");
  EXPECT_EQ(m.count(Split::kLabeled), 100u);
  EXPECT_EQ(m.count(Split::kUnlabeled), 21u);
  EXPECT_EQ(m.count(Split::kEval), 35u);
  std::vector<int> per_class(7);
  for (const auto& r : m.records())
    if (r.split == Split::kLabeled) ++per_class[static_cast<size_t>(*r.label)];
  EXPECT_EQ(per_class, s.labeled);
  EXPECT_EQ(slurp(dir.path() / "a" / "manifest.jsonl"), slurp(dir.path() / "b" / "manifest.jsonl"));
  for (const auto& r : m.records()) ASSERT_EQ(slurp(dir.path() / "a" / r.path), slurp(dir.path() / "b" / r.path));
  // disk and memory agree
  Dataset mem = synth_dataset(s);
  Dataset disk = Dataset::load(m);
  ASSERT_EQ(mem.eval.size(), disk.eval.size());
  for (size_t i = 0; i < mem.eval.size(); ++i) {
    ASSERT_EQ(mem.eval[i].sample_id, disk.eval[i].sample_id);
    ASSERT_EQ(mem.eval[i].pixels.data(), disk.eval[i].pixels.data());
  }
}

TEST(Synth, RejectsBadSpecsAndUnwritableOutput) {
  SynthSpec s;
  s.labeled[2] = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  SynthSpec ok;
  ok.image_size = 8;
  ok.unlabeled.assign(7, 0);
  ok.eval.assign(7, 1);
  EXPECT_THROW(synth_gen(ok, "/proc/dtsnl-cannot-write-here"), IoError);
}

TEST(Synth, BalancedEvalGivesConstantPredictorOneSeventh) {
  SynthSpec s;
  s.image_size = 8;
  s.unlabeled.assign(7, 0);
  Dataset d = synth_dataset(s);
  std::vector<ClassIndex> truth, constant;
  for (const auto& e : d.eval) truth.push_back(*e.label), constant.push_back(0);
  EXPECT_NEAR(classification_metrics(truth, constant, 7).accuracy, 1.0 / 7.0, 1e-12);
}

TEST(Synth, ResolvesSynthKeys) {
  auto f = ConfigFile::parse_string("[synth]\nimage_size = 20\nlabeled = \"budget:400\"\nunlabeled = 9\nseed = 3\n");
  auto s = SynthSpec::resolve(f);
  EXPECT_EQ(s.image_size, 20);
  EXPECT_EQ(s.labeled[3], 40);
  EXPECT_EQ(s.unlabeled, std::vector<int>(7, 9));
  EXPECT_EQ(s.seed, 3u);
  EXPECT_THROW(SynthSpec::resolve(ConfigFile::parse_string("[synth]\nwhat = 1\n")), ConfigError);
}

// A raw-pixel linear probe must not solve the task perfectly.
TEST(Synth, LinearProbeOnRawPixelsIsImperfect) {
  SynthSpec s;
  s.image_size = 16;
  s.labeled = std::vector<int>(7, 100);
  s.unlabeled.assign(7, 0);
  s.eval = std::vector<int>(7, 100);
  Dataset d = synth_dataset(s);
  const int D = 3 * 16 * 16 + 1, C = 7;
  std::vector<double> W(static_cast<size_t>(C * D), 0.0);
  auto feats = [&](const ImageSample& x) {
    std::vector<double> f(x.pixels.data().begin(), x.pixels.data().end());
    f.push_back(1.0);
    return f;
  };
  std::vector<std::vector<double>> X;
  for (const auto& x : d.labeled) X.push_back(feats(x));
  for (int it = 0; it < 300; ++it) {
    std::vector<double> G(W.size(), 0.0);
    for (size_t i = 0; i < X.size(); ++i) {
      std::vector<double> z(C);
      for (int c = 0; c < C; ++c)
        for (int k = 0; k < D; ++k) z[static_cast<size_t>(c)] += W[static_cast<size_t>(c * D + k)] * X[i][static_cast<size_t>(k)];
      auto p = make_probability_vector(z);
      for (int c = 0; c < C; ++c) {
        const double g = p[c] - (c == *d.labeled[i].label ? 1.0 : 0.0);
        for (int k = 0; k < D; ++k) G[static_cast<size_t>(c * D + k)] += g * X[i][static_cast<size_t>(k)];
      }
    }
    for (size_t k = 0; k < W.size(); ++k) W[k] -= 0.5 * G[k] / static_cast<double>(X.size());
  }
  int correct = 0;
  for (const auto& x : d.eval) {
    auto f = feats(x);
    std::vector<double> z(C);
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < D; ++k) z[static_cast<size_t>(c)] += W[static_cast<size_t>(c * D + k)] * f[static_cast<size_t>(k)];
    correct += argmax_class(make_probability_vector(z)) == *x.label;
  }
  const double acc = static_cast<double>(correct) / d.eval.size();
  EXPECT_LT(acc, 1.0);
  RecordProperty("linear_probe_accuracy", std::to_string(acc));
}

// ---------------------------------------------------------------- audit

TEST(Audit, ConstantTraceConvergesGeometrically) {
  const double mu = 0.9, conf = 0.95, tau0 = 0.8;
  std::vector<TraceRecord> trace;
  for (int e = 1; e <= 20; ++e)
    for (int c = 0; c < 3; ++c) {
      std::vector<double> p(3, (1 - conf) / 2);
      p[static_cast<size_t>(c)] = conf;
      trace.push_back({e, e, TraceRecord::Kind::kTeacher, "l" + std::to_string(c), c, p});
    }
  DtaConfig dta;
  dta.mu = mu;
  auto report = run_audit(trace, 3, dta, SnlConfig{});
  ASSERT_EQ(report.epochs.size(), 20u);
  for (size_t t = 0; t < 20; ++t)
    for (double tau : report.epochs[t].thresholds)
      EXPECT_NEAR(tau, conf + (tau0 - conf) * std::pow(mu, static_cast<double>(t + 1)), 1e-12);
}

TEST(Audit, ClosedGateGrowsLibraryOnlyBelowDelta) {
  std::vector<TraceRecord> trace;
  trace.push_back({1, 1, TraceRecord::Kind::kUnlabeled, "u0", std::nullopt, {0.5, 0.3, 0.2}});
  trace.push_back({1, 1, TraceRecord::Kind::kUnlabeled, "u1", std::nullopt, {0.6, 0.37, 0.03}});
  trace.push_back({1, 2, TraceRecord::Kind::kUnlabeled, "u2", std::nullopt, {0.01, 0.7, 0.29}});
  auto report = run_audit(trace, 3, DtaConfig{}, SnlConfig{});
  ASSERT_EQ(report.epochs.size(), 1u);
  EXPECT_EQ(report.epochs[0].accepted_per_class, (std::vector<int64_t>{0, 0, 0}));
  EXPECT_EQ(report.epochs[0].rejected, 3);
  EXPECT_EQ(report.epochs[0].library_total, 2);
  auto last = nlohmann::json::parse(report.records.lines().back());
  EXPECT_EQ(last["acceptance_rate"], nlohmann::json::array({0.0, 0.0, 0.0}));
  auto first = nlohmann::json::parse(report.records.lines().front());
  EXPECT_EQ(first["gate"]["rejected"].get<int>(), 2);
}

TEST(Audit, RejectsOutOfOrderEpochs) {
  std::vector<TraceRecord> trace;
  trace.push_back({2, 1, TraceRecord::Kind::kUnlabeled, "u0", std::nullopt, {0.5, 0.5}});
  trace.push_back({1, 2, TraceRecord::Kind::kUnlabeled, "u0", std::nullopt, {0.5, 0.5}});
  EXPECT_THROW(run_audit(trace, 2, DtaConfig{}, SnlConfig{}), InvalidArgument);
}

TEST(Audit, ReplayOfRecordedRunReproducesGateLog) {
  SynthSpec s;
  s.image_size = 16;
  s.labeled.assign(7, 4);
  s.unlabeled.assign(7, 6);
  s.eval.assign(7, 4);
  RunConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.augment = {16, 14, 0.5, false, 0.0f};
  cfg.model.channels = {4, 8};
  cfg.dta.tau_init = 0.2;
  cfg.trace = true;
  Trainer t(cfg, synth_dataset(s));
  t.run();
  std::istringstream in([&] {
    std::string all;
    for (const auto& l : t.trace().lines()) all += l + "\n";
    return all;
  }());
  auto report = run_audit(read_trace(in), 7, cfg.dta, cfg.snl);
  std::vector<std::string> trainer_gates, audit_gates;
  for (const auto* lines : {&t.metrics().lines(), &report.records.lines()})
    for (const auto& l : *lines) {
      auto j = nlohmann::ordered_json::parse(l);
      (lines == &t.metrics().lines() ? trainer_gates : audit_gates)
          .push_back(j["type"].get<std::string>() + " " + j["gate"].dump());
    }
  EXPECT_EQ(trainer_gates, audit_gates);
}

// ---------------------------------------------------------------- command line

TEST(Cli, EndToEnd) {
  dtsnl::testing::TempDir dir("cli");
  const fs::path root = dir.path();
  const std::string data = (root / "data").string();
  ASSERT_EQ(run_cli("synth-gen --out " + data +
                        " --set synth.image_size=16 --set synth.labeled=3 --set synth.unlabeled=4 --set synth.eval=5",
                    root / "synth.log"),
            0)
      << slurp(root / "synth.log");
  const std::string common = "--config " + (fs::path(DTSNL_SOURCE_DIR) / "configs" / "base.toml").string() +
                             " --set data.manifest=" + data + "/manifest.jsonl" +
                             " --set data.working_size=16 --set data.crop_size=14 --set model.channels=[4,8]" +
                             " --set train.epochs=2 --set train.batch_size=8 --set train.trace=true";
  ASSERT_EQ(run_cli("train " + common + " --seed 7 --out " + (root / "run1").string(), root / "t1.log"), 0)
      << slurp(root / "t1.log");
  ASSERT_EQ(run_cli("train " + common + " --seed 7 --out " + (root / "run2").string(), root / "t2.log"), 0);
  EXPECT_EQ(slurp(root / "run1" / "metrics.jsonl"), slurp(root / "run2" / "metrics.jsonl"));
  EXPECT_FALSE(fs::exists(root / "run1" / ".lock"));
  EXPECT_TRUE(fs::exists(root / "run1" / "checkpoints" / "epoch-2" / "state.json"));

  // supervised ablation runs through the same command
  ASSERT_EQ(run_cli("train " + common + " --set loss.lambda1=0 --set loss.lambda2=0 --out " + (root / "sup").string(),
                    root / "sup.log"),
            0);

  // best checkpoint evaluation reproduces the logged number
  auto best = nlohmann::json::parse(slurp(root / "run1" / "best"));
  ASSERT_EQ(run_cli("eval --checkpoint " + (root / "run1" / best["checkpoint"].get<std::string>()).string() +
                        " --out " + (root / "eval.json").string(),
                    root / "eval.log"),
            0)
      << slurp(root / "eval.log");
  auto ev = nlohmann::json::parse(slurp(root / "eval.json"));
  EXPECT_EQ(ev["eval_accuracy"].get<double>(), best["eval_accuracy"].get<double>());

  // audit replays the trace into the same gate records
  ASSERT_EQ(run_cli("audit --config " + (root / "run1" / "config.snapshot").string() + " --trace " +
                        (root / "run1" / "trace.jsonl").string() + " --out " + (root / "audit.jsonl").string(),
                    root / "audit.log"),
            0)
      << slurp(root / "audit.log");
  std::vector<std::string> a, b;
  std::istringstream ma(slurp(root / "run1" / "metrics.jsonl")), mb(slurp(root / "audit.jsonl"));
  for (std::string l; std::getline(ma, l);) {
    auto j = nlohmann::ordered_json::parse(l);
    a.push_back(j["gate"].dump());
  }
  for (std::string l; std::getline(mb, l);) {
    auto j = nlohmann::ordered_json::parse(l);
    b.push_back(j["gate"].dump());
  }
  EXPECT_EQ(a, b);
}

TEST(Cli, RejectsMissingUnlabeledSplitAndBadKeys) {
  dtsnl::testing::TempDir dir("cli-bad");
  const fs::path root = dir.path();
  const std::string data = (root / "data").string();
  ASSERT_EQ(run_cli("synth-gen --out " + data +
                        " --set synth.image_size=16 --set synth.labeled=2 --set synth.unlabeled=0 --set synth.eval=2",
                    root / "s.log"),
            0);
  const std::string common = " --set data.manifest=" + data + "/manifest.jsonl --set data.working_size=16 --set data.crop_size=14";
  EXPECT_EQ(run_cli("train" + common + " --out " + (root / "r").string(), root / "r.log"), 2);
  EXPECT_NE(slurp(root / "r.log").find("lambda1"), std::string::npos) << slurp(root / "r.log");
  EXPECT_EQ(run_cli("train" + common + " --set nope.key=1 --set train.epochs=-1 --out " + (root / "r2").string(),
                    root / "r2.log"),
            2);
  EXPECT_NE(slurp(root / "r2.log").find("nope.key"), std::string::npos);
  EXPECT_NE(slurp(root / "r2.log").find("train.epochs"), std::string::npos);
}

TEST(Cli, EvalRejectsClassCountMismatch) {
  dtsnl::testing::TempDir dir("cli-mismatch");
  const fs::path root = dir.path();
  ASSERT_EQ(run_cli("synth-gen --out " + (root / "d7").string() +
                        " --set synth.image_size=16 --set synth.labeled=2 --set synth.unlabeled=2 --set synth.eval=2",
                    root / "a.log"),
            0);
  ASSERT_EQ(run_cli("synth-gen --out " + (root / "d5").string() +
                        " --set synth.num_classes=5 --set synth.image_size=16 --set synth.labeled=2 --set synth.unlabeled=2 --set synth.eval=2",
                    root / "b.log"),
            0)
      << slurp(root / "b.log");
  ASSERT_EQ(run_cli("train --set data.manifest=" + (root / "d7" / "manifest.jsonl").string() +
                        " --set data.working_size=16 --set data.crop_size=14 --set train.epochs=1 --set train.batch_size=4 --out " +
                        (root / "run").string(),
                    root / "c.log"),
            0)
      << slurp(root / "c.log");
  EXPECT_EQ(run_cli("eval --checkpoint " + (root / "run" / "checkpoints" / "epoch-1").string() +
                        " --set data.manifest=" + (root / "d5" / "manifest.jsonl").string() + " --config " +
                        (root / "run" / "config.snapshot").string(),
                    root / "d.log"),
            1);
  EXPECT_NE(slurp(root / "d.log").find("classes"), std::string::npos) << slurp(root / "d.log");
}
