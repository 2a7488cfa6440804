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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtsnl/dtsnl.hpp"

namespace fs = std::filesystem;
using namespace dtsnl;

namespace {

// Shared flags. `--seed` is applied after the file and overrides.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config, "configuration file (section.key = value)");
  cmd->add_option("--set", f.sets, "override, key=value (repeatable)")->allow_extra_args(false);
  cmd->add_option("--seed", f.seed, "random seed");
  auto* out = cmd->add_option("--out", f.out, "output location");
  if (out_required) out->required();
}

// One file may hold both a [synth] section and training sections; each
// command keeps only its own keys.
ConfigFile load_config(const CommonFlags& f, const std::string& seed_key) {
  ConfigFile file = f.config.empty() ? ConfigFile{} : ConfigFile::load(f.config);
  for (const auto& s : f.sets) file.set(s);
  if (f.seed) file.set(seed_key, nlohmann::json(static_cast<int64_t>(*f.seed)));
  auto [synth, rest] = file.split("synth");
  return seed_key.rfind("synth.", 0) == 0 ? synth : rest;
}

int cmd_synth(const CommonFlags& f) {
  SynthSpec spec = SynthSpec::resolve(load_config(f, "synth.seed"));
  DatasetManifest m = synth_gen(spec, f.out);
  std::cout << "wrote " << m.records().size() << " images to " << f.out << " (labeled "
            << m.count(Split::kLabeled) << ", unlabeled " << m.count(Split::kUnlabeled) << ", eval "
            << m.count(Split::kEval) << ")\n";
  return 0;
}

void print_epoch(const EpochMetrics& em) {
  std::cout << "epoch " << em.epoch << "  loss " << em.mean_total_loss << "  accepted ";
  int64_t acc = 0;
  for (auto a : em.gate.accepted_per_class) acc += a;
  std::cout << acc << "  rejected " << em.gate.rejected << "  library " << em.gate.library_total;
  if (em.eval) std::cout << "  eval_acc " << em.eval->accuracy << "  macro_f1 " << em.eval->macro_f1;
  std::cout << std::endl;
}

int cmd_train(const CommonFlags& f, const std::string& resume) {
  RunConfig cfg = RunConfig::resolve(load_config(f, "train.seed"));
  if (cfg.manifest.empty()) throw ConfigError("1 configuration error(s):\n  'data.manifest' is required");
  DatasetManifest manifest = DatasetManifest::load_file(cfg.manifest);
  manifest.check_paths();
  Dataset data = Dataset::load(manifest);
  validate_run(cfg, data);
  Trainer trainer(cfg, std::move(data), f.out);
  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    std::cout << "resumed from " << resume << " at epoch " << trainer.state().epoch << std::endl;
  }
  while (trainer.state().epoch < cfg.epochs) print_epoch(trainer.train_epoch());
  if (trainer.state().best_accuracy >= 0)
    std::cout << "best eval accuracy " << trainer.state().best_accuracy << " at epoch " << trainer.state().best_epoch
              << std::endl;
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, const std::string& model) {
  const fs::path ckpt(checkpoint);
  CommonFlags g = f;
  if (g.config.empty()) g.config = (ckpt / "config.snapshot").string();
  RunConfig cfg = RunConfig::resolve(load_config(g, "train.seed"));
  DatasetManifest manifest = DatasetManifest::load_file(cfg.manifest);
  Dataset data = Dataset::load(manifest);
  if (data.eval.empty()) throw InvalidArgument("manifest " + cfg.manifest + " has no eval split");
  nlohmann::json state = io::read_json(ckpt / "state.json");
  const int ckpt_classes = state.at("num_classes").get<int>();
  if (ckpt_classes != data.label_space.num_classes())
    throw InvalidArgument("checkpoint has " + std::to_string(ckpt_classes) + " classes but the manifest has " +
                          std::to_string(data.label_space.num_classes()));
  RunConfig resolved = cfg;
  Network<float> net(Trainer::model_config(resolved, data));
  const std::string which = model.empty() ? cfg.eval_model : model;
  if (which != "student" && which != "teacher") throw InvalidArgument("--model must be student or teacher");
  std::vector<float> params = io::read_floats(ckpt / (which + ".bin"));
  if (params.size() != net.param_count())
    throw InvalidArgument("checkpoint holds " + std::to_string(params.size()) + " parameters, configured model needs " +
                          std::to_string(net.param_count()));
  Normalizer norm;
  norm.enabled = cfg.normalize;
  ClassificationMetrics m = Trainer::evaluate_split(net, params, data.eval, cfg.augment, norm, data.label_space.num_classes());
  nlohmann::ordered_json j;
  j["checkpoint"] = ckpt.string();
  j["model"] = which;
  j["epoch"] = state.at("epoch");
  j["eval_accuracy"] = m.accuracy;
  j["eval_macro_f1"] = m.macro_f1;
  j["total"] = m.total;
  if (!f.out.empty()) io::write_text(f.out, j.dump() + "\n");
  std::cout << j.dump() << std::endl;
  return 0;
}

int cmd_audit(const CommonFlags& f, const std::string& trace_path) {
  RunConfig cfg = RunConfig::resolve(load_config(f, "train.seed"));
  std::ifstream in(trace_path);
  if (!in) throw IoError("cannot open trace " + trace_path);
  auto trace = read_trace(in);
  if (trace.empty()) throw InvalidArgument("trace " + trace_path + " is empty");
  const int C = static_cast<int>(trace.front().probs.size());
  if (!f.out.empty()) std::ofstream(f.out, std::ios::trunc);
  AuditReport report = run_audit(trace, C, cfg.dta, cfg.snl, f.out.empty() ? io::JsonLines{} : io::JsonLines(f.out));
  if (f.out.empty())
    for (const auto& line : report.records.lines()) std::cout << line << "\n";
  else
    std::cout << "audited " << trace.size() << " trace records over " << report.epochs.size() << " epochs -> " << f.out
              << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised image classification with dynamic thresholds and selective negative learning"};
  app.require_subcommand(1);

  CommonFlags synth_f, train_f, eval_f, audit_f;
  std::string resume, checkpoint, model, trace;

  auto* synth = app.add_subcommand("synth-gen", "generate the synthetic seven-class dataset");
  add_common(synth, synth_f, true);

  auto* train = app.add_subcommand("train", "train a model; writes a run directory");
  add_common(train, train_f, true);
  train->add_option("--resume", resume, "checkpoint directory to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
  add_common(eval, eval_f, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--model", model, "student or teacher (default: train.eval_model)");

  auto* audit = app.add_subcommand("audit", "replay a probability trace through the threshold gate");
  add_common(audit, audit_f, false);
  audit->add_option("--trace", trace, "trace.jsonl written by a run with train.trace = true")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_f);
    if (train->parsed()) return cmd_train(train_f, resume);
    if (eval->parsed()) return cmd_eval(eval_f, checkpoint, model);
    if (audit->parsed()) return cmd_audit(audit_f, trace);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
