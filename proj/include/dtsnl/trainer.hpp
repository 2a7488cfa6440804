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
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/augment.hpp"
#include "dtsnl/checkpoint.hpp"
#include "dtsnl/config.hpp"
#include "dtsnl/datamodel.hpp"
#include "dtsnl/dta.hpp"
#include "dtsnl/gate.hpp"
#include "dtsnl/losses.hpp"
#include "dtsnl/manifest.hpp"
#include "dtsnl/metrics.hpp"
#include "dtsnl/network.hpp"
#include "dtsnl/optimizer.hpp"
#include "dtsnl/random.hpp"
#include "dtsnl/sampler.hpp"
#include "dtsnl/snl.hpp"

namespace dtsnl {

/// The three splits of a manifest, decoded into memory.
struct Dataset {
  LabelSpace label_space;
  std::vector<ImageSample> labeled;
  std::vector<ImageSample> unlabeled;
  std::vector<ImageSample> eval;

  static Dataset load(const DatasetManifest& manifest) {
    Dataset d;
    d.label_space = manifest.label_space();
    for (const auto& r : manifest.records()) {
      ImageSample s = manifest.load(r);
      switch (r.split) {
        case Split::kLabeled: d.labeled.push_back(std::move(s)); break;
        case Split::kUnlabeled: d.unlabeled.push_back(std::move(s)); break;
        case Split::kEval: d.eval.push_back(std::move(s)); break;
      }
    }
    return d;
  }

  std::vector<ClassIndex> labels(const std::vector<ImageSample>& split) const {
    std::vector<ClassIndex> out;
    for (const auto& s : split) out.push_back(*s.label);
    return out;
  }
};

/// Startup checks that depend on both the configuration and the data.
inline void validate_run(const RunConfig& cfg, const Dataset& data) {
  std::vector<std::string> errors;
  if (data.labeled.empty()) errors.push_back("the labeled split is empty");
  if (data.unlabeled.empty() && cfg.loss.lambda1 > 0.0)
    errors.push_back("loss.lambda1 = " + std::to_string(cfg.loss.lambda1) +
                     " requires unlabeled data, but the manifest has no unlabeled split");
  if (data.unlabeled.empty() && cfg.loss.lambda2 > 0.0 && cfg.snl.enabled)
    errors.push_back("loss.lambda2 = " + std::to_string(cfg.loss.lambda2) +
                     " with snl.enabled requires unlabeled data, but the manifest has no unlabeled split");
  if (cfg.model.num_classes != data.label_space.num_classes())
    errors.push_back("model has " + std::to_string(cfg.model.num_classes) + " classes, manifest has " +
                     std::to_string(data.label_space.num_classes()));
  if (!errors.empty()) throw ConfigError(ConfigFile::join(errors));
}

/// One optimizer step's worth of inputs.
struct BatchPlan {
  std::vector<ImageSample> labeled;        // weakly augmented
  std::vector<ImageSample> labeled_clean;  // center-cropped, for the teacher
  std::vector<ViewTriple> unlabeled;
};

/// All decision-relevant mutable state of a run.
struct RunState {
  std::vector<float> student;
  TeacherParams<float> teacher;
  Adam<float> optimizer;
  ThresholdGate gate;
  int64_t epoch = 0;
  int64_t global_step = 0;
  Rng sampler_rng;
  Rng labeled_rng;
  Rng unlabeled_rng;
  Rng drop_rng;
  double best_accuracy = -1.0;
  int64_t best_epoch = 0;
};

struct EpochMetrics {
  int64_t epoch = 0;
  GateEpochSummary gate;
  std::optional<ClassificationMetrics> eval;
  double mean_total_loss = 0.0;
  int steps = 0;
};

template <typename T>
Tensor4<T> stack_images(const std::vector<const Image*>& images, const Normalizer& norm) {
  DTSNL_CHECK(!images.empty(), "cannot stack an empty image list");
  const Image& first = *images.front();
  Tensor4<T> t(static_cast<int>(images.size()), first.channels(), first.height(), first.width());
  for (size_t i = 0; i < images.size(); ++i) {
    DTSNL_CHECK(images[i]->same_shape(first), "images in a batch differ in shape");
    norm.apply(*images[i], t.sample(static_cast<int>(i)));
  }
  return t;
}

/// Drives training of a student network with an EMA teacher, threshold gating,
/// consistency and selective negative learning.
///
/// When `run_dir` is empty nothing touches the filesystem; metrics and trace
/// records are still kept in memory.
class Trainer {
 public:
  Trainer(RunConfig cfg, Dataset data, std::filesystem::path run_dir = {})
      : cfg_(std::move(cfg)),
        data_(std::move(data)),
        run_dir_(std::move(run_dir)),
        net_(model_config(cfg_, data_)),
        policy_(cfg_.strong_policy()),
        state_{{},
               {},
               {},
               ThresholdGate(data_.label_space.num_classes(), cfg_.dta, cfg_.snl),
               0,
               0,
               Rng(derive_seed(cfg_.seed, 1)),
               Rng(derive_seed(cfg_.seed, 2)),
               Rng(derive_seed(cfg_.seed, 3)),
               Rng(derive_seed(cfg_.seed, 4))} {
    cfg_.augment.validate();
    cfg_.loss.validate();
    norm_.enabled = cfg_.normalize;
    labeled_labels_ = data_.labels(data_.labeled);
    sampler_ = std::make_unique<BalancedSampler>(labeled_labels_, data_.label_space);
    state_.student = net_.init_params(derive_seed(cfg_.seed, 0));
    state_.teacher.params = state_.student;
    state_.teacher.decay = cfg_.dta.ema_decay;
    state_.optimizer.lr = cfg_.learning_rate;
    state_.optimizer.reset(state_.student.size());
    if (!run_dir_.empty()) open_run_dir();
  }

  ~Trainer() {
    if (!lock_.empty()) {
      std::error_code ec;
      std::filesystem::remove(lock_, ec);
    }
  }

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  static ModelConfig model_config(RunConfig& cfg, const Dataset& data) {
    cfg.model.num_classes = data.label_space.num_classes();
    if (!data.labeled.empty()) cfg.model.in_channels = data.labeled.front().pixels.channels();
    return cfg.model;
  }

  const RunConfig& config() const { return cfg_; }
  const Network<float>& network() const { return net_; }
  RunState& state() { return state_; }
  const RunState& state() const { return state_; }
  const Dataset& data() const { return data_; }
  const io::JsonLines& metrics() const { return metrics_; }
  const io::JsonLines& trace() const { return trace_; }

  bool uses_unlabeled() const {
    return !data_.unlabeled.empty() && (cfg_.loss.lambda1 > 0.0 || cfg_.loss.lambda2 > 0.0);
  }

  int steps_per_epoch() const {
    if (!data_.unlabeled.empty()) {
      const int ub = cfg_.unlabeled_batch();
      return static_cast<int>((data_.unlabeled.size() + ub - 1) / ub);
    }
    const int lb = cfg_.labeled_batch();
    return static_cast<int>((data_.labeled.size() + lb - 1) / lb);
  }

  /// Balanced labeled draw plus views of the given unlabeled samples.
  BatchPlan plan_step(std::span<const size_t> unlabeled_indices) {
    BatchPlan plan;
    for (size_t idx : sampler_->sample(static_cast<size_t>(cfg_.labeled_batch()), state_.sampler_rng)) {
      plan.labeled.push_back(weak_augment(data_.labeled[idx], cfg_.augment, state_.labeled_rng));
      plan.labeled_clean.push_back(eval_preprocess(data_.labeled[idx], cfg_.augment));
    }
    if (uses_unlabeled())
      for (size_t idx : unlabeled_indices)
        plan.unlabeled.push_back(make_views(data_.unlabeled[idx], policy_, cfg_.augment, state_.unlabeled_rng));
    return plan;
  }

  LossReport train_step(const BatchPlan& plan) {
    const int L = static_cast<int>(plan.labeled.size());
    const int U = static_cast<int>(plan.unlabeled.size());
    const int C = data_.label_space.num_classes();
    DTSNL_CHECK(L > 0, "labeled batch is empty");
    ++state_.global_step;
    const int64_t epoch = state_.epoch + 1;

    std::vector<const Image*> inputs;
    for (const auto& s : plan.labeled) inputs.push_back(&s.pixels);
    for (const auto& v : plan.unlabeled) inputs.push_back(&v.weak1.pixels);
    for (const auto& v : plan.unlabeled) inputs.push_back(&v.weak2.pixels);
    Tensor4<float> x = stack_images<float>(inputs, norm_);

    ForwardMode train_mode{true, &state_.drop_rng, nullptr, cfg_.model.attention.drop_p};
    typename Network<float>::Cache main_cache;
    Matrix<float> logits = net_.forward(x, state_.student, train_mode, &main_cache);
    std::vector<ProbabilityVector> probs = softmax_rows(logits);
    Matrix<float> dmain(logits.rows, C);

    LossReport report;
    std::vector<ClassIndex> labels;
    for (const auto& s : plan.labeled) labels.push_back(*s.label);
    report.l_labeled = supervised_loss(labels, std::span(probs).subspan(0, static_cast<size_t>(L)));
    for (int i = 0; i < L; ++i) cross_entropy_grad(probs[static_cast<size_t>(i)], labels[static_cast<size_t>(i)], 1.0 / L, dmain.row(i));

    // Unlabeled: average the two weak views, gate, route rejects to SNL.
    std::vector<PseudoLabel> pseudo;
    std::vector<int> accepted_rows, rejected_rows;
    std::vector<ProbabilityVector> averaged;
    for (int u = 0; u < U; ++u) {
      const auto& id = plan.unlabeled[static_cast<size_t>(u)].source_id;
      averaged.push_back(average_distributions(probs[static_cast<size_t>(L + u)], probs[static_cast<size_t>(L + U + u)]));
      GateOutcome out = state_.gate.gate(id, averaged.back());
      if (cfg_.trace) trace_unlabeled(epoch, id, averaged.back());
      (out.label.accepted ? accepted_rows : rejected_rows).push_back(u);
      pseudo.push_back(std::move(out.label));
    }
    report.accepted_count = static_cast<int>(accepted_rows.size());
    report.rejected_count = static_cast<int>(rejected_rows.size());

    if (!rejected_rows.empty() && cfg_.snl.enabled) {
      const double scale = 1.0 / static_cast<double>(rejected_rows.size());
      for (int u : rejected_rows) {
        const auto& negated = state_.gate.store().get(plan.unlabeled[static_cast<size_t>(u)].source_id);
        if (negated.empty()) continue;
        const auto& pavg = averaged[static_cast<size_t>(u)];
        report.l_negative += scale * negative_learning_loss(pavg, negated, cfg_.snl.log_form);
        if (cfg_.loss.lambda2 == 0.0) continue;
        std::vector<double> dp = negative_learning_grad(pavg, negated, cfg_.snl.log_form);
        for (double& g : dp) g *= 0.5 * cfg_.loss.lambda2 * scale;
        for (int view = 0; view < 2; ++view) {
          const int row = L + view * U + u;
          auto dz = softmax_backward(probs[static_cast<size_t>(row)], dp);
          for (int c = 0; c < C; ++c) dmain(row, c) += static_cast<float>(dz[static_cast<size_t>(c)]);
        }
      }
    }

    // Strong views of accepted samples against their pseudo-labels.
    std::optional<typename Network<float>::Cache> strong_cache;
    Matrix<float> dstrong;
    if (cfg_.loss.lambda1 > 0.0 && !accepted_rows.empty()) {
      std::vector<const Image*> strong_inputs;
      for (int u : accepted_rows) strong_inputs.push_back(&plan.unlabeled[static_cast<size_t>(u)].strong.pixels);
      Tensor4<float> xs = stack_images<float>(strong_inputs, norm_);
      strong_cache.emplace();
      Matrix<float> slogits = net_.forward(xs, state_.student, train_mode, &*strong_cache);
      std::vector<ProbabilityVector> sprobs = softmax_rows(slogits);
      std::vector<PseudoLabel> acc_labels;
      for (int u : accepted_rows) acc_labels.push_back(pseudo[static_cast<size_t>(u)]);
      report.l_consistency = consistency_loss(acc_labels, sprobs);
      dstrong = Matrix<float>(slogits.rows, C);
      const double scale = cfg_.loss.lambda1 / static_cast<double>(accepted_rows.size());
      for (int k = 0; k < slogits.rows; ++k)
        cross_entropy_grad(sprobs[static_cast<size_t>(k)], acc_labels[static_cast<size_t>(k)].class_index, scale, dstrong.row(k));
    }

    try {
      report.l_total = total_loss(report, cfg_.loss);
    } catch (const InvalidArgument& e) {
      throw TrainingDiverged(std::string(e.what()) + "; step report: " + report_json(report).dump());
    }

    std::vector<float> grads(state_.student.size(), 0.0f);
    net_.backward(main_cache, dmain, state_.student, grads);
    if (strong_cache) net_.backward(*strong_cache, dstrong, state_.student, grads);
    state_.optimizer.update(state_.student, grads);
    state_.teacher.update(state_.student);

    if (!cfg_.dta.full_pass_stats) observe_teacher(plan.labeled_clean, epoch);

    metrics_.write(step_record(epoch, report));
    return report;
  }

  /// One pass over the unlabeled data, then threshold finalization, evaluation and checkpointing.
  EpochMetrics train_epoch() {
    const int64_t epoch = state_.epoch + 1;
    std::vector<size_t> order(data_.unlabeled.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (uses_unlabeled())
      for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(state_.unlabeled_rng, i)]);
    const int steps = steps_per_epoch();
    const size_t ub = static_cast<size_t>(cfg_.unlabeled_batch());
    EpochMetrics em;
    em.epoch = epoch;
    em.steps = steps;
    for (int s = 0; s < steps; ++s) {
      const size_t begin = std::min(order.size(), static_cast<size_t>(s) * ub);
      const size_t end = std::min(order.size(), begin + ub);
      BatchPlan plan = plan_step(std::span(order).subspan(begin, end - begin));
      em.mean_total_loss += train_step(plan).l_total / steps;
    }
    if (cfg_.dta.full_pass_stats) {
      std::vector<ImageSample> clean;
      for (const auto& s : data_.labeled) clean.push_back(eval_preprocess(s, cfg_.augment));
      observe_teacher(clean, epoch);
    }
    em.gate = state_.gate.end_epoch();
    state_.epoch = epoch;
    if (epoch % cfg_.eval_every == 0 || epoch == cfg_.epochs) {
      em.eval = evaluate(cfg_.eval_model == "teacher" ? state_.teacher.params : state_.student);
    }
    const bool is_best = em.eval && em.eval->accuracy > state_.best_accuracy;
    if (is_best) {
      state_.best_accuracy = em.eval->accuracy;
      state_.best_epoch = epoch;
    }
    nlohmann::ordered_json rec;
    rec["type"] = "epoch";
    rec["epoch"] = epoch;
    rec["steps"] = steps;
    rec["mean_total_loss"] = em.mean_total_loss;
    rec["gate"] = em.gate.to_json();
    if (em.eval) {
      rec["eval_accuracy"] = em.eval->accuracy;
      rec["eval_macro_f1"] = em.eval->macro_f1;
    }
    metrics_.write(rec);
    if (!run_dir_.empty() && (epoch % cfg_.checkpoint_every == 0 || epoch == cfg_.epochs || is_best)) {
      const auto dir = run_dir_ / "checkpoints" / ("epoch-" + std::to_string(epoch));
      save_checkpoint(dir);
      if (is_best) {
        nlohmann::ordered_json best;
        best["checkpoint"] = "checkpoints/epoch-" + std::to_string(epoch);
        best["epoch"] = epoch;
        best["eval_accuracy"] = em.eval->accuracy;
        best["eval_macro_f1"] = em.eval->macro_f1;
        io::write_text(run_dir_ / "best", best.dump() + "\n");
      }
    }
    return em;
  }

  /// Runs the remaining epochs up to the configured count.
  std::vector<EpochMetrics> run() {
    std::vector<EpochMetrics> out;
    while (state_.epoch < cfg_.epochs) out.push_back(train_epoch());
    return out;
  }

  /// Deterministic evaluation: center crop, no attention drop.
  ClassificationMetrics evaluate(std::span<const float> params) const {
    return evaluate_split(net_, params, data_.eval, cfg_.augment, norm_, data_.label_space.num_classes());
  }

  static std::vector<ClassIndex> predict(const Network<float>& net, std::span<const float> params,
                                         const std::vector<ImageSample>& samples, const AugmentConfig& aug,
                                         const Normalizer& norm) {
    std::vector<ClassIndex> pred;
    constexpr size_t kChunk = 256;
    for (size_t b = 0; b < samples.size(); b += kChunk) {
      std::vector<ImageSample> clean;
      for (size_t i = b; i < std::min(samples.size(), b + kChunk); ++i) clean.push_back(eval_preprocess(samples[i], aug));
      std::vector<const Image*> ptrs;
      for (const auto& s : clean) ptrs.push_back(&s.pixels);
      Matrix<float> logits = net.forward(stack_images<float>(ptrs, norm), params, ForwardMode::eval());
      for (int r = 0; r < logits.rows; ++r) {
        auto row = logits.row(r);
        pred.push_back(static_cast<ClassIndex>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
    }
    return pred;
  }

  static ClassificationMetrics evaluate_split(const Network<float>& net, std::span<const float> params,
                                              const std::vector<ImageSample>& samples, const AugmentConfig& aug,
                                              const Normalizer& norm, int num_classes) {
    if (samples.empty()) throw InvalidArgument("evaluation split is empty");
    std::vector<ClassIndex> truth;
    for (const auto& s : samples) {
      if (!s.label) throw InvalidArgument("evaluation sample " + s.sample_id + " has no label");
      truth.push_back(*s.label);
    }
    auto pred = predict(net, params, samples, aug, norm);
    return classification_metrics(truth, pred, num_classes);
  }

  // --- checkpointing -------------------------------------------------------

  void save_checkpoint(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    io::write_floats(dir / "student.bin", state_.student);
    io::write_floats(dir / "teacher.bin", state_.teacher.params);
    io::write_floats(dir / "adam_m.bin", state_.optimizer.m);
    io::write_floats(dir / "adam_v.bin", state_.optimizer.v);
    nlohmann::ordered_json j;
    j["epoch"] = state_.epoch;
    j["global_step"] = state_.global_step;
    j["adam_step"] = state_.optimizer.step;
    j["num_classes"] = data_.label_space.num_classes();
    j["class_names"] = data_.label_space.class_names();
    j["param_count"] = state_.student.size();
    j["thresholds"] = state_.gate.state().tau;
    j["threshold_epoch"] = state_.gate.state().epoch;
    nlohmann::ordered_json store = nlohmann::ordered_json::object();
    for (const auto& [id, s] : state_.gate.store().entries()) store[id] = std::vector<int>(s.begin(), s.end());
    j["complementary_labels"] = store;
    j["rng"] = {{"sampler", rng_state(state_.sampler_rng)},
                {"labeled", rng_state(state_.labeled_rng)},
                {"unlabeled", rng_state(state_.unlabeled_rng)},
                {"drop", rng_state(state_.drop_rng)}};
    j["best_accuracy"] = state_.best_accuracy;
    j["best_epoch"] = state_.best_epoch;
    io::write_text(dir / "state.json", j.dump(2) + "\n");
    io::write_text(dir / "config.snapshot", cfg_.snapshot());
  }

  /// Restores a checkpoint written by save_checkpoint() for the same configuration.
  void load_checkpoint(const std::filesystem::path& dir) {
    nlohmann::json j = io::read_json(dir / "state.json");
    if (j.at("num_classes").get<int>() != data_.label_space.num_classes())
      throw InvalidArgument("checkpoint has " + j.at("num_classes").dump() + " classes, data has " +
                            std::to_string(data_.label_space.num_classes()));
    auto student = io::read_floats(dir / "student.bin");
    if (student.size() != state_.student.size())
      throw InvalidArgument("checkpoint parameter count does not match the configured model");
    state_.student = std::move(student);
    state_.teacher.params = io::read_floats(dir / "teacher.bin");
    state_.optimizer.m = io::read_floats(dir / "adam_m.bin");
    state_.optimizer.v = io::read_floats(dir / "adam_v.bin");
    state_.optimizer.step = j.at("adam_step").get<int64_t>();
    state_.epoch = j.at("epoch").get<int64_t>();
    state_.global_step = j.at("global_step").get<int64_t>();
    state_.gate.mutable_state().tau = j.at("thresholds").get<std::vector<double>>();
    state_.gate.mutable_state().epoch = j.at("threshold_epoch").get<int64_t>();
    auto& entries = state_.gate.mutable_store().entries();
    entries.clear();
    for (const auto& [id, arr] : j.at("complementary_labels").items()) {
      auto v = arr.get<std::vector<int>>();
      entries[id] = std::set<ClassIndex>(v.begin(), v.end());
    }
    const auto& rng = j.at("rng");
    restore_rng(state_.sampler_rng, rng.at("sampler").get<std::string>());
    restore_rng(state_.labeled_rng, rng.at("labeled").get<std::string>());
    restore_rng(state_.unlabeled_rng, rng.at("unlabeled").get<std::string>());
    restore_rng(state_.drop_rng, rng.at("drop").get<std::string>());
    state_.best_accuracy = j.at("best_accuracy").get<double>();
    state_.best_epoch = j.at("best_epoch").get<int64_t>();
  }

  static nlohmann::ordered_json report_json(const LossReport& r) {
    nlohmann::ordered_json j;
    j["l_labeled"] = r.l_labeled;
    j["l_consistency"] = r.l_consistency;
    j["l_negative"] = r.l_negative;
    j["l_total"] = r.l_total;
    j["gate"] = {{"accepted", r.accepted_count}, {"rejected", r.rejected_count}};
    return j;
  }

 private:
  nlohmann::ordered_json step_record(int64_t epoch, const LossReport& r) const {
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["epoch"] = epoch;
    j["step"] = state_.global_step;
    j["l_labeled"] = r.l_labeled;
    j["l_consistency"] = r.l_consistency;
    j["l_negative"] = r.l_negative;
    j["l_total"] = r.l_total;
    j["gate"] = {{"accepted", r.accepted_count}, {"rejected", r.rejected_count}};
    return j;
  }

  void observe_teacher(const std::vector<ImageSample>& clean, int64_t epoch) {
    std::vector<const Image*> ptrs;
    std::vector<ClassIndex> labels;
    for (const auto& s : clean) {
      ptrs.push_back(&s.pixels);
      labels.push_back(*s.label);
    }
    std::vector<ProbabilityVector> tprobs;
    constexpr size_t kChunk = 256;
    for (size_t b = 0; b < ptrs.size(); b += kChunk) {
      std::vector<const Image*> part(ptrs.begin() + static_cast<std::ptrdiff_t>(b),
                                     ptrs.begin() + static_cast<std::ptrdiff_t>(std::min(ptrs.size(), b + kChunk)));
      auto p = softmax_rows(net_.forward(stack_images<float>(part, norm_), state_.teacher.params, ForwardMode::eval()));
      tprobs.insert(tprobs.end(), p.begin(), p.end());
    }
    state_.gate.observe_teacher(tprobs, labels);
    if (cfg_.trace)
      for (size_t i = 0; i < clean.size(); ++i) {
        nlohmann::ordered_json j;
        j["epoch"] = epoch;
        j["step"] = state_.global_step;
        j["kind"] = "teacher";
        j["sample_id"] = clean[i].sample_id;
        j["label"] = labels[i];
        j["probs"] = std::vector<double>(tprobs[i].values().begin(), tprobs[i].values().end());
        trace_.write(j);
      }
  }

  void trace_unlabeled(int64_t epoch, const std::string& id, const ProbabilityVector& p) {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["step"] = state_.global_step;
    j["kind"] = "unlabeled";
    j["sample_id"] = id;
    j["probs"] = std::vector<double>(p.values().begin(), p.values().end());
    trace_.write(j);
  }

  void open_run_dir() {
    std::filesystem::create_directories(run_dir_);
    lock_ = run_dir_ / ".lock";
    std::FILE* f = std::fopen(lock_.c_str(), "wx");
    if (!f) {
      lock_.clear();
      throw IoError("run directory " + run_dir_.string() + " is locked by another run (remove .lock if stale)");
    }
    std::fclose(f);
    io::write_text(run_dir_ / "config.snapshot", cfg_.snapshot());
    metrics_ = io::JsonLines(run_dir_ / "metrics.jsonl");
    if (cfg_.trace) trace_ = io::JsonLines(run_dir_ / "trace.jsonl");
  }

  RunConfig cfg_;
  Dataset data_;
  std::filesystem::path run_dir_;
  std::filesystem::path lock_;
  Network<float> net_;
  AugmentPolicy policy_;
  Normalizer norm_;
  std::vector<ClassIndex> labeled_labels_;
  std::unique_ptr<BalancedSampler> sampler_;
  RunState state_;
  io::JsonLines metrics_;
  io::JsonLines trace_;
};

}  // namespace dtsnl
