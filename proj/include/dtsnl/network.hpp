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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtsnl/attention.hpp"
#include "dtsnl/layers.hpp"
#include "dtsnl/random.hpp"
#include "dtsnl/tensor.hpp"

namespace dtsnl {

struct ModelConfig {
  int in_channels = 3;
  /// One 3x3 conv + ReLU per entry; every stage but the last is followed by 2x2 max pooling.
  std::vector<int> channels = {16, 32, 32};
  int num_classes = 7;
  AttentionConfig attention;

  bool operator==(const ModelConfig& o) const {
    return in_channels == o.in_channels && channels == o.channels && num_classes == o.num_classes &&
           attention.enabled == o.attention.enabled && attention.num_branches == o.attention.num_branches &&
           attention.reduction == o.attention.reduction;
  }
};

/// How a forward pass treats the stochastic attention drop.
struct ForwardMode {
  bool training = false;
  Rng* drop_rng = nullptr;                              // required when training without frozen decisions
  const std::vector<DropDecision>* frozen = nullptr;    // replayed decisions (gradient checks)
  double drop_p = 0.5;

  static ForwardMode eval() { return {}; }
};

/// Small convolutional classifier: conv stages, optional attention head, global
/// average pooling, linear classifier. Stateless apart from its shape; parameters
/// live in a caller-owned flat buffer so student, teacher and optimizer moments
/// share one layout.
template <typename T>
class Network {
 public:
  explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)) {
    DTSNL_CHECK(!cfg_.channels.empty(), "model needs at least one conv stage");
    DTSNL_CHECK(cfg_.num_classes >= 2, "model needs at least two classes");
    size_t offset = 0;
    int in = cfg_.in_channels;
    for (int out : cfg_.channels) {
      DTSNL_CHECK(out > 0, "conv channels must be positive");
      convs_.push_back(layers::Conv2d{in, out, 3});
      conv_offsets_.push_back(offset);
      offset += convs_.back().param_count();
      in = out;
    }
    feature_channels_ = in;
    if (cfg_.attention.enabled) {
      bank_ = AttentionBank(in, cfg_.attention.num_branches, cfg_.attention.reduction);
      attention_offset_ = offset;
      offset += bank_.param_count();
    }
    head_ = layers::Linear{in, cfg_.num_classes};
    head_offset_ = offset;
    offset += head_.param_count();
    param_count_ = offset;
  }

  const ModelConfig& config() const { return cfg_; }
  size_t param_count() const { return param_count_; }
  int feature_channels() const { return feature_channels_; }
  const AttentionBank& bank() const { return bank_; }
  size_t attention_offset() const { return attention_offset_; }

  std::vector<T> init_params(uint64_t seed) const {
    Rng rng(seed);
    std::vector<T> p(param_count_, T(0));
    auto fill_normal = [&](size_t off, size_t n, double stddev) {
      for (size_t i = 0; i < n; ++i) p[off + i] = static_cast<T>(normal01(rng) * stddev);
    };
    for (size_t l = 0; l < convs_.size(); ++l) {
      const auto& cv = convs_[l];
      fill_normal(conv_offsets_[l], cv.weight_count(), std::sqrt(2.0 / (cv.in * cv.k * cv.k)));
    }
    if (cfg_.attention.enabled) {
      const size_t a = attention_offset_;
      fill_normal(a + bank_.w1_offset(), bank_.b1_offset() - bank_.w1_offset(), std::sqrt(2.0 / bank_.channels));
      fill_normal(a + bank_.w2_offset(), bank_.b2_offset() - bank_.w2_offset(), std::sqrt(1.0 / bank_.hidden()));
    }
    fill_normal(head_offset_, static_cast<size_t>(head_.out) * head_.in, std::sqrt(1.0 / head_.in));
    return p;
  }

  struct Cache {
    std::vector<Tensor4<T>> stage_in;
    std::vector<Tensor4<T>> stage_act;
    std::vector<std::vector<uint32_t>> pool_arg;
    Tensor4<T> features;
    ScoreForward<T> scores;
    AttentionMap<T> atten;
    Tensor4<T> fused;
    Matrix<T> pooled;
  };

  /// Logits (n x num_classes). Fills `cache` when given, for a later backward().
  Matrix<T> forward(const Tensor4<T>& x, std::span<const T> params, const ForwardMode& mode,
                    Cache* cache = nullptr) const {
    DTSNL_CHECK(params.size() == param_count_, "parameter buffer has wrong size");
    Cache local;
    Cache& c = cache ? *cache : local;
    c = Cache{};
    Tensor4<T> cur = x;
    for (size_t l = 0; l < convs_.size(); ++l) {
      Tensor4<T> act = convs_[l].forward(cur, params.subspan(conv_offsets_[l], convs_[l].param_count()));
      layers::relu_inplace(act);
      const bool pool = l + 1 < convs_.size();
      std::vector<uint32_t> arg;
      Tensor4<T> next = pool ? layers::maxpool2(act, arg) : act;
      if (cache) {
        c.stage_in.push_back(std::move(cur));
        c.stage_act.push_back(std::move(act));
        c.pool_arg.push_back(std::move(arg));
      }
      cur = std::move(next);
    }
    Tensor4<T> fused;
    if (cfg_.attention.enabled) {
      auto ap = params.subspan(attention_offset_, bank_.param_count());
      ScoreForward<T> sc = lanet_score(cur, bank_, ap);
      AttentionMap<T> am;
      if (mode.frozen) {
        am = drop_and_max(sc.scores, *mode.frozen);
      } else if (mode.training) {
        DTSNL_CHECK(mode.drop_rng != nullptr, "training forward needs a drop random stream");
        am = drop_and_max(sc.scores, mode.drop_p, *mode.drop_rng, true);
      } else {
        am = drop_and_max(sc.scores, std::vector<DropDecision>{});
      }
      fused = fuse(cur, am.map);
      if (cache) {
        c.scores = std::move(sc);
        c.atten = std::move(am);
      }
    } else {
      fused = cur;
    }
    Matrix<T> pooled = layers::global_avg_pool(fused);
    Matrix<T> logits = head_.forward(pooled, params.subspan(head_offset_, head_.param_count()));
    if (cache) {
      c.features = std::move(cur);
      c.fused = std::move(fused);
      c.pooled = std::move(pooled);
    }
    return logits;
  }

  /// Accumulates dL/dparams into `grads` given dL/dlogits.
  void backward(const Cache& c, const Matrix<T>& dlogits, std::span<const T> params, std::span<T> grads) const {
    DTSNL_CHECK(grads.size() == param_count_, "gradient buffer has wrong size");
    Matrix<T> dpooled = head_.backward(c.pooled, dlogits, params.subspan(head_offset_, head_.param_count()),
                                       grads.subspan(head_offset_, head_.param_count()));
    Tensor4<T> dcur = layers::global_avg_pool_backward(dpooled, c.fused.h, c.fused.w);
    if (cfg_.attention.enabled) {
      auto ap = params.subspan(attention_offset_, bank_.param_count());
      auto ag = grads.subspan(attention_offset_, bank_.param_count());
      auto [dF, dA] = fuse_backward(c.features, c.atten.map, dcur);
      Tensor4<T> dS = drop_and_max_backward(c.atten, dA, bank_.num_branches);
      Tensor4<T> dF2 = lanet_score_backward(c.features, bank_, ap, c.scores, dS, ag);
      for (size_t i = 0; i < dF.data.size(); ++i) dF.data[i] += dF2.data[i];
      dcur = std::move(dF);
    }
    for (size_t l = convs_.size(); l-- > 0;) {
      const bool pool = l + 1 < convs_.size();
      Tensor4<T> dact = pool ? layers::maxpool2_backward(c.stage_act[l], c.pool_arg[l], dcur) : std::move(dcur);
      layers::relu_backward_inplace(c.stage_act[l], dact);
      dcur = convs_[l].backward(c.stage_in[l], dact, params.subspan(conv_offsets_[l], convs_[l].param_count()),
                                grads.subspan(conv_offsets_[l], convs_[l].param_count()), l > 0);
    }
  }

 private:
  ModelConfig cfg_;
  std::vector<layers::Conv2d> convs_;
  std::vector<size_t> conv_offsets_;
  AttentionBank bank_;
  size_t attention_offset_ = 0;
  layers::Linear head_;
  size_t head_offset_ = 0;
  size_t param_count_ = 0;
  int feature_channels_ = 0;
};

}  // namespace dtsnl
