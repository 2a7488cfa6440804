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
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dtsnl/error.hpp"
#include "dtsnl/random.hpp"
#include "dtsnl/tensor.hpp"

// Feature enhancement head.
//
// A bank of N local-attention branches maps backbone features F (n x C x h x w)
// to N sigmoid score maps. During training one branch per batch element is
// selected uniformly and, with probability p, zeroed. The surviving maps are
// max-fused into a single 1 x h x w attention map that reweights F elementwise
// (broadcast over channels).

namespace dtsnl {

struct AttentionConfig {
  bool enabled = true;
  int num_branches = 6;
  int reduction = 16;
  double drop_p = 0.5;
};

/// Shape bookkeeping for the branch parameters inside a flat buffer:
/// W1[N*hidden][C], b1[N*hidden], w2[N][hidden], b2[N].
struct AttentionBank {
  int channels = 0;
  int num_branches = 6;
  int reduction = 16;

  AttentionBank() = default;
  AttentionBank(int channels_, int num_branches_, int reduction_)
      : channels(channels_), num_branches(num_branches_), reduction(reduction_) {
    DTSNL_CHECK(num_branches >= 1, "attention bank needs at least one branch");
    DTSNL_CHECK(channels >= 1 && reduction >= 1, "attention bank: channels and reduction must be positive");
  }

  int hidden() const { return std::max(1, channels / reduction); }
  size_t w1_offset() const { return 0; }
  size_t b1_offset() const { return w1_offset() + static_cast<size_t>(num_branches) * hidden() * channels; }
  size_t w2_offset() const { return b1_offset() + static_cast<size_t>(num_branches) * hidden(); }
  size_t b2_offset() const { return w2_offset() + static_cast<size_t>(num_branches) * hidden(); }
  size_t param_count() const { return b2_offset() + static_cast<size_t>(num_branches); }
};

/// Score maps plus the cached hidden activations needed for backward.
template <typename T>
struct ScoreForward {
  Tensor4<T> scores;  // n x N x h x w, entries in (0,1)
  Tensor4<T> hidden;  // n x (N*hidden) x h x w, post-ReLU
};

template <typename T>
ScoreForward<T> lanet_score(const Tensor4<T>& features, const AttentionBank& bank, std::span<const T> params) {
  if (features.c != bank.channels)
    throw InvalidArgument("attention bank expects " + std::to_string(bank.channels) + " channels, got " +
                          std::to_string(features.c));
  const int N = bank.num_branches, hd = bank.hidden(), C = bank.channels;
  const int P = features.h * features.w;
  const T* W1 = params.data() + bank.w1_offset();
  const T* b1 = params.data() + bank.b1_offset();
  const T* w2 = params.data() + bank.w2_offset();
  const T* b2 = params.data() + bank.b2_offset();
  ScoreForward<T> out{Tensor4<T>(features.n, N, features.h, features.w),
                      Tensor4<T>(features.n, N * hd, features.h, features.w)};
  for (int i = 0; i < features.n; ++i) {
    T* hid = out.hidden.sample(i);
    for (int j = 0; j < N * hd; ++j) std::fill(hid + static_cast<size_t>(j) * P, hid + static_cast<size_t>(j + 1) * P, b1[j]);
    blas::gemm_nn(N * hd, P, C, W1, features.sample(i), hid);
    for (auto it = hid; it != hid + static_cast<size_t>(N) * hd * P; ++it) *it = *it > T(0) ? *it : T(0);
    T* s = out.scores.sample(i);
    for (int b = 0; b < N; ++b) {
      T* sb = s + static_cast<size_t>(b) * P;
      std::fill(sb, sb + P, b2[b]);
      for (int j = 0; j < hd; ++j) {
        const T wj = w2[static_cast<size_t>(b) * hd + j];
        const T* h = hid + (static_cast<size_t>(b) * hd + j) * P;
        for (int p = 0; p < P; ++p) sb[p] += wj * h[p];
      }
      for (int p = 0; p < P; ++p) sb[p] = T(1) / (T(1) + std::exp(-sb[p]));
    }
  }
  return out;
}

/// Accumulates bank-parameter gradients and returns dL/dF through the score path.
template <typename T>
Tensor4<T> lanet_score_backward(const Tensor4<T>& features, const AttentionBank& bank, std::span<const T> params,
                                const ScoreForward<T>& fwd, const Tensor4<T>& dscores, std::span<T> grads) {
  const int N = bank.num_branches, hd = bank.hidden(), C = bank.channels;
  const int P = features.h * features.w;
  const T* W1 = params.data() + bank.w1_offset();
  const T* w2 = params.data() + bank.w2_offset();
  T* dW1 = grads.data() + bank.w1_offset();
  T* db1 = grads.data() + bank.b1_offset();
  T* dw2 = grads.data() + bank.w2_offset();
  T* db2 = grads.data() + bank.b2_offset();
  Tensor4<T> dF(features.n, C, features.h, features.w);
  std::vector<T> dpre(P), dhid(static_cast<size_t>(N) * hd * P), featT(static_cast<size_t>(P) * C);
  for (int i = 0; i < features.n; ++i) {
    const T* s = fwd.scores.sample(i);
    const T* hid = fwd.hidden.sample(i);
    const T* ds = dscores.sample(i);
    std::fill(dhid.begin(), dhid.end(), T(0));
    bool any = false;
    for (int b = 0; b < N; ++b) {
      const T* sb = s + static_cast<size_t>(b) * P;
      const T* dsb = ds + static_cast<size_t>(b) * P;
      T sum = 0;
      for (int p = 0; p < P; ++p) {
        dpre[p] = dsb[p] * sb[p] * (T(1) - sb[p]);
        sum += dpre[p];
      }
      db2[b] += sum;
      for (int j = 0; j < hd; ++j) {
        const size_t row = static_cast<size_t>(b) * hd + j;
        const T* h = hid + row * P;
        T* dh = dhid.data() + row * P;
        const T wj = w2[row];
        T acc = 0;
        for (int p = 0; p < P; ++p) {
          acc += dpre[p] * h[p];
          dh[p] = h[p] > T(0) ? dpre[p] * wj : T(0);
          any = any || dh[p] != T(0);
        }
        dw2[row] += acc;
      }
    }
    if (!any) continue;
    const T* f = features.sample(i);
    for (int c = 0; c < C; ++c)
      for (int p = 0; p < P; ++p) featT[static_cast<size_t>(p) * C + c] = f[static_cast<size_t>(c) * P + p];
    blas::gemm_nn(N * hd, C, P, dhid.data(), featT.data(), dW1);
    for (int j = 0; j < N * hd; ++j) {
      T acc = 0;
      for (int p = 0; p < P; ++p) acc += dhid[static_cast<size_t>(j) * P + p];
      db1[j] += acc;
    }
    blas::gemm_tn(C, P, N * hd, W1, dhid.data(), dF.sample(i));
  }
  return dF;
}

/// Per-element drop decision: which branch was selected and whether it was zeroed.
struct DropDecision {
  int branch = 0;
  bool dropped = false;

  bool operator==(const DropDecision&) const = default;
};

/// Draws one decision per batch element: all branch indices first, then one
/// uniform [0,1) draw per element, zeroing when the draw is below p.
inline std::vector<DropDecision> draw_drop_decisions(int batch, int num_branches, double p, Rng& rng) {
  DTSNL_CHECK(p >= 0.0 && p <= 1.0, "drop probability must be in [0,1]");
  std::vector<DropDecision> d(static_cast<size_t>(batch));
  for (auto& e : d) e.branch = static_cast<int>(uniform_index(rng, static_cast<uint64_t>(num_branches)));
  for (auto& e : d) e.dropped = uniform01(rng) < p;
  return d;
}

/// Fused attention map with the winning branch per pixel (for backward).
template <typename T>
struct AttentionMap {
  Tensor4<T> map;               // n x 1 x h x w
  std::vector<int16_t> winner;  // n*h*w branch index, -1 when every candidate was zeroed
  std::vector<DropDecision> decisions;
};

/// Elementwise max over branches after applying `decisions` (empty = no drop).
template <typename T>
AttentionMap<T> drop_and_max(const Tensor4<T>& scores, const std::vector<DropDecision>& decisions) {
  DTSNL_CHECK(decisions.empty() || decisions.size() == static_cast<size_t>(scores.n),
              "drop decisions do not match batch size");
  const int N = scores.c;
  const size_t P = scores.plane();
  AttentionMap<T> out{Tensor4<T>(scores.n, 1, scores.h, scores.w), std::vector<int16_t>(scores.n * P, -1), decisions};
  for (int i = 0; i < scores.n; ++i) {
    const int dropped = decisions.empty() || !decisions[i].dropped ? -1 : decisions[i].branch;
    const T* s = scores.sample(i);
    T* m = out.map.sample(i);
    int16_t* win = out.winner.data() + i * P;
    for (size_t p = 0; p < P; ++p) {
      T best = T(0);
      int16_t arg = -1;
      bool seen = false;
      for (int b = 0; b < N; ++b) {
        const T v = b == dropped ? T(0) : s[static_cast<size_t>(b) * P + p];
        if (!seen || v > best) {
          best = v;
          // a zeroed branch carries no gradient
          arg = b == dropped ? int16_t(-1) : static_cast<int16_t>(b);
          seen = true;
        }
      }
      m[p] = best;
      win[p] = arg;
    }
  }
  return out;
}

/// Training mode draws fresh decisions from `rng`; eval mode never drops and never touches `rng`.
template <typename T>
AttentionMap<T> drop_and_max(const Tensor4<T>& scores, double p, Rng& rng, bool training) {
  if (!training) return drop_and_max(scores, std::vector<DropDecision>{});
  return drop_and_max(scores, draw_drop_decisions(scores.n, scores.c, p, rng));
}

template <typename T>
Tensor4<T> drop_and_max_backward(const AttentionMap<T>& am, const Tensor4<T>& dmap, int num_branches) {
  Tensor4<T> ds(dmap.n, num_branches, dmap.h, dmap.w);
  const size_t P = dmap.plane();
  for (int i = 0; i < dmap.n; ++i)
    for (size_t p = 0; p < P; ++p) {
      const int b = am.winner[i * P + p];
      if (b >= 0) ds.sample(i)[static_cast<size_t>(b) * P + p] += dmap.sample(i)[p];
    }
  return ds;
}

/// F_exp = F (Hadamard) A, with the single attention channel broadcast across channels.
template <typename T>
Tensor4<T> fuse(const Tensor4<T>& features, const Tensor4<T>& atten) {
  if (atten.c != 1 || atten.n != features.n || atten.h != features.h || atten.w != features.w)
    throw InvalidArgument("fuse: attention map " + atten.shape_string() + " does not match features " +
                          features.shape_string());
  Tensor4<T> out = features;
  const size_t P = features.plane();
  for (int i = 0; i < features.n; ++i) {
    const T* a = atten.sample(i);
    T* o = out.sample(i);
    for (int c = 0; c < features.c; ++c)
      for (size_t p = 0; p < P; ++p) o[c * P + p] *= a[p];
  }
  return out;
}

/// Returns (dF, dA) for the fuse step.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> fuse_backward(const Tensor4<T>& features, const Tensor4<T>& atten,
                                                const Tensor4<T>& dout) {
  Tensor4<T> dF(features.n, features.c, features.h, features.w);
  Tensor4<T> dA(atten.n, 1, atten.h, atten.w);
  const size_t P = features.plane();
  for (int i = 0; i < features.n; ++i) {
    const T* a = atten.sample(i);
    const T* f = features.sample(i);
    const T* d = dout.sample(i);
    T* df = dF.sample(i);
    T* da = dA.sample(i);
    for (int c = 0; c < features.c; ++c)
      for (size_t p = 0; p < P; ++p) {
        df[c * P + p] = d[c * P + p] * a[p];
        da[p] += d[c * P + p] * f[c * P + p];
      }
  }
  return {std::move(dF), std::move(dA)};
}

}  // namespace dtsnl
