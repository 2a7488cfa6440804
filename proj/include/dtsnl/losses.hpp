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
#include <span>
#include <string>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/tensor.hpp"

namespace dtsnl {

inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
  double lambda1 = 0.5;  // consistency
  double lambda2 = 0.1;  // negative learning

  void validate() const {
    DTSNL_CHECK(std::isfinite(lambda1) && lambda1 >= 0.0, "loss.lambda1 must be finite and >= 0");
    DTSNL_CHECK(std::isfinite(lambda2) && lambda2 >= 0.0, "loss.lambda2 must be finite and >= 0");
  }
};

/// Per-step loss breakdown. `l_total` is always the weighted sum of the three terms.
struct LossReport {
  double l_labeled = 0.0;
  double l_consistency = 0.0;
  double l_negative = 0.0;
  double l_total = 0.0;
  int accepted_count = 0;
  int rejected_count = 0;
};

/// Mean cross-entropy of the true labels under `probs`.
inline double supervised_loss(std::span<const ClassIndex> labels, std::span<const ProbabilityVector> probs) {
  if (labels.empty()) throw InvalidArgument("supervised loss on an empty batch");
  DTSNL_CHECK(labels.size() == probs.size(), "labels and predictions differ in length");
  double s = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    DTSNL_CHECK(labels[i] >= 0 && labels[i] < probs[i].size(), "label out of range");
    s -= std::log(std::max(probs[i][labels[i]], kLogFloor));
  }
  return s / static_cast<double>(labels.size());
}

/// Cross-entropy of the hard pseudo-labels under the strong-view predictions,
/// averaged over accepted samples; exactly 0 when nothing is accepted.
inline double consistency_loss(std::span<const PseudoLabel> pseudo, std::span<const ProbabilityVector> strong) {
  DTSNL_CHECK(pseudo.size() == strong.size(), "pseudo-labels and strong predictions differ in length");
  double s = 0.0;
  int n = 0;
  for (size_t i = 0; i < pseudo.size(); ++i) {
    if (!pseudo[i].accepted) continue;
    s -= std::log(std::max(strong[i][pseudo[i].class_index], kLogFloor));
    ++n;
  }
  return n == 0 ? 0.0 : s / n;
}

/// L_final = L_l + lambda1 * L_u + lambda2 * L_NL. Rejects non-finite terms by name.
inline double total_loss(double l_labeled, double l_consistency, double l_negative, const LossWeights& w) {
  const std::pair<const char*, double> terms[] = {
      {"labeled", l_labeled}, {"consistency", l_consistency}, {"negative", l_negative}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) throw InvalidArgument(std::string("non-finite ") + name + " loss term: " + std::to_string(v));
  return l_labeled + w.lambda1 * l_consistency + w.lambda2 * l_negative;
}

inline double total_loss(const LossReport& r, const LossWeights& w) {
  return total_loss(r.l_labeled, r.l_consistency, r.l_negative, w);
}

/// Vector-Jacobian product of softmax: given p = softmax(z) and dL/dp, returns dL/dz.
inline std::vector<double> softmax_backward(const ProbabilityVector& p, std::span<const double> dp) {
  double dot = 0.0;
  for (int c = 0; c < p.size(); ++c) dot += p[c] * dp[static_cast<size_t>(c)];
  std::vector<double> dz(static_cast<size_t>(p.size()));
  for (int c = 0; c < p.size(); ++c) dz[static_cast<size_t>(c)] = p[c] * (dp[static_cast<size_t>(c)] - dot);
  return dz;
}

/// Adds scale * (softmax - onehot), the cross-entropy gradient w.r.t. one row of logits.
template <typename T>
void cross_entropy_grad(const ProbabilityVector& p, ClassIndex target, double scale, std::span<T> dlogits_row) {
  for (int c = 0; c < p.size(); ++c)
    dlogits_row[static_cast<size_t>(c)] += static_cast<T>(scale * (p[c] - (c == target ? 1.0 : 0.0)));
}

/// Softmax of every row of a logits matrix.
template <typename T>
std::vector<ProbabilityVector> softmax_rows(const Matrix<T>& logits) {
  std::vector<ProbabilityVector> out;
  out.reserve(static_cast<size_t>(logits.rows));
  for (int r = 0; r < logits.rows; ++r) out.push_back(make_probability_vector(logits.row(r)));
  return out;
}

}  // namespace dtsnl
