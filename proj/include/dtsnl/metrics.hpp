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

#include <span>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"

namespace dtsnl {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  int64_t total = 0;
};

/// Accuracy and macro-F1 (unweighted mean over classes present in the ground truth).
inline ClassificationMetrics classification_metrics(std::span<const ClassIndex> truth,
                                                    std::span<const ClassIndex> predicted, int num_classes) {
  if (truth.empty()) throw InvalidArgument("cannot score an empty evaluation set");
  DTSNL_CHECK(truth.size() == predicted.size(), "truth and predictions differ in length");
  std::vector<int64_t> tp(static_cast<size_t>(num_classes)), fp(tp.size()), fn(tp.size()), support(tp.size());
  int64_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const auto y = static_cast<size_t>(truth[i]);
    const auto q = static_cast<size_t>(predicted[i]);
    DTSNL_CHECK(y < tp.size() && q < tp.size(), "class index out of range");
    ++support[y];
    if (y == q) {
      ++tp[y];
      ++correct;
    } else {
      ++fp[q];
      ++fn[y];
    }
  }
  double f1_sum = 0.0;
  int present = 0;
  for (size_t c = 0; c < tp.size(); ++c) {
    if (support[c] == 0) continue;
    ++present;
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    f1_sum += denom > 0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  return {static_cast<double>(correct) / static_cast<double>(truth.size()), f1_sum / present,
          static_cast<int64_t>(truth.size())};
}

}  // namespace dtsnl
