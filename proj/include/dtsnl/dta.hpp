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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"

// Dynamic threshold adjustment: per-class confidence thresholds derived from the
// EMA teacher's correct predictions on labeled data, smoothed once per epoch.

namespace dtsnl {

struct DtaConfig {
  bool enabled = true;
  double mu = 0.9;
  double tau_init = 0.8;
  double ema_decay = 0.999;
  bool full_pass_stats = false;

  void validate() const {
    DTSNL_CHECK(mu >= 0.0 && mu <= 1.0, "dta.mu must be in [0,1]");
    DTSNL_CHECK(tau_init >= 0.0 && tau_init <= 1.0, "dta.tau_init must be in [0,1]");
    DTSNL_CHECK(ema_decay >= 0.0 && ema_decay <= 1.0, "dta.ema_decay must be in [0,1]");
  }
};

struct ThresholdState {
  std::vector<double> tau;
  int64_t epoch = 0;
  double mu = 0.9;

  static ThresholdState initial(int num_classes, double tau_init, double mu) {
    DTSNL_CHECK(tau_init >= 0.0 && tau_init <= 1.0, "initial threshold must be in [0,1]");
    return {std::vector<double>(static_cast<size_t>(num_classes), tau_init), 0, mu};
  }

  int num_classes() const { return static_cast<int>(tau.size()); }
  bool operator==(const ThresholdState&) const = default;
};

/// Per-class sums of confidences over correctly predicted labeled samples.
struct ClassConfidenceAccumulator {
  std::vector<double> sum;
  std::vector<int64_t> count;

  explicit ClassConfidenceAccumulator(int num_classes = 0)
      : sum(static_cast<size_t>(num_classes), 0.0), count(static_cast<size_t>(num_classes), 0) {}

  double mean(ClassIndex c) const { return sum[static_cast<size_t>(c)] / static_cast<double>(count[static_cast<size_t>(c)]); }
  void reset() {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
  }
  bool operator==(const ClassConfidenceAccumulator&) const = default;
};

/// teacher <- decay * teacher + (1 - decay) * student, elementwise.
template <typename T>
void ema_update(std::span<T> teacher, std::span<const T> student, double decay) {
  if (teacher.size() != student.size())
    throw InvalidArgument("teacher has " + std::to_string(teacher.size()) + " parameters, student " +
                          std::to_string(student.size()));
  DTSNL_CHECK(decay >= 0.0 && decay <= 1.0, "EMA decay must be in [0,1]");
  const T d = static_cast<T>(decay);
  const T s = static_cast<T>(1.0 - decay);
  for (size_t i = 0; i < teacher.size(); ++i) teacher[i] = d * teacher[i] + s * student[i];
}

/// EMA shadow of the student parameters. Never receives gradients.
template <typename T>
struct TeacherParams {
  std::vector<T> params;
  double decay = 0.999;

  void update(std::span<const T> student) { ema_update(std::span<T>(params), student, decay); }
};

/// Adds probs[y] to class y for every sample whose argmax equals its label y.
inline void collect_class_confidences(ClassConfidenceAccumulator& acc, std::span<const ProbabilityVector> teacher_probs,
                                      std::span<const ClassIndex> labels) {
  DTSNL_CHECK(teacher_probs.size() == labels.size(), "teacher predictions and labels differ in length");
  const int C = static_cast<int>(acc.sum.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    const ClassIndex y = labels[i];
    if (y < 0 || y >= C) throw InvalidArgument("label " + std::to_string(y) + " out of range");
    if (argmax_class(teacher_probs[i]) != y) continue;
    acc.sum[static_cast<size_t>(y)] += teacher_probs[i][y];
    acc.count[static_cast<size_t>(y)] += 1;
  }
}

/// Epoch-boundary update: classes with statistics blend toward their fresh mean
/// confidence with weight (1 - mu); classes without statistics keep their threshold.
/// Resets `acc`.
inline ThresholdState finalize_thresholds(const ThresholdState& state, ClassConfidenceAccumulator& acc) {
  DTSNL_CHECK(acc.sum.size() == state.tau.size(), "accumulator and thresholds differ in class count");
  ThresholdState next = state;
  for (size_t c = 0; c < state.tau.size(); ++c) {
    if (acc.count[c] == 0) continue;
    const double fresh = acc.sum[c] / static_cast<double>(acc.count[c]);
    next.tau[c] = state.mu * state.tau[c] + (1.0 - state.mu) * fresh;
  }
  next.epoch = state.epoch + 1;
  acc.reset();
  return next;
}

/// The argmax class is accepted iff its probability strictly exceeds that class's threshold.
inline PseudoLabel accept_pseudo_label(const ProbabilityVector& p_avg, const ThresholdState& state,
                                       std::string sample_id = {}) {
  DTSNL_CHECK(p_avg.size() == state.num_classes(), "distribution and thresholds differ in class count");
  PseudoLabel pl;
  pl.sample_id = std::move(sample_id);
  pl.class_index = argmax_class(p_avg);
  pl.confidence = p_avg[pl.class_index];
  pl.accepted = pl.confidence > state.tau[static_cast<size_t>(pl.class_index)];
  return pl;
}

}  // namespace dtsnl
