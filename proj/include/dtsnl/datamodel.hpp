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
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dtsnl/error.hpp"

namespace dtsnl {

using ClassIndex = int;

/// Simplex membership tolerance used by every probability check.
inline constexpr double kSimplexTolerance = 1e-6;

inline std::vector<std::string> default_class_names() {
  return {"happiness", "sadness", "surprise", "fear", "anger", "disgust", "neutral"};
}

/// The closed set of categories a classifier predicts over.
class LabelSpace {
 public:
  LabelSpace() : LabelSpace(default_class_names()) {}

  explicit LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) throw InvalidArgument("label space needs at least 2 classes");
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw InvalidArgument("class names must be unique");
  }

  /// Classes named class0..class{n-1}.
  static LabelSpace with_size(int num_classes) {
    if (num_classes < 2) throw InvalidArgument("label space needs at least 2 classes");
    if (num_classes == 7) return LabelSpace();
    std::vector<std::string> names;
    for (int c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
    return LabelSpace(std::move(names));
  }

  int num_classes() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& class_names() const { return names_; }
  const std::string& name(ClassIndex c) const { return names_.at(static_cast<size_t>(c)); }
  bool contains(ClassIndex c) const { return c >= 0 && c < num_classes(); }

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> names_;
};

/// A point on the probability simplex. Construction validates membership.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;

  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidArgument("probability vector is empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw InvalidArgument("probability entry outside [0,1]: " + std::to_string(p));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance)
      throw InvalidArgument("probabilities sum to " + std::to_string(sum) + ", expected 1");
  }

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](ClassIndex c) const { return probs_[static_cast<size_t>(c)]; }
  std::span<const double> values() const { return probs_; }

  bool operator==(const ProbabilityVector&) const = default;

 private:
  std::vector<double> probs_;
};

/// Numerically stable softmax. Rejects non-finite logits.
template <typename T>
ProbabilityVector make_probability_vector(std::span<const T> logits) {
  if (logits.empty()) throw InvalidArgument("no logits");
  for (size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(static_cast<double>(logits[i])))
      throw InvalidArgument("non-finite logit at index " + std::to_string(i));
  }
  double top = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return ProbabilityVector(std::move(out));
}

inline ProbabilityVector make_probability_vector(const std::vector<double>& logits) {
  return make_probability_vector(std::span<const double>(logits));
}

/// Smallest index attaining the maximum.
inline ClassIndex argmax_class(const ProbabilityVector& p) {
  auto v = p.values();
  return static_cast<ClassIndex>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline ProbabilityVector average_distributions(const ProbabilityVector& a, const ProbabilityVector& b) {
  if (a.size() != b.size())
    throw InvalidArgument("cannot average distributions over " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " classes");
  std::vector<double> out(static_cast<size_t>(a.size()));
  for (int c = 0; c < a.size(); ++c) out[static_cast<size_t>(c)] = 0.5 * (a[c] + b[c]);
  return ProbabilityVector(std::move(out));
}

/// Hard pseudo-label with the gate decision taken when it was assigned.
struct PseudoLabel {
  std::string sample_id;
  ClassIndex class_index = 0;
  double confidence = 0.0;
  bool accepted = false;
};

}  // namespace dtsnl
