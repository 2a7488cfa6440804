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
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"

// Selective negative learning. Samples rejected by the threshold gate still
// tell us which classes they almost certainly are not; those complementary
// labels accumulate per sample and drive a loss that pushes their mass to zero.

namespace dtsnl {

struct SnlConfig {
  bool enabled = true;
  double delta = 0.05;
  bool log_form = false;

  void validate() const { DTSNL_CHECK(delta >= 0.0 && delta < 1.0, "snl.delta must be in [0,1)"); }
};

/// Persistent per-sample sets of negated classes. A set never reaches C entries.
class ComplementaryLabelStore {
 public:
  explicit ComplementaryLabelStore(int num_classes = 7) : num_classes_(num_classes) {}

  int num_classes() const { return num_classes_; }

  const std::set<ClassIndex>& get(const std::string& sample_id) const {
    static const std::set<ClassIndex> kEmpty;
    auto it = sets_.find(sample_id);
    return it == sets_.end() ? kEmpty : it->second;
  }

  /// Unions `negatives` into the sample's set in the given order, ignoring any
  /// that would grow it past C-1.
  void update(const std::string& sample_id, std::span<const ClassIndex> negatives) {
    if (negatives.empty()) return;
    auto& s = sets_[sample_id];
    for (ClassIndex c : negatives) {
      DTSNL_CHECK(c >= 0 && c < num_classes_, "complementary label out of range");
      if (s.count(c)) continue;
      if (static_cast<int>(s.size()) >= num_classes_ - 1) break;
      s.insert(c);
    }
  }

  size_t total_negatives() const {
    size_t n = 0;
    for (const auto& [id, s] : sets_) n += s.size();
    return n;
  }

  const std::map<std::string, std::set<ClassIndex>>& entries() const { return sets_; }
  std::map<std::string, std::set<ClassIndex>>& entries() { return sets_; }

  bool operator==(const ComplementaryLabelStore&) const = default;

 private:
  int num_classes_;
  std::map<std::string, std::set<ClassIndex>> sets_;
};

/// Repeatedly negates the least probable remaining class while its probability is
/// <= delta, never leaving fewer than one candidate. Classes already negated are
/// excluded from consideration. Returns the new classes in selection order.
inline std::vector<ClassIndex> extract_complementary(const ProbabilityVector& p, const std::set<ClassIndex>& already,
                                                     double delta) {
  const int C = p.size();
  std::vector<bool> masked(static_cast<size_t>(C), false);
  int remaining = C;
  for (ClassIndex c : already) {
    DTSNL_CHECK(c >= 0 && c < C, "negated class out of range");
    masked[static_cast<size_t>(c)] = true;
    --remaining;
  }
  std::vector<ClassIndex> picked;
  while (remaining > 1) {
    ClassIndex arg = -1;
    for (int c = 0; c < C; ++c)
      if (!masked[static_cast<size_t>(c)] && (arg < 0 || p[c] < p[arg])) arg = c;
    if (p[arg] > delta) break;
    picked.push_back(arg);
    masked[static_cast<size_t>(arg)] = true;
    --remaining;
  }
  return picked;
}

/// -sum_{c in negated} (1 - p_c), or -sum log(1 - p_c) in log form.
inline double negative_learning_loss(const ProbabilityVector& p, const std::set<ClassIndex>& negated,
                                     bool log_form = false) {
  double s = 0.0;
  for (ClassIndex c : negated) {
    DTSNL_CHECK(c >= 0 && c < p.size(), "negated class out of range");
    s -= log_form ? std::log(std::max(1.0 - p[c], 1e-12)) : 1.0 - p[c];
  }
  return s;
}

/// dL/dp for negative_learning_loss.
inline std::vector<double> negative_learning_grad(const ProbabilityVector& p, const std::set<ClassIndex>& negated,
                                                  bool log_form = false) {
  std::vector<double> g(static_cast<size_t>(p.size()), 0.0);
  for (ClassIndex c : negated) g[static_cast<size_t>(c)] = log_form ? 1.0 / std::max(1.0 - p[c], 1e-12) : 1.0;
  return g;
}

}  // namespace dtsnl
