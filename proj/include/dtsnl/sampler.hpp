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
#include <string>
#include <vector>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/random.hpp"

namespace dtsnl {

/// Class-balanced sampling with replacement: a class uniformly, then a member
/// of that class uniformly. Every class must own at least one sample.
class BalancedSampler {
 public:
  BalancedSampler(std::span<const ClassIndex> labels, const LabelSpace& space)
      : by_class_(static_cast<size_t>(space.num_classes())) {
    for (size_t i = 0; i < labels.size(); ++i) {
      DTSNL_CHECK(space.contains(labels[i]), "label out of range in labeled set");
      by_class_[static_cast<size_t>(labels[i])].push_back(i);
    }
    for (int c = 0; c < space.num_classes(); ++c)
      if (by_class_[static_cast<size_t>(c)].empty())
        throw InvalidArgument("class '" + space.name(c) + "' has no labeled samples");
  }

  /// Indices into the label list given at construction.
  std::vector<size_t> sample(size_t count, Rng& rng) const {
    std::vector<size_t> out;
    out.reserve(count);
    for (size_t k = 0; k < count; ++k) {
      const auto& members = by_class_[uniform_index(rng, by_class_.size())];
      out.push_back(members[uniform_index(rng, members.size())]);
    }
    return out;
  }

  const std::vector<std::vector<size_t>>& members() const { return by_class_; }

 private:
  std::vector<std::vector<size_t>> by_class_;
};

inline std::vector<size_t> balanced_sample(std::span<const ClassIndex> labels, const LabelSpace& space, size_t count,
                                           Rng& rng) {
  return BalancedSampler(labels, space).sample(count, rng);
}

}  // namespace dtsnl
