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
#include <vector>

#include "dtsnl/error.hpp"

namespace dtsnl {

/// Adam with bias correction. Moments share the parameter layout.
template <typename T>
struct Adam {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<T> m;
  std::vector<T> v;

  void reset(size_t n) {
    m.assign(n, T(0));
    v.assign(n, T(0));
    step = 0;
  }

  void update(std::span<T> params, std::span<const T> grads) {
    DTSNL_CHECK(params.size() == grads.size() && params.size() == m.size(), "optimizer state size mismatch");
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T alpha = static_cast<T>(lr * std::sqrt(c2) / c1);
    const T e = static_cast<T>(eps * std::sqrt(c2));
    for (size_t i = 0; i < params.size(); ++i) {
      const T g = grads[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      params[i] -= alpha * m[i] / (std::sqrt(v[i]) + e);
    }
  }
};

}  // namespace dtsnl
