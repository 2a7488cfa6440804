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
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/random.hpp"

namespace dtsnl::testing {

/// Uniform draw from the simplex (normalized exponentials).
inline ProbabilityVector random_simplex(Rng& rng, int C) {
  std::vector<double> v(static_cast<size_t>(C));
  double s = 0.0;
  for (double& x : v) s += x = -std::log(1.0 - uniform01(rng));
  for (double& x : v) x /= s;
  return ProbabilityVector(v);
}

/// Simplex vector with a tunable spread: some entries pushed near zero.
inline ProbabilityVector random_peaked_simplex(Rng& rng, int C, double temperature) {
  std::vector<double> logits(static_cast<size_t>(C));
  for (double& z : logits) z = normal01(rng) * temperature;
  return make_probability_vector(logits);
}

/// |a - b| relative to the larger magnitude, with an absolute floor for
/// gradients that are numerically zero.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Fourth-order central differences of f at x. Roundoff stays near 1e-12 for
/// O(1) objectives, which keeps tiny gradient entries checkable.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double eps = 1e-4) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    auto at = [&](double h) {
      x[i] = x0 + h;
      return f(x);
    };
    const double f2p = at(2 * eps), f1p = at(eps), f1m = at(-eps), f2m = at(-2 * eps);
    x[i] = x0;
    g[i] = (f2m - 8.0 * f1m + 8.0 * f1p - f2p) / (12.0 * eps);
  }
  return g;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("dtsnl-" + tag + "-" + std::to_string(std::hash<std::string>{}(tag) ^ static_cast<size_t>(::getpid())));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace dtsnl::testing
