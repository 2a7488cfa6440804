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
#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "dtsnl/losses.hpp"
#include "dtsnl/snl.hpp"
#include "support.hpp"

using namespace dtsnl;
using dtsnl::testing::numeric_gradient;
using dtsnl::testing::random_peaked_simplex;
using dtsnl::testing::rel_error;

namespace {

// Sort ascending, take the maximal prefix of entries <= delta, capped at C-1.
std::vector<ClassIndex> brute_force_complementary(const ProbabilityVector& p, double delta) {
  std::vector<ClassIndex> order(static_cast<size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ClassIndex a, ClassIndex b) { return p[a] < p[b]; });
  std::vector<ClassIndex> out;
  for (ClassIndex c : order) {
    if (static_cast<int>(out.size()) == p.size() - 1 || p[c] > delta) break;
    out.push_back(c);
  }
  return out;
}

}  // namespace

TEST(Extract, HandIteratedExample) {
  ProbabilityVector p({0.40, 0.30, 0.20, 0.04, 0.03, 0.02, 0.01});
  EXPECT_EQ(extract_complementary(p, {}, 0.05), (std::vector<ClassIndex>{6, 5, 4, 3}));
}

TEST(Extract, UniformYieldsNothing) {
  EXPECT_TRUE(extract_complementary(ProbabilityVector(std::vector<double>(7, 1.0 / 7)), {}, 0.05).empty());
}

TEST(Extract, CapLeavesArgmaxUntouched) {
  ProbabilityVector p({0.01, 0.01, 0.94, 0.01, 0.01, 0.01, 0.01});
  auto picked = extract_complementary(p, {}, 0.05);
  EXPECT_EQ(picked.size(), 6u);
  EXPECT_EQ(std::count(picked.begin(), picked.end(), 2), 0);
  // even when every entry is below delta one class survives
  ProbabilityVector flat(std::vector<double>(7, 1.0 / 7));
  auto all = extract_complementary(flat, {}, 0.5);
  EXPECT_EQ(all.size(), 6u);
  EXPECT_EQ(std::count(all.begin(), all.end(), 6), 0);  // ties go to the smallest index first
}

TEST(Extract, SkipsAlreadyNegatedClasses) {
  ProbabilityVector p({0.40, 0.30, 0.20, 0.04, 0.03, 0.02, 0.01});
  EXPECT_EQ(extract_complementary(p, {6, 5}, 0.05), (std::vector<ClassIndex>{4, 3}));
  EXPECT_TRUE(extract_complementary(p, {0, 1, 2, 3, 4, 5}, 0.5).empty());
}

TEST(Extract, MatchesBruteForceOracle) {
  Rng rng(1);
  for (double delta : {0.01, 0.05, 0.1})
    for (int t = 0; t < 10000; ++t) {
      auto p = random_peaked_simplex(rng, 7, 0.5 + 3.0 * uniform01(rng));
      auto got = extract_complementary(p, {}, delta);
      ASSERT_EQ(got, brute_force_complementary(p, delta));
      ASSERT_LE(got.size(), 6u);
      for (ClassIndex c : got) ASSERT_LE(p[c], delta);
      if (p[argmax_class(p)] > delta) {
        ASSERT_EQ(std::count(got.begin(), got.end(), argmax_class(p)), 0);
      }
    }
}

TEST(Store, UnionIdempotenceAndCap) {
  ComplementaryLabelStore store(7);
  std::vector<ClassIndex> a{6, 5};
  store.update("x", a);
  EXPECT_EQ(store.get("x"), (std::set<ClassIndex>{5, 6}));
  std::vector<ClassIndex> b{5};
  store.update("x", b);
  EXPECT_EQ(store.get("x"), (std::set<ClassIndex>{5, 6}));
  std::vector<ClassIndex> c{0, 1, 2, 3};
  store.update("x", c);
  EXPECT_EQ(store.get("x").size(), 6u);
  std::vector<ClassIndex> d{4};
  store.update("x", d);
  EXPECT_EQ(store.get("x").size(), 6u);
  EXPECT_TRUE(store.get("unknown").empty());
  EXPECT_EQ(store.total_negatives(), 6u);
}

TEST(NegativeLoss, Examples) {
  ProbabilityVector uniform(std::vector<double>(7, 1.0 / 7));
  EXPECT_EQ(negative_learning_loss(uniform, {}), 0.0);
  EXPECT_NEAR(negative_learning_loss(uniform, {2}), -6.0 / 7.0, 1e-12);
  EXPECT_NEAR(negative_learning_loss(ProbabilityVector({0.5, 0.5, 0, 0, 0, 0, 0}), {2}), -1.0, 1e-15);
  EXPECT_NEAR(negative_learning_loss(uniform, {2}, true), -std::log(6.0 / 7.0), 1e-12);
}

TEST(NegativeLoss, AddingANegatedClassNeverIncreasesLoss) {
  Rng rng(2);
  for (int t = 0; t < 2000; ++t) {
    auto p = random_peaked_simplex(rng, 7, 2.0);
    std::set<ClassIndex> s;
    double prev = negative_learning_loss(p, s);
    for (int k = 0; k < 6; ++k) {
      s.insert(static_cast<ClassIndex>(uniform_index(rng, 7)));
      const double cur = negative_learning_loss(p, s);
      ASSERT_LE(cur, prev + 1e-15);
      prev = cur;
    }
  }
}

TEST(NegativeLoss, LogitGradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (bool log_form : {false, true})
    for (int t = 0; t < 20; ++t) {
      std::vector<double> z(7);
      for (double& v : z) v = normal01(rng) * 2.0;
      std::set<ClassIndex> neg;
      const int k = 1 + static_cast<int>(uniform_index(rng, 6));
      while (static_cast<int>(neg.size()) < k) neg.insert(static_cast<ClassIndex>(uniform_index(rng, 7)));
      auto f = [&](const std::vector<double>& logits) {
        return negative_learning_loss(make_probability_vector(logits), neg, log_form);
      };
      auto p = make_probability_vector(z);
      auto analytic = softmax_backward(p, negative_learning_grad(p, neg, log_form));
      auto num = numeric_gradient(f, z);
      for (size_t i = 0; i < z.size(); ++i) ASSERT_LT(rel_error(analytic[i], num[i]), 1e-4) << analytic[i] << " " << num[i] << " t=" << t << " log=" << log_form;
    }
}
