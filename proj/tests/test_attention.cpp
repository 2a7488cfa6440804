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

#include <vector>

#include "dtsnl/attention.hpp"
#include "dtsnl/network.hpp"
#include "support.hpp"

using namespace dtsnl;
using dtsnl::testing::numeric_gradient;
using dtsnl::testing::rel_error;

namespace {

Tensor4<double> random_tensor(Rng& rng, int n, int c, int h, int w, double scale = 1.0) {
  Tensor4<double> t(n, c, h, w);
  for (double& v : t.data) v = normal01(rng) * scale;
  return t;
}

std::vector<double> random_params(Rng& rng, size_t n, double scale) {
  std::vector<double> p(n);
  for (double& v : p) v = normal01(rng) * scale;
  return p;
}

}  // namespace

TEST(LanetScore, ZeroInputAndParamsGiveOneHalf) {
  AttentionBank bank(8, 6, 16);
  std::vector<double> params(bank.param_count(), 0.0);
  auto fwd = lanet_score(Tensor4<double>(1, 8, 7, 7), bank, std::span<const double>(params));
  ASSERT_EQ(fwd.scores.n, 1);
  EXPECT_EQ(fwd.scores.c, 6);
  EXPECT_EQ(fwd.scores.h, 7);
  EXPECT_EQ(fwd.scores.w, 7);
  for (double v : fwd.scores.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(LanetScore, HiddenWidthFloorsAtOne) {
  EXPECT_EQ(AttentionBank(8, 6, 16).hidden(), 1);
  EXPECT_EQ(AttentionBank(64, 6, 16).hidden(), 4);
  EXPECT_EQ(AttentionBank(40, 6, 16).hidden(), 2);
}

TEST(LanetScore, ScoresStrictlyInsideUnitInterval) {
  Rng rng(1);
  AttentionBank bank(16, 6, 4);
  for (int t = 0; t < 20; ++t) {
    auto p = random_params(rng, bank.param_count(), 1.0);
    auto fwd = lanet_score(random_tensor(rng, 2, 16, 5, 5), bank, std::span<const double>(p));
    for (double v : fwd.scores.data) {
      ASSERT_GT(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  }
}

TEST(LanetScore, RejectsChannelMismatch) {
  AttentionBank bank(8, 2, 4);
  std::vector<double> p(bank.param_count());
  EXPECT_THROW(lanet_score(Tensor4<double>(1, 4, 3, 3), bank, std::span<const double>(p)), InvalidArgument);
}

TEST(DropAndMax, ZeroProbabilityIsPlainMax) {
  Rng rng(2);
  auto s = random_tensor(rng, 50, 6, 3, 3);
  for (double& v : s.data) v = 1.0 / (1.0 + std::exp(-v));
  auto am = drop_and_max(s, 0.0, rng, true);
  for (int i = 0; i < s.n; ++i)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        double m = 0.0;
        for (int b = 0; b < 6; ++b) m = std::max(m, s.at(i, b, y, x));
        ASSERT_EQ(am.map.at(i, 0, y, x), m);
      }
}

TEST(DropAndMax, UnitProbabilityAlwaysZeroesSelectedBranch) {
  Rng rng(3);
  auto d = draw_drop_decisions(1000, 6, 1.0, rng);
  for (const auto& e : d) {
    EXPECT_TRUE(e.dropped);
    EXPECT_GE(e.branch, 0);
    EXPECT_LT(e.branch, 6);
  }
  // with every score equal, only a zeroed branch can differ, so the max is unaffected
  Tensor4<double> s(1, 2, 1, 1);
  s.at(0, 0, 0, 0) = 0.9;
  s.at(0, 1, 0, 0) = 0.2;
  auto am = drop_and_max(s, {DropDecision{0, true}});
  EXPECT_DOUBLE_EQ(am.map.at(0, 0, 0, 0), 0.2);
  EXPECT_EQ(am.winner[0], 1);
}

TEST(DropAndMax, EmpiricalDropRateAtOneHalf) {
  Rng rng(4);
  auto d = draw_drop_decisions(10000, 6, 0.5, rng);
  int dropped = 0;
  std::vector<int> per_branch(6);
  for (const auto& e : d) {
    dropped += e.dropped;
    ++per_branch[static_cast<size_t>(e.branch)];
  }
  EXPECT_GE(dropped / 10000.0, 0.48);
  EXPECT_LE(dropped / 10000.0, 0.52);
  for (int c : per_branch) EXPECT_NEAR(c / 10000.0, 1.0 / 6.0, 0.02);
}

TEST(DropAndMax, DropNeverRaisesTheFusedMap) {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    auto s = random_tensor(rng, 3, 4, 2, 2);
    for (double& v : s.data) v = 1.0 / (1.0 + std::exp(-v));
    auto full = drop_and_max(s, {});
    auto dropped = drop_and_max(s, 0.7, rng, true);
    for (size_t k = 0; k < full.map.data.size(); ++k) ASSERT_LE(dropped.map.data[k], full.map.data[k]);
  }
}

TEST(DropAndMax, EvalModeIgnoresRandomStream) {
  Rng rng(6);
  auto s = random_tensor(rng, 4, 6, 3, 3);
  Rng a(1), b(2);
  auto x = drop_and_max(s, 0.5, a, false);
  auto y = drop_and_max(s, 0.5, b, false);
  EXPECT_EQ(x.map.data, y.map.data);
  EXPECT_EQ(a, Rng(1));
}

TEST(Fuse, IdentityAnnihilatorAndScaling) {
  Rng rng(7);
  auto f = random_tensor(rng, 2, 3, 4, 4);
  EXPECT_EQ(fuse(f, Tensor4<double>(2, 1, 4, 4, 1.0)).data, f.data);
  for (double v : fuse(f, Tensor4<double>(2, 1, 4, 4, 0.0)).data) EXPECT_EQ(v, 0.0);
  auto half = fuse(f, Tensor4<double>(2, 1, 4, 4, 0.5));
  for (size_t i = 0; i < f.data.size(); ++i) EXPECT_DOUBLE_EQ(half.data[i], 0.5 * f.data[i]);
  EXPECT_THROW(fuse(f, Tensor4<double>(2, 1, 3, 4)), InvalidArgument);
}

// d(sum(w . fuse(F, drop_and_max(lanet_score(F)))))/d(bank params and F) with frozen drops.
TEST(AttentionGradient, MatchesFiniteDifferences) {
  Rng rng(8);
  AttentionBank bank(4, 2, 2);
  for (int t = 0; t < 20; ++t) {
    const auto F = random_tensor(rng, 2, 4, 3, 3);
    const auto W = random_tensor(rng, 2, 4, 3, 3);
    const auto params = random_params(rng, bank.param_count(), 0.8);
    const std::vector<DropDecision> frozen = draw_drop_decisions(2, 2, 0.5, rng);
    auto objective = [&](const std::vector<double>& p, const Tensor4<double>& feat) {
      auto sc = lanet_score(feat, bank, std::span<const double>(p));
      auto am = drop_and_max(sc.scores, frozen);
      auto out = fuse(feat, am.map);
      double s = 0;
      for (size_t i = 0; i < out.data.size(); ++i) s += W.data[i] * out.data[i];
      return s;
    };
    auto sc = lanet_score(F, bank, std::span<const double>(params));
    auto am = drop_and_max(sc.scores, frozen);
    auto [dF_direct, dA] = fuse_backward(F, am.map, W);
    auto dS = drop_and_max_backward(am, dA, bank.num_branches);
    std::vector<double> grads(params.size(), 0.0);
    auto dF_score = lanet_score_backward(F, bank, std::span<const double>(params), sc, dS, std::span<double>(grads));

    auto num_p = numeric_gradient([&](const std::vector<double>& p) { return objective(p, F); }, params);
    for (size_t i = 0; i < params.size(); ++i) ASSERT_LT(rel_error(grads[i], num_p[i]), 1e-4) << "param " << i;

    auto num_f = numeric_gradient(
        [&](const std::vector<double>& x) {
          Tensor4<double> feat = F;
          feat.data = x;
          return objective(params, feat);
        },
        F.data);
    for (size_t i = 0; i < F.data.size(); ++i)
      ASSERT_LT(rel_error(dF_direct.data[i] + dF_score.data[i], num_f[i]), 1e-4) << "feature " << i;
  }
}

TEST(NetworkGradient, FullModelWithFrozenDropsMatchesFiniteDifferences) {
  Rng rng(9);
  ModelConfig cfg;
  cfg.in_channels = 2;
  cfg.channels = {3, 4};
  cfg.num_classes = 3;
  cfg.attention = {true, 2, 2, 0.5};
  Network<double> net(cfg);
  for (int t = 0; t < 5; ++t) {
    auto params = net.init_params(static_cast<uint64_t>(t));
    for (double& v : params) v += normal01(rng) * 0.05;
    const auto x = random_tensor(rng, 2, 2, 6, 6);
    const auto frozen = draw_drop_decisions(2, 2, 0.5, rng);
    Matrix<double> W(2, 3);
    for (double& v : W.data) v = normal01(rng);
    ForwardMode mode{true, nullptr, &frozen, 0.5};
    auto objective = [&](const std::vector<double>& p) {
      auto logits = net.forward(x, std::span<const double>(p), mode);
      double s = 0;
      for (size_t i = 0; i < logits.data.size(); ++i) s += W.data[i] * logits.data[i];
      return s;
    };
    Network<double>::Cache cache;
    net.forward(x, std::span<const double>(params), mode, &cache);
    std::vector<double> grads(params.size(), 0.0);
    net.backward(cache, W, std::span<const double>(params), std::span<double>(grads));
    auto num = numeric_gradient(objective, params);
    for (size_t i = 0; i < params.size(); ++i) ASSERT_LT(rel_error(grads[i], num[i]), 1e-4) << "param " << i;
  }
}

TEST(Network, EvalForwardIsDeterministicAndShaped) {
  ModelConfig cfg;
  cfg.channels = {4, 8};
  cfg.attention.reduction = 4;
  Network<float> net(cfg);
  auto p = net.init_params(1);
  Tensor4<float> x(3, 3, 8, 8, 0.3f);
  auto a = net.forward(x, std::span<const float>(p), ForwardMode::eval());
  auto b = net.forward(x, std::span<const float>(p), ForwardMode::eval());
  EXPECT_EQ(a.rows, 3);
  EXPECT_EQ(a.cols, 7);
  EXPECT_EQ(a.data, b.data);
}
