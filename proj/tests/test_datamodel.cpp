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

#include <cmath>
#include <limits>
#include <sstream>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/image.hpp"
#include "dtsnl/manifest.hpp"
#include "support.hpp"

using namespace dtsnl;
using dtsnl::testing::random_simplex;

TEST(LabelSpace, DefaultsToSevenBasicExpressions) {
  LabelSpace s;
  ASSERT_EQ(s.num_classes(), 7);
  EXPECT_EQ(s.name(0), "happiness");
  EXPECT_EQ(s.name(3), "fear");
  EXPECT_EQ(s.name(6), "neutral");
}

TEST(LabelSpace, RejectsDegenerateSpaces) {
  EXPECT_THROW(LabelSpace(std::vector<std::string>{"only"}), InvalidArgument);
  EXPECT_THROW(LabelSpace(std::vector<std::string>{"a", "b", "a"}), InvalidArgument);
  EXPECT_EQ(LabelSpace::with_size(3).num_classes(), 3);
}

TEST(Softmax, ZeroLogitsGiveUniform) {
  auto p = make_probability_vector(std::vector<double>(7, 0.0));
  for (int c = 0; c < 7; ++c) EXPECT_NEAR(p[c], 1.0 / 7.0, 1e-15);
}

TEST(Softmax, DominantLogit) {
  auto p = make_probability_vector(std::vector<double>{10, -10, -10, -10, -10, -10, -10});
  EXPECT_GT(p[0], 0.999);
  for (int c = 1; c < 7; ++c) EXPECT_LT(p[c], 1e-4);
}

TEST(Softmax, RejectsNonFinite) {
  std::vector<double> z(7, 0.0);
  z[2] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(make_probability_vector(z), InvalidArgument);
  z[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(make_probability_vector(z), InvalidArgument);
}

TEST(Softmax, LargeLogitsStayFinite) {
  auto p = make_probability_vector(std::vector<double>{1000, 999, -1000});
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-12);
}

TEST(Softmax, ShiftInvarianceOfArgmax) {
  Rng rng(11);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> z(7);
    for (double& v : z) v = normal01(rng) * 3.0;
    std::vector<double> shifted = z;
    const double k = normal01(rng) * 50.0;
    for (double& v : shifted) v += k;
    EXPECT_EQ(argmax_class(make_probability_vector(z)), argmax_class(make_probability_vector(shifted)));
  }
}

TEST(ProbabilityVector, ValidatesSimplex) {
  EXPECT_THROW(ProbabilityVector({0.5, 0.6}), InvalidArgument);
  EXPECT_THROW(ProbabilityVector({1.2, -0.2}), InvalidArgument);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{}), InvalidArgument);
  EXPECT_NO_THROW(ProbabilityVector({0.5, 0.5 + 5e-7}));
}

TEST(Argmax, TieBreaksToSmallestIndex) {
  EXPECT_EQ(argmax_class(ProbabilityVector({0.5, 0.5, 0, 0, 0, 0, 0})), 0);
  EXPECT_EQ(argmax_class(ProbabilityVector({0.1, 0.1, 0.6, 0.1, 0.05, 0.03, 0.02})), 2);
  EXPECT_EQ(argmax_class(ProbabilityVector({0, 0, 0, 0, 0, 0, 1})), 6);
}

TEST(AverageDistributions, Examples) {
  auto a = average_distributions(ProbabilityVector({1, 0, 0, 0, 0, 0, 0}), ProbabilityVector({0, 1, 0, 0, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  ProbabilityVector p({0.4, 0.6, 0, 0, 0, 0, 0});
  EXPECT_EQ(average_distributions(p, p), p);
  auto b = average_distributions(p, ProbabilityVector({0.2, 0.8, 0, 0, 0, 0, 0}));
  EXPECT_NEAR(b[0], 0.3, 1e-15);
  EXPECT_NEAR(b[1], 0.7, 1e-15);
}

TEST(AverageDistributions, RejectsClassCountMismatch) {
  EXPECT_THROW(average_distributions(ProbabilityVector({1, 0}), ProbabilityVector({1, 0, 0})), InvalidArgument);
}

TEST(AverageDistributions, CommutativeAndClosedOnSimplex) {
  Rng rng(3);
  for (int t = 0; t < 10000; ++t) {
    auto p = random_simplex(rng, 7), q = random_simplex(rng, 7);
    auto pq = average_distributions(p, q), qp = average_distributions(q, p);
    EXPECT_EQ(pq, qp);
    double s = 0.0;
    for (double v : pq.values()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      s += v;
    }
    ASSERT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Manifest, RoundTripsThroughJsonLines) {
  DatasetManifest m(LabelSpace(), {{"a.ppm", 2, Split::kLabeled}, {"b.ppm", std::nullopt, Split::kUnlabeled},
                                   {"c.ppm", 6, Split::kEval}});
  std::istringstream in(m.to_jsonl());
  auto back = DatasetManifest::parse(in, "/tmp");
  ASSERT_EQ(back.records().size(), 3u);
  EXPECT_EQ(back.records()[0].label, 2);
  EXPECT_FALSE(back.records()[1].label.has_value());
  EXPECT_EQ(back.records()[2].split, Split::kEval);
  EXPECT_EQ(back.count(Split::kLabeled), 1u);
}

TEST(Manifest, EnforcesLabelPresenceBySplit) {
  EXPECT_THROW(DatasetManifest(LabelSpace(), {{"a", std::nullopt, Split::kLabeled}}), InvalidArgument);
  EXPECT_THROW(DatasetManifest(LabelSpace(), {{"a", std::nullopt, Split::kEval}}), InvalidArgument);
  EXPECT_THROW(DatasetManifest(LabelSpace(), {{"a", 1, Split::kUnlabeled}}), InvalidArgument);
  EXPECT_THROW(DatasetManifest(LabelSpace(), {{"a", 7, Split::kLabeled}}), InvalidArgument);
}

TEST(Manifest, UnresolvablePathIsReported) {
  DatasetManifest m(LabelSpace(), {{"definitely-missing.ppm", 0, Split::kLabeled}}, "/nonexistent");
  EXPECT_THROW(m.check_paths(), IoError);
}

TEST(Image, PnmRoundTripIsExactOnByteLevels) {
  dtsnl::testing::TempDir dir("pnm");
  Image img(3, 5, 4);
  Rng rng(1);
  for (float& v : img.data()) v = static_cast<float>(uniform_index(rng, 256)) / 255.0f;
  write_pnm(dir.path() / "x.ppm", img);
  Image back = read_pnm(dir.path() / "x.ppm");
  ASSERT_TRUE(back.same_shape(img));
  for (size_t i = 0; i < img.data().size(); ++i) EXPECT_EQ(to_byte(back.data()[i]), to_byte(img.data()[i]));
}
