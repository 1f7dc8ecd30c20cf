/*
 * Copyright 2026 The ccfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ccfl/param_vec.h"

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ccfl/errors.h"
#include "ccfl/rng.h"

namespace ccfl {
namespace {

ParamVec V(std::vector<double> v) { return ParamVec(std::move(v)); }

TEST(ParamVecTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(V({}), InvalidArgument);
  EXPECT_THROW(V({1.0, std::nan("")}), NumericError);
  EXPECT_THROW(V({std::numeric_limits<double>::infinity()}), NumericError);
}

TEST(ParamVecTest, Add) {
  EXPECT_EQ(add(V({1, 2}), V({3, 4})), V({4, 6}));
  const ParamVec v = V({0.3, -1.7, 2.5});
  EXPECT_EQ(add(v, ParamVec::Zeros(3)), v);
  EXPECT_EQ(add(V({0.5, -0.5}), V({-0.5, 0.5})), V({0, 0}));
  EXPECT_THROW(add(V({1}), V({1, 2})), DimensionError);
}

TEST(ParamVecTest, SubAndScale) {
  EXPECT_EQ(sub(V({4, 6}), V({3, 4})), V({1, 2}));
  EXPECT_EQ(scale(V({2, 4}), 0.5), V({1, 2}));
  const ParamVec v = V({0.3, -1.7});
  EXPECT_EQ(scale(v, 1.0), v);
  EXPECT_EQ(scale(v, 0.0), ParamVec::Zeros(2));
  EXPECT_THROW(scale(v, std::nan("")), NumericError);
}

TEST(ParamVecTest, NormsAndDistances) {
  EXPECT_EQ(l2_dist_sq(V({0, 0}), V({3, 4})), 25.0);
  const ParamVec v = V({0.3, -1.7});
  EXPECT_EQ(l2_dist_sq(v, v), 0.0);
  EXPECT_EQ(l2_dist_sq(V({1, 1}), V({-1, -1})), 8.0);
  EXPECT_EQ(norm_sq(V({3, 4})), 25.0);
  EXPECT_EQ(dot(V({1, 2}), V({3, 4})), 11.0);
}

TEST(ParamVecTest, Cosine) {
  EXPECT_EQ(cosine(V({1, 0}), V({0, 1})), 0.0);
  const ParamVec v = V({0.3, -1.7, 2.2});
  EXPECT_NEAR(cosine(v, scale(v, 3.0)), 1.0, 1e-15);
  EXPECT_NEAR(cosine(v, scale(v, -1.0)), -1.0, 1e-15);
  EXPECT_LE(cosine(v, v), 1.0);
  EXPECT_THROW(cosine(v, ParamVec::Zeros(3)), InvalidArgument);
}

TEST(RngTest, StreamsAreReproducibleAndDistinct) {
  RngStream a = RngStream::For(7, StreamPurpose::kTrain, 1, 2);
  RngStream b = RngStream::For(7, StreamPurpose::kTrain, 1, 2);
  RngStream c = RngStream::For(7, StreamPurpose::kSchedule, 1, 2);
  RngStream d = RngStream::For(7, StreamPurpose::kTrain, 2, 1);
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    firsts.insert(x);
  }
  EXPECT_NE(a.key(), c.key());
  EXPECT_NE(a.key(), d.key());
  EXPECT_EQ(firsts.size(), 100u);
}

TEST(RngTest, UniformAndNormalMoments) {
  RngStream rng = RngStream::For(3, StreamPurpose::kData);
  const int n = 100000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  // 5 standard errors.
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(RngTest, UniformIntCoversRange) {
  RngStream rng(11);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_int(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 5 * std::sqrt(10000 * 6.0 / 7));
}

}  // namespace
}  // namespace ccfl
