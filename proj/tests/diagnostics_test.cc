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

#include "ccfl/diagnostics.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ccfl/data.h"
#include "ccfl/errors.h"
#include "ccfl/objective.h"
#include "ccfl/protocol.h"

namespace ccfl {
namespace {

namespace fs = std::filesystem;

Objective DiagQuad(std::vector<double> a, std::vector<double> b,
                   double noise = 0.0) {
  const std::size_t d = a.size();
  std::vector<double> m(d * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) m[j * d + j] = a[j];
  return Objective::Quadratic(std::move(m), std::move(b), noise);
}

std::string TempPath(const std::string& name) {
  return (fs::temp_directory_path() / ("ccfl_diag_" + name)).string();
}

TEST(ShadowErrorTest, PerfectEstimates) {
  const ParamVec x({1.0, -1.0});
  const ParamVec d({0.2, 0.3});
  const auto e = shadow_estimation_error(d, add(x, d), x, d);
  EXPECT_EQ(*e.e3, 0.0);
  EXPECT_EQ(*e.e2, 0.0);
  EXPECT_NEAR(*e.c3, 1.0, 1e-15);
  EXPECT_NEAR(*e.c2, 1.0, 1e-15);
}

TEST(ShadowErrorTest, Values) {
  const ParamVec x({0.0, 0.0});
  const ParamVec truth({1.0, 0.0});
  const auto e = shadow_estimation_error(ParamVec({0.0, 1.0}),
                                         ParamVec({-1.0, 0.0}), x, truth);
  EXPECT_EQ(*e.e3, 2.0);
  EXPECT_EQ(*e.c3, 0.0);
  EXPECT_EQ(*e.e2, 4.0);
  EXPECT_EQ(*e.c2, -1.0);
  const auto none = shadow_estimation_error(std::nullopt, std::nullopt, x, truth);
  EXPECT_FALSE(none.e2 || none.e3 || none.c2 || none.c3);
  const auto zero = shadow_estimation_error(ParamVec::Zeros(2), x, x, truth);
  EXPECT_TRUE(zero.e3.has_value());
  EXPECT_FALSE(zero.c3.has_value());
  EXPECT_FALSE(zero.c2.has_value());
}

TEST(ShadowRoundTest, DoesNotPerturbTheRun) {
  const Dataset data = generate_synthetic(400, 4, 3, 2);
  std::vector<Objective> objs;
  for (auto& s : partition(data, {0.5, 4, 2, 2})) {
    objs.push_back(
        Objective::Logistic(std::make_shared<const Dataset>(std::move(s.data))));
  }
  MethodSpec spec;
  spec.method = Method::kCcFedAvg;
  Hyper h;
  h.local_steps = 3;
  const ParamVec x0 = ParamVec::Zeros(objs[0].dim());
  Federation plain(objs, assign_budgets(4, 4), spec, h, x0, 20, 3);
  Federation probed(objs, assign_budgets(4, 4), spec, h, x0, 20, 3);
  int shadows = 0;
  for (int t = 0; t < 20; ++t) {
    const ParamVec x_t = probed.state().x;
    const auto r = probed.step();
    const auto errs = shadow_round(probed, x_t, r);
    EXPECT_EQ(errs.size(), r.estimated.size());
    shadows += static_cast<int>(errs.size());
    EXPECT_EQ(shadow_round(probed, x_t, r, 3).size(),
              static_cast<std::size_t>(std::count(r.estimated.begin(),
                                                  r.estimated.end(), 3)));
    EXPECT_EQ(plain.step().next_model, r.next_model);
  }
  EXPECT_GT(shadows, 0);
}

TEST(GlobalGradientTest, ClosedForms) {
  const auto f1 = DiagQuad({1.0, 2.0}, {1.0, 0.0});
  const auto f2 = DiagQuad({3.0, 1.0}, {0.0, 2.0});
  const std::vector<Objective> one = {f1};
  const ParamVec x({0.5, 0.5});
  EXPECT_EQ(track_global_gradient(one, x), norm_sq(f1.full_gradient(x)));
  // grad f1 = [-0.5, 1], grad f2 = [1.5, -1.5]; mean [0.5, -0.25].
  const std::vector<Objective> two = {f1, f2};
  EXPECT_NEAR(track_global_gradient(two, x), 0.25 + 0.0625, 1e-12);
  const auto family = make_quadratic_clients(5, 6, 1.0, 2.0, 0.0, 4);
  EXPECT_LE(track_global_gradient(family, quadratic_global_minimizer(family)),
            1e-10);
}

Federation QuadFed(double sigma, int k, int n, std::uint64_t seed) {
  Hyper h;
  h.local_steps = k;
  h.eta = 0.1;
  auto objs = make_quadratic_clients(n, 5, 1.0, 1.0, sigma, seed);
  MethodSpec spec;
  spec.method = Method::kCcFedAvg;
  RngStream init(seed);
  const ParamVec x0 = objs[0].initial_params(init);
  return Federation(std::move(objs), assign_budgets(n, std::min(n, 4)), spec, h,
                    x0, 100, seed);
}

TEST(Lemma2Test, NoiseFreeIsExact) {
  Federation fed = QuadFed(0.0, 5, 8, 1);
  for (int t = 0; t < 3; ++t) fed.step();
  const auto r = lemma2_probe(fed, 100);
  GlobalState s = fed.state();
  auto clients = fed.clients();
  const auto out = run_round(s, fed.spec(), clients, fed.objectives(),
                             fed.hyper(), {fed.seed(), 0});
  EXPECT_EQ(r.lhs, r.rhs);
  EXPECT_EQ(r.lhs, norm_sq(out.delta));
  EXPECT_EQ(r.noise_term, 0.0);
}

TEST(Lemma2Test, SingleStepSingleClientVariance) {
  const double sigma = 0.2;
  Federation fed = QuadFed(sigma, 1, 1, 2);
  const auto r = lemma2_probe(fed, 4000);
  // Delta = -eta (grad + xi): excess second moment eta^2 d sigma^2.
  const double expect = 0.1 * 0.1 * 5 * sigma * sigma;
  EXPECT_DOUBLE_EQ(r.noise_term, expect);
  EXPECT_NEAR(r.lhs - r.mean_delta_norm_sq, expect, 4 * r.lhs_stderr);
  EXPECT_THROW(lemma2_probe(fed, 99), InvalidArgument);
}

TEST(Lemma2Test, BoundHolds) {
  Federation fed = QuadFed(0.2, 5, 8, 3);
  for (int t = 0; t < 10; ++t) fed.step();
  const auto r = lemma2_probe(fed, 500);
  EXPECT_LE(r.lhs, r.rhs + 3 * r.lhs_stderr);
}

TEST(MetricsTest, RoundTrip) {
  std::vector<MetricRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].round = i;
    rows[i].method = "cc_fedavg_combined:100";
    rows[i].seed = 7;
    rows[i].test_loss = 0.1 / (i + 3);
    rows[i].grad_norm_sq = std::exp(-i * 1.3);
    rows[i].min_grad_norm_sq = rows[i].grad_norm_sq;
    rows[i].trained_count = 5;
    rows[i].estimated_count = 3;
  }
  rows[1].test_acc = 2.0 / 3;
  rows[2].est_err_s3 = 1e-300;
  rows[2].cos_s2 = -0.1;
  const std::string path = TempPath("rt.csv");
  write_metrics(rows, path);
  EXPECT_EQ(read_metrics(path), rows);
  EXPECT_FALSE(fs::exists(path + ".tmp"));
}

TEST(MetricsTest, EmptyIsHeaderOnly) {
  const std::string path = TempPath("empty.csv");
  write_metrics({}, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kMetricsHeader) + "\n");
  EXPECT_TRUE(read_metrics(path).empty());
}

TEST(MetricsTest, Errors) {
  EXPECT_THROW(write_metrics({}, "/nonexistent/dir/x.csv"), IoError);
  EXPECT_THROW(read_metrics("/nonexistent/x.csv"), IoError);
  const std::string path = TempPath("bad.csv");
  std::ofstream(path) << "nope\n";
  EXPECT_THROW(read_metrics(path), IoError);
}

TEST(MetricsTest, MeanPresent) {
  const std::vector<std::optional<double>> v = {1.0, std::nullopt, 3.0};
  EXPECT_EQ(*mean_present(v), 2.0);
  const std::vector<std::optional<double>> none = {std::nullopt};
  EXPECT_FALSE(mean_present(none).has_value());
}

}  // namespace
}  // namespace ccfl
