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

#ifndef CCFL_DIAGNOSTICS_H_
#define CCFL_DIAGNOSTICS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccfl/objective.h"
#include "ccfl/param_vec.h"
#include "ccfl/protocol.h"

namespace ccfl {

// Estimation error of the two replay estimators against the update a
// skipping client would really have produced.
//   e3 = |(x_t + true) - (x_t + last_delta)|^2,  c3 = cos(true, last_delta)
//   e2 = |(x_t + true) - last_model|^2,          c2 = cos(true, last_model - x_t)
// Fields are absent when the stored state is missing or a cosine has a
// zero-norm argument.
struct ShadowError {
  std::optional<double> e2;
  std::optional<double> e3;
  std::optional<double> c2;
  std::optional<double> c3;
};

ShadowError shadow_estimation_error(
    const std::optional<ParamVec>& last_delta,
    const std::optional<ParamVec>& last_local_model, const ParamVec& x_t,
    const ParamVec& true_delta);

// Shadow-trains every client in `outcome.estimated` from x_t with the exact
// minibatch stream it would have used, and returns one ShadowError per
// client. Reads `federation` only. `probe_client` restricts to one id.
std::vector<ShadowError> shadow_round(const Federation& federation,
                                      const ParamVec& x_t,
                                      const RoundOutcome& outcome,
                                      std::optional<int> probe_client = {});

// |(1/N) sum_i grad f_i(x)|^2 with exact full gradients.
double track_global_gradient(std::span<const Objective> objectives,
                             const ParamVec& x);

struct Lemma2Result {
  double lhs;               // mean |delta_t|^2 over resamples
  double rhs;               // |mean delta_t|^2 + K eta^2 sigma_L^2 / N
  double lhs_stderr;        // standard error of lhs
  double mean_delta_norm_sq;
  double noise_term;        // K eta^2 sigma_L^2 / N
  int n_resamples;
};

// Second-moment probe of the global update at the federation's current
// (frozen) state: replays the next round n_resamples times with fresh
// gradient noise and identical selection / schedule draws. sigma_L^2 is the
// objectives' injected noise variance. Requires n_resamples >= 100.
Lemma2Result lemma2_probe(const Federation& federation, int n_resamples,
                          std::uint64_t probe_seed = 1);

// One line of the per-round metrics file. The row for round t describes
// x_{t+1}; min_grad_norm_sq also covers the initial model.
struct MetricRow {
  int round = 0;
  std::string method;
  std::uint64_t seed = 0;
  double test_loss = 0.0;
  std::optional<double> test_acc;
  double grad_norm_sq = 0.0;
  double min_grad_norm_sq = 0.0;
  std::optional<double> est_err_s2;
  std::optional<double> est_err_s3;
  std::optional<double> cos_s2;
  std::optional<double> cos_s3;
  int trained_count = 0;
  int estimated_count = 0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* kMetricsHeader =
    "round,method,seed,test_loss,test_acc,grad_norm_sq,min_grad_norm_sq,"
    "est_err_s2,est_err_s3,cos_s2,cos_s3,trained_count,estimated_count";

// Mean of the present values, absent if none are.
std::optional<double> mean_present(std::span<const std::optional<double>> v);

// CSV with kMetricsHeader; reals printed with 17 significant digits, absent
// values as empty fields. Written to a temp file then renamed into place.
void write_metrics(std::span<const MetricRow> rows, const std::string& path);
std::vector<MetricRow> read_metrics(const std::string& path);

std::string format_real(double v);

// Writes `contents` to `path` via `path.tmp` + rename. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace ccfl

#endif  // CCFL_DIAGNOSTICS_H_
