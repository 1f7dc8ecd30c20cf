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

#ifndef CCFL_EXPERIMENT_H_
#define CCFL_EXPERIMENT_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ccfl/config.h"
#include "ccfl/data.h"
#include "ccfl/diagnostics.h"
#include "ccfl/objective.h"
#include "ccfl/protocol.h"

namespace ccfl {

// Everything a run needs that does not depend on the method: client
// objectives, the held-out evaluation objective and the initial model.
struct TaskData {
  std::vector<Objective> objectives;
  std::optional<Objective> test_objective;  // classification tasks
  ParamVec x0;
};

TaskData build_task(const ExperimentConfig& config, std::uint64_t seed);

// beta law, explicit p_list, or the two-group (r_override, W_override) split.
BudgetAssignment build_budgets(const ExperimentConfig& config);

MethodSpec build_method(const ExperimentConfig& config,
                        const std::string& label);

Hyper build_hyper(const ExperimentConfig& config);

struct MethodRun {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;
  std::optional<std::string> abort_message;
  long local_steps = 0;
  std::optional<ParamVec> final_model;

  double final_test_loss() const;
  std::optional<double> final_test_acc() const;
};

using RoundObserver =
    std::function<void(const Federation&, const RoundOutcome&)>;

// Runs `rounds` rounds of one method, recording a MetricRow per round.
// Divergence stops the run and is reported in abort_message.
MethodRun run_method(const TaskData& task, const BudgetAssignment& budgets,
                     const MethodSpec& spec, const ExperimentConfig& config,
                     std::uint64_t seed, int rounds,
                     const RoundObserver& observer = {});

struct ExperimentResult {
  std::vector<MethodRun> runs;  // seed-major, then config.methods order
  std::vector<std::string> files;
  bool any_aborted = false;
};

// Every method for every seed (seed, seed+1, ...). With one seed the rows go
// to config.out; with several, to <stem>.seed<S><ext> plus a
// <stem>.summary.csv of final-accuracy mean/std. Aborted runs are listed in
// <stem>.aborts.csv.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct GridCell {
  double r;
  int W;
  std::string method;
  double final_test_loss;
  std::optional<double> final_test_acc;
  double min_grad_norm_sq;
};

// Two-group budget sweep: for each (r, W) the last round(r N) clients get
// p = 1/W. Cells are ordered method-major, then r, then W. Writes a CSV to
// config.out unless `write` is false.
std::vector<GridCell> run_grid_rw(const ExperimentConfig& config,
                                  const std::vector<double>& r_values,
                                  const std::vector<int>& W_values,
                                  bool write = true);

struct EfficiencyArm {
  std::string method;
  int rounds;
  long local_steps;
  double final_test_loss;
  std::optional<double> final_test_acc;
};

struct EfficiencyResult {
  EfficiencyArm cc_fedavg;  // every client p = 1/W, T rounds
  EfficiencyArm fedavg;     // FedAvg (full), T/W rounds
};

// Compute-parity comparison. Requires W | T.
EfficiencyResult run_efficiency_comparison(const ExperimentConfig& config,
                                           int W, bool write = true);

// Builds a Federation of config's first method and runs `warmup` rounds,
// then probes the second moment of the next global update.
Lemma2Result run_lemma2_probe(const ExperimentConfig& config, int warmup,
                              int n_resamples);

}  // namespace ccfl

#endif  // CCFL_EXPERIMENT_H_
