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

#include "ccfl/experiment.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include "ccfl/errors.h"

namespace ccfl {
namespace {

std::shared_ptr<const Dataset> share(Dataset d) {
  return std::make_shared<const Dataset>(std::move(d));
}

Objective make_classifier(TaskKind task, std::shared_ptr<const Dataset> data,
                          int hidden_dim) {
  if (task == TaskKind::kSyntheticLogistic) {
    return Objective::Logistic(std::move(data));
  }
  return Objective::Mlp(std::move(data), static_cast<std::size_t>(hidden_dim));
}

Evaluation evaluate_global(const TaskData& task, const ParamVec& x) {
  if (task.test_objective) return task.test_objective->evaluate(x);
  double loss = 0.0;
  for (const Objective& o : task.objectives) loss += o.evaluate(x).loss;
  return {loss / static_cast<double>(task.objectives.size()), std::nullopt};
}

std::pair<std::string, std::string> split_ext(const std::string& path) {
  const std::filesystem::path p(path);
  const std::string ext = p.extension().string();
  return {path.substr(0, path.size() - ext.size()), ext};
}

EfficiencyArm to_arm(const MethodRun& run, int rounds) {
  return {run.method, rounds, run.local_steps, run.final_test_loss(),
          run.final_test_acc()};
}

void check_run(const MethodRun& run) {
  if (run.abort_message) {
    throw Error(ErrorCategory::kDivergence, *run.abort_message);
  }
}

}  // namespace

double MethodRun::final_test_loss() const {
  return rows.empty() ? std::nan("") : rows.back().test_loss;
}

std::optional<double> MethodRun::final_test_acc() const {
  if (rows.empty()) return std::nullopt;
  return rows.back().test_acc;
}

TaskData build_task(const ExperimentConfig& c, std::uint64_t seed) {
  RngStream init = RngStream::For(seed, StreamPurpose::kInit);
  if (c.task == TaskKind::kQuadratic) {
    auto objectives =
        make_quadratic_clients(c.n_clients, static_cast<std::size_t>(c.quad_dim),
                               c.sigma_g, c.l_max, c.noise_sigma, seed);
    ParamVec x0 = objectives.front().initial_params(init);
    return {std::move(objectives), std::nullopt, std::move(x0)};
  }

  Dataset train;
  Dataset test;
  if (c.task == TaskKind::kIdxMlp) {
    Dataset full = load_idx(c.idx_train_images, c.idx_train_labels);
    if (!c.idx_test_images.empty() && !c.idx_test_labels.empty()) {
      train = std::move(full);
      test = load_idx(c.idx_test_images, c.idx_test_labels);
      test.n_classes = train.n_classes = std::max(train.n_classes, test.n_classes);
    } else {
      auto split = stratified_split(full, 0.8, seed);
      train = std::move(split.train);
      test = std::move(split.test);
    }
  } else {
    Dataset full = generate_synthetic(static_cast<std::size_t>(c.n_samples),
                                      static_cast<std::size_t>(c.input_dim),
                                      c.n_classes, seed);
    auto split = stratified_split(full, 0.8, seed);
    train = std::move(split.train);
    test = std::move(split.test);
  }

  const PartitionPlan plan{c.gamma, c.n_clients, c.classes_per_client, seed};
  auto shards = partition(train, plan);
  std::vector<Objective> objectives;
  objectives.reserve(shards.size());
  for (auto& s : shards) {
    objectives.push_back(
        make_classifier(c.task, share(std::move(s.data)), c.hidden_dim));
  }
  Objective test_obj = make_classifier(c.task, share(std::move(test)),
                                       c.hidden_dim);
  ParamVec x0 = test_obj.initial_params(init);
  return {std::move(objectives), std::move(test_obj), std::move(x0)};
}

BudgetAssignment build_budgets(const ExperimentConfig& c) {
  if (c.r_override && c.W_override) {
    return two_group_budgets(c.n_clients, *c.r_override, *c.W_override);
  }
  if (c.p_list) return explicit_budgets(*c.p_list);
  return assign_budgets(c.n_clients, c.beta.value_or(1));
}

MethodSpec build_method(const ExperimentConfig& c, const std::string& label) {
  MethodSpec spec = parse_method(label, c.tau, c.W_override.value_or(1));
  spec.schedule = parse_schedule(c.schedule);
  spec.variant = parse_variant(c.variant);
  spec.backup_set.insert(c.backup_set.begin(), c.backup_set.end());
  return spec;
}

Hyper build_hyper(const ExperimentConfig& c) {
  return Hyper{c.local_steps, c.eta, static_cast<std::size_t>(c.batch_size),
               c.ratio};
}

MethodRun run_method(const TaskData& task, const BudgetAssignment& budgets,
                     const MethodSpec& spec, const ExperimentConfig& c,
                     std::uint64_t seed, int rounds,
                     const RoundObserver& observer) {
  MethodRun run;
  run.method = spec.label();
  run.seed = seed;
  Federation fed(task.objectives, budgets, spec, build_hyper(c), task.x0,
                 rounds, seed, c.workers);

  double min_grad = std::numeric_limits<double>::infinity();
  if (c.track_gradient) {
    min_grad = track_global_gradient(task.objectives, task.x0);
  }
  for (int t = 0; t < rounds; ++t) {
    const ParamVec x_t = fed.state().x;
    std::optional<RoundOutcome> stepped;
    try {
      stepped = fed.step();
    } catch (const DivergenceError& e) {
      run.abort_message = e.what();
      break;
    }
    const RoundOutcome& out = *stepped;
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';

    MetricRow row;
    row.round = t;
    row.method = run.method;
    row.seed = seed;
    const Evaluation ev = evaluate_global(task, out.next_model);
    row.test_loss = ev.loss;
    row.test_acc = ev.accuracy;
    if (c.track_gradient) {
      row.grad_norm_sq = track_global_gradient(task.objectives, out.next_model);
      min_grad = std::min(min_grad, row.grad_norm_sq);
      row.min_grad_norm_sq = min_grad;
    }
    if (c.diagnostics && !out.estimated.empty()) {
      const auto shadows = shadow_round(fed, x_t, out, c.probe_client);
      std::vector<std::optional<double>> e2, e3, c2, c3;
      for (const auto& s : shadows) {
        e2.push_back(s.e2);
        e3.push_back(s.e3);
        c2.push_back(s.c2);
        c3.push_back(s.c3);
      }
      row.est_err_s2 = mean_present(e2);
      row.est_err_s3 = mean_present(e3);
      row.cos_s2 = mean_present(c2);
      row.cos_s3 = mean_present(c3);
    }
    row.trained_count = static_cast<int>(out.trained.size());
    row.estimated_count = static_cast<int>(out.estimated.size());
    run.rows.push_back(std::move(row));
    if (observer) observer(fed, out);
  }
  run.local_steps = fed.local_steps();
  run.final_model = fed.state().x;
  return run;
}

ExperimentResult run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  ExperimentResult result;
  const BudgetAssignment budgets = build_budgets(c);
  const auto [stem, ext] = split_ext(c.out);
  std::ostringstream aborts;
  aborts << "method,seed,message\n";

  for (int k = 0; k < c.seeds; ++k) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(k);
    const TaskData task = build_task(c, seed);
    std::vector<MetricRow> rows;
    for (const auto& label : c.methods) {
      const MethodSpec spec = build_method(c, label);
      MethodRun run = run_method(task, budgets, spec, c, seed, c.rounds);
      rows.insert(rows.end(), run.rows.begin(), run.rows.end());
      if (run.abort_message) {
        result.any_aborted = true;
        aborts << run.method << ',' << seed << ",\"" << *run.abort_message
               << "\"\n";
      }
      result.runs.push_back(std::move(run));
    }
    const std::string path =
        c.seeds == 1 ? c.out : stem + ".seed" + std::to_string(seed) + ext;
    write_metrics(rows, path);
    result.files.push_back(path);
  }

  if (c.seeds > 1) {
    std::ostringstream os;
    os << "method,n_seeds,mean_final_test_acc,std_final_test_acc,"
          "mean_final_test_loss,std_final_test_loss\n";
    for (const auto& label : c.methods) {
      const std::string name = build_method(c, label).label();
      std::vector<double> acc, loss;
      for (const auto& run : result.runs) {
        if (run.method != name || run.abort_message) continue;
        loss.push_back(run.final_test_loss());
        if (run.final_test_acc()) acc.push_back(*run.final_test_acc());
      }
      auto stats = [](const std::vector<double>& v) -> std::string {
        if (v.empty()) return ",";
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
        return format_real(m) + "," + format_real(s);
      };
      os << name << ',' << loss.size() << ',' << stats(acc) << ','
         << stats(loss) << '\n';
    }
    const std::string path = stem + ".summary.csv";
    write_file_atomic(path, os.str());
    result.files.push_back(path);
  }
  if (result.any_aborted) {
    const std::string path = stem + ".aborts.csv";
    write_file_atomic(path, aborts.str());
    result.files.push_back(path);
  }
  return result;
}

std::vector<GridCell> run_grid_rw(const ExperimentConfig& c,
                                  const std::vector<double>& r_values,
                                  const std::vector<int>& W_values,
                                  bool write) {
  validate_config(c);
  for (double r : r_values) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r", "must be in [0, 1]");
  }
  for (int w : W_values) {
    if (w < 1) throw ConfigError("W", "must be >= 1");
  }
  const TaskData task = build_task(c, c.seed);
  ExperimentConfig quiet = c;
  quiet.diagnostics = false;
  std::vector<GridCell> cells;
  for (const auto& label : c.methods) {
    const MethodSpec spec = build_method(c, label);
    for (double r : r_values) {
      for (int w : W_values) {
        const BudgetAssignment budgets = two_group_budgets(c.n_clients, r, w);
        const MethodRun run =
            run_method(task, budgets, spec, quiet, c.seed, c.rounds);
        check_run(run);
        cells.push_back({r, w, run.method, run.final_test_loss(),
                         run.final_test_acc(),
                         run.rows.empty() ? 0.0
                                          : run.rows.back().min_grad_norm_sq});
      }
    }
  }
  if (write) {
    std::ostringstream os;
    os << "r,W,method,seed,final_test_loss,final_test_acc,min_grad_norm_sq\n";
    for (const auto& cell : cells) {
      os << format_real(cell.r) << ',' << cell.W << ',' << cell.method << ','
         << c.seed << ',' << format_real(cell.final_test_loss) << ',';
      if (cell.final_test_acc) os << format_real(*cell.final_test_acc);
      os << ',' << format_real(cell.min_grad_norm_sq) << '\n';
    }
    write_file_atomic(c.out, os.str());
  }
  return cells;
}

EfficiencyResult run_efficiency_comparison(const ExperimentConfig& c, int W,
                                           bool write) {
  validate_config(c);
  if (W < 1) throw ConfigError("W", "must be >= 1");
  if (c.rounds % W != 0) {
    throw ConfigError("W", "W must divide rounds (" + std::to_string(c.rounds) +
                               ")");
  }
  const TaskData task = build_task(c, c.seed);
  ExperimentConfig quiet = c;
  quiet.diagnostics = false;

  const MethodSpec cc = build_method(c, "cc_fedavg");
  const MethodRun cc_run = run_method(
      task, two_group_budgets(c.n_clients, 1.0, W), cc, quiet, c.seed, c.rounds);
  check_run(cc_run);
  const MethodSpec full = build_method(c, "fedavg_full");
  const MethodRun fa_run =
      run_method(task, two_group_budgets(c.n_clients, 0.0, 1), full, quiet,
                 c.seed, c.rounds / W);
  check_run(fa_run);

  EfficiencyResult result{to_arm(cc_run, c.rounds),
                          to_arm(fa_run, c.rounds / W)};
  if (write) {
    std::ostringstream os;
    os << "arm,method,W,rounds,local_steps,final_test_loss,final_test_acc\n";
    auto line = [&](const char* arm, const EfficiencyArm& a) {
      os << arm << ',' << a.method << ',' << W << ',' << a.rounds << ','
         << a.local_steps << ',' << format_real(a.final_test_loss) << ',';
      if (a.final_test_acc) os << format_real(*a.final_test_acc);
      os << '\n';
    };
    line("cc_fedavg_r1", result.cc_fedavg);
    line("fedavg_T_over_W", result.fedavg);
    write_file_atomic(c.out, os.str());
  }
  return result;
}

Lemma2Result run_lemma2_probe(const ExperimentConfig& c, int warmup,
                              int n_resamples) {
  validate_config(c);
  if (c.task != TaskKind::kQuadratic) {
    throw ConfigError("task", "the second-moment probe needs task=quadratic");
  }
  if (warmup < 0) throw ConfigError("warmup", "must be >= 0");
  const TaskData task = build_task(c, c.seed);
  const MethodSpec spec = build_method(c, c.methods.front());
  Federation fed(task.objectives, build_budgets(c), spec, build_hyper(c),
                 task.x0, c.rounds, c.seed, c.workers);
  for (int t = 0; t < warmup; ++t) fed.step();
  return lemma2_probe(fed, n_resamples, c.seed + 0x5eed);
}

}  // namespace ccfl
