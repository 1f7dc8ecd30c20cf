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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any gating criterion fails. C12 needs IDX files (set
// CCFL_IDX_DIR) and is reported but never gates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ccfl/config.h"
#include "ccfl/data.h"
#include "ccfl/diagnostics.h"
#include "ccfl/errors.h"
#include "ccfl/experiment.h"
#include "ccfl/objective.h"
#include "ccfl/protocol.h"

namespace ccfl {
namespace {

// Pinned tolerances.
constexpr double kLocalTrainTol = 1e-12;        // C3
constexpr int kEstimationWinsRequired = 4;      // C4, of 5 seeds
constexpr int kEstimationRounds = 50;           // C4
constexpr double kFedAvgGapMax = 0.03;          // C5
constexpr double kBoundSlackSe = 3.0;           // C6
constexpr int kBoundResamples = 500;            // C6
constexpr double kSlopeLo = -1.3, kSlopeHi = -0.7;  // C7
constexpr double kNovaGapSmallK = 0.03;         // C8, K = 4
constexpr double kNovaGapLargeK = 0.02;         // C8, K = 40
constexpr double kSyncRelTol = 1e-12;           // C9, product form
constexpr double kEfficiencySlack = 0.02;       // C10
constexpr double kBinomialSigmas = 3.0;         // C11
constexpr double kIdxGap = 0.03;             // C12

struct Verdict {
  bool pass;
  std::string detail;
};

std::string Fmt(const char* fmt, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, a, b, c, d);
  return buf;
}

std::vector<ParamVec> Trajectory(const TaskData& task,
                                 const BudgetAssignment& budgets,
                                 const MethodSpec& spec, const Hyper& hyper,
                                 int rounds, std::uint64_t seed) {
  Federation fed(task.objectives, budgets, spec, hyper, task.x0, rounds, seed);
  std::vector<ParamVec> xs;
  for (int t = 0; t < rounds; ++t) xs.push_back(fed.step().next_model);
  return xs;
}

// Synthetic classification that does not saturate at accuracy 1: with the
// default 20-dim, 4-class clusters every method reaches 100% and the
// directional comparisons are vacuous.
ExperimentConfig HardSynthetic() {
  ExperimentConfig c;
  c.input_dim = 5;
  c.n_classes = 10;
  c.diagnostics = false;
  c.track_gradient = false;
  return c;
}

double Mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- C1 ----------------------------------------------------------------
Verdict C1() {
  int checked = 0;
  for (TaskKind task : {TaskKind::kQuadratic, TaskKind::kSyntheticLogistic,
                        TaskKind::kSyntheticMlp}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      ExperimentConfig c;
      c.task = task;
      const TaskData data = build_task(c, seed);
      const auto budgets = assign_budgets(c.n_clients, 1);
      for (const char* sched : {"ad_hoc", "round_robin"}) {
        c.schedule = sched;
        const auto a = Trajectory(data, budgets, build_method(c, "cc_fedavg"),
                                  build_hyper(c), 50, seed);
        const auto b = Trajectory(data, budgets, build_method(c, "fedavg_full"),
                                  build_hyper(c), 50, seed);
        if (a != b) {
          return {false, to_string(task) + " seed " + std::to_string(seed) +
                             " " + sched + " differs"};
        }
        ++checked;
      }
    }
  }
  return {true, std::to_string(checked) +
                    " (task, seed, schedule) runs of 50 rounds bit-identical"};
}

// --- C2 ----------------------------------------------------------------
Verdict C2() {
  int checked = 0;
  for (const char* method : {"cc_fedavg", "cc_fedavg_combined:25"}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      ExperimentConfig c;
      const TaskData data = build_task(c, seed);
      const auto budgets = build_budgets(c);
      std::vector<std::vector<ParamVec>> runs;
      for (const char* v : {"client_backup", "server_backup", "mixed"}) {
        c.variant = v;
        c.backup_set = {0, 2, 5, 7};
        runs.push_back(Trajectory(data, budgets, build_method(c, method),
                                  build_hyper(c), 50, seed));
      }
      if (runs[0] != runs[1] || runs[0] != runs[2]) {
        return {false, std::string(method) + " seed " + std::to_string(seed)};
      }
      ++checked;
    }
  }
  return {true, "3 variants bit-identical over 50 rounds, " +
                    std::to_string(checked) + " (method, seed) pairs"};
}

// --- C3 ----------------------------------------------------------------
Verdict C3() {
  const std::size_t d = 3;
  const auto objs = make_quadratic_clients(1, d, 1.0, 1.5, 0.0, 17);
  const auto a = objs[0].quadratic_a();
  const auto b = objs[0].quadratic_b();
  const double eta = 0.3;
  const std::vector<double> x0 = {0.4, -1.1, 0.7};
  double worst = 0.0;
  for (int k : {1, 3, 10}) {
    std::vector<double> x = x0;
    for (int s = 0; s < k; ++s) {
      std::vector<double> g(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) g[i] += a[i * d + j] * (x[j] - b[j]);
      }
      for (std::size_t i = 0; i < d; ++i) x[i] -= eta * g[i];
    }
    RngStream rng(1);
    const auto r = local_train(ParamVec(x0), objs[0], k, eta, 1, rng);
    for (std::size_t i = 0; i < d; ++i) {
      worst = std::max(worst, std::abs(r.delta[i] - (x[i] - x0[i])));
    }
  }
  return {worst <= kLocalTrainTol,
          Fmt("max |delta - unrolled| = %.3g over K in {1,3,10} (tol %.0e)",
              worst, kLocalTrainTol)};
}

// --- C4 / C5 -----------------------------------------------------------
struct ClassificationSweep {
  // gamma -> method -> per-seed final accuracy
  std::map<double, std::map<std::string, std::vector<double>>> acc;
  std::vector<std::pair<double, double>> early_e3_e2;  // gamma 0.5, per seed
};

ClassificationSweep RunClassificationSweep() {
  ClassificationSweep out;
  const std::vector<std::string> methods = {"fedavg_full", "cc_fedavg",
                                            "strategy1", "strategy2"};
  for (double gamma : {0.0, 0.5}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig c = HardSynthetic();
      c.gamma = gamma;
      const TaskData task = build_task(c, seed);
      const auto budgets = build_budgets(c);
      for (const auto& m : methods) {
        ExperimentConfig mc = c;
        mc.diagnostics = (m == "cc_fedavg" && gamma == 0.5);
        const MethodRun run = run_method(task, budgets, build_method(mc, m), mc,
                                         seed, mc.rounds);
        out.acc[gamma][m].push_back(*run.final_test_acc());
        if (mc.diagnostics) {
          std::vector<std::optional<double>> e2, e3;
          for (int t = 0; t < kEstimationRounds; ++t) {
            e2.push_back(run.rows[t].est_err_s2);
            e3.push_back(run.rows[t].est_err_s3);
          }
          out.early_e3_e2.emplace_back(mean_present(e3).value_or(NAN),
                                       mean_present(e2).value_or(NAN));
        }
      }
    }
  }
  return out;
}

Verdict C4(const ClassificationSweep& s) {
  int wins = 0;
  std::string detail = "mean e3/e2 over first 50 rounds:";
  for (const auto& [e3, e2] : s.early_e3_e2) {
    wins += e3 < e2;
    detail += Fmt(" %.4g/%.4g", e3, e2);
  }
  detail += "; wins " + std::to_string(wins) + "/5";
  return {wins >= kEstimationWinsRequired, detail};
}

Verdict C5(const ClassificationSweep& s) {
  bool ok = true;
  std::string detail;
  for (const auto& [gamma, by_method] : s.acc) {
    const double fa = Mean(by_method.at("fedavg_full"));
    const double cc = Mean(by_method.at("cc_fedavg"));
    const double s1 = Mean(by_method.at("strategy1"));
    const double s2 = Mean(by_method.at("strategy2"));
    ok = ok && cc >= s2 && cc >= s1 && fa - cc <= kFedAvgGapMax;
    detail += Fmt("gamma=%.1f fedavg %.4f cc %.4f s1 %.4f", gamma, fa, cc, s1) +
              Fmt(" s2 %.4f; ", s2);
  }
  return {ok, detail};
}

// --- C6 ----------------------------------------------------------------
Verdict C6() {
  bool ok = true;
  std::string detail;
  for (double sigma_l : {0.05, 0.2}) {
    for (int k : {1, 5}) {
      ExperimentConfig c;
      c.task = TaskKind::kQuadratic;
      c.local_steps = k;
      // Per-coordinate noise so that E|xi|^2 = sigma_L^2.
      c.noise_sigma = sigma_l / std::sqrt(static_cast<double>(c.quad_dim));
      c.methods = {"cc_fedavg"};
      const Lemma2Result r = run_lemma2_probe(c, 10, kBoundResamples);
      const bool pass = r.lhs <= r.rhs + kBoundSlackSe * r.lhs_stderr;
      ok = ok && pass;
      detail += Fmt("(sL=%.2f K=%.0f lhs %.4g rhs %.4g) ", sigma_l, k, r.lhs,
                    r.rhs);
    }
  }
  return {ok, detail};
}

// --- C7 ----------------------------------------------------------------
Verdict C7() {
  const std::vector<int> Ts = {100, 400, 1600};
  std::vector<double> lx, ly;
  std::string detail;
  bool monotone = true;
  double prev = INFINITY;
  for (int T : Ts) {
    ExperimentConfig c;
    c.task = TaskKind::kQuadratic;
    c.noise_sigma = 0.01;
    c.rounds = T;
    c.diagnostics = false;
    c.eta = std::sqrt(static_cast<double>(c.n_clients) /
                      (static_cast<double>(T) * c.local_steps));
    const TaskData task = build_task(c, c.seed);
    const MethodRun run = run_method(task, build_budgets(c),
                                     build_method(c, "cc_fedavg"), c, c.seed, T);
    if (run.abort_message) return {false, *run.abort_message};
    const double m = run.rows.back().min_grad_norm_sq;
    monotone = monotone && m < prev;
    prev = m;
    lx.push_back(std::log(static_cast<double>(c.n_clients) * c.local_steps * T));
    ly.push_back(std::log(m));
    detail += Fmt("T=%.0f min|grad|^2 %.4g; ", T, m);
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  detail += Fmt("slope %.3f", slope);
  return {monotone && slope >= kSlopeLo && slope <= kSlopeHi, detail};
}

// --- C8 ----------------------------------------------------------------
Verdict C8() {
  std::map<int, double> gap;
  std::string detail;
  for (int k : {4, 40}) {
    std::vector<double> cc, nova;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig c = HardSynthetic();
      c.task = TaskKind::kSyntheticMlp;
      c.local_steps = k;
      c.eta = 0.01;
      const TaskData task = build_task(c, seed);
      const auto budgets = build_budgets(c);
      cc.push_back(*run_method(task, budgets, build_method(c, "cc_fedavg"), c,
                               seed, c.rounds)
                        .final_test_acc());
      nova.push_back(*run_method(task, budgets, build_method(c, "fednova"), c,
                                 seed, c.rounds)
                          .final_test_acc());
    }
    gap[k] = Mean(cc) - Mean(nova);
    detail += Fmt("K=%.0f cc %.4f fednova %.4f gap %.4f; ", k, Mean(cc),
                  Mean(nova), gap[k]);
  }
  return {gap[4] >= kNovaGapSmallK && gap[40] <= kNovaGapLargeK, detail};
}

// --- C9 ----------------------------------------------------------------
Verdict C9() {
  ExperimentConfig c;
  const TaskData task = build_task(c, 1);
  double worst_rel = 0.0;
  for (int W : {2, 4, 8}) {
    MethodSpec spec = build_method(c, "fedopt_sync:" + std::to_string(W));
    Federation fed(task.objectives, build_budgets(c), spec, build_hyper(c),
                   task.x0, 4 * W, 1);
    for (int block = 0; block < 4; ++block) {
      const ParamVec x_t = fed.state().x;
      const RoundOutcome first = fed.step();
      ParamVec replayed = first.next_model;  // x_t + delta
      for (int k = 1; k < W - 1; ++k) {
        fed.step();
        replayed = add(replayed, first.delta);
      }
      // State at the start of round t + W - 1.
      if (fed.state().x != replayed) {
        return {false, "W=" + std::to_string(W) + " sequential replay differs"};
      }
      const ParamVec product = add(x_t, scale(first.delta, W - 1.0));
      worst_rel = std::max(worst_rel, std::sqrt(l2_dist_sq(product, replayed) /
                                                norm_sq(replayed)));
      fed.step();
    }
  }
  // Dyadic setup where the product form is exact too.
  std::vector<double> eye = {1, 0, 0, 1};
  const std::vector<Objective> dyadic = {
      Objective::Quadratic(eye, {1.0, -2.0}, 0.0),
      Objective::Quadratic(eye, {3.0, 0.0}, 0.0)};
  bool dyadic_exact = true;
  for (int W : {2, 4, 8}) {
    MethodSpec spec = parse_method("fedopt_sync:" + std::to_string(W));
    Federation fed(dyadic, assign_budgets(2, 1), spec, Hyper{1, 0.5, 1, 1.0},
                   ParamVec({0.0, 0.0}), W, 1);
    const RoundOutcome first = fed.step();
    for (int k = 1; k < W - 1; ++k) fed.step();
    dyadic_exact = dyadic_exact &&
                   fed.state().x == add(ParamVec({0.0, 0.0}),
                                        scale(first.delta, W - 1.0));
  }
  return {dyadic_exact && worst_rel <= kSyncRelTol,
          Fmt("bitwise vs sequential replay; product form rel err %.3g; "
              "dyadic exact=%.0f",
              worst_rel, dyadic_exact)};
}

// --- C10 ---------------------------------------------------------------
Verdict C10() {
  bool ok = true;
  std::string detail;
  for (int W : {2, 4, 16}) {
    std::vector<double> cc, fa;
    bool steps_equal = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ExperimentConfig c = HardSynthetic();
      c.schedule = "round_robin";
      c.rounds = 320;
      c.eta = 0.2;
      c.seed = seed;
      const auto r = run_efficiency_comparison(c, W, false);
      cc.push_back(*r.cc_fedavg.final_test_acc);
      fa.push_back(*r.fedavg.final_test_acc);
      steps_equal = steps_equal && r.cc_fedavg.local_steps == r.fedavg.local_steps;
    }
    const bool pass = W == 16 ? Mean(cc) < Mean(fa)
                              : Mean(cc) >= Mean(fa) - kEfficiencySlack;
    ok = ok && pass && steps_equal;
    detail += Fmt("W=%.0f cc %.4f fedavg(T/W) %.4f steps_equal=%.0f; ", W,
                  Mean(cc), Mean(fa), steps_equal);
  }
  return {ok, detail};
}

// --- C11 ---------------------------------------------------------------
Verdict C11() {
  ExperimentConfig c;
  c.diagnostics = false;
  c.track_gradient = false;
  c.rounds = 2000;
  const TaskData task = build_task(c, c.seed);
  const auto budgets = build_budgets(c);
  std::vector<int> counts(c.n_clients, 0);
  run_method(task, budgets, build_method(c, "strategy1"), c, c.seed, c.rounds,
             [&](const Federation&, const RoundOutcome& out) {
               for (const auto& [id, d] : out.contributions) ++counts[id];
             });
  bool ok = true;
  std::string detail = "s1 freq vs p:";
  for (int i = 0; i < c.n_clients; ++i) {
    const double p = budgets.p[i];
    const double sd = std::sqrt(c.rounds * p * (1 - p));
    ok = ok && std::abs(counts[i] - c.rounds * p) <= kBinomialSigmas * sd;
    detail += Fmt(" %.4f/%.3f", counts[i] / 2000.0, p);
  }
  long violations = 0;
  for (double ratio : {1.0, 0.5}) {
    ExperimentConfig cc = c;
    cc.ratio = ratio;
    run_method(task, budgets, build_method(cc, "cc_fedavg"), cc, cc.seed,
               cc.rounds, [&](const Federation&, const RoundOutcome& out) {
                 std::vector<int> ids;
                 for (const auto& [id, d] : out.contributions) ids.push_back(id);
                 violations += ids != out.selected;
               });
  }
  detail += "; cc rounds missing a selected client: " + std::to_string(violations);
  return {ok && violations == 0, detail};
}

// --- C12 (optional) ----------------------------------------------------
std::optional<Verdict> C12() {
  const char* dir = std::getenv("CCFL_IDX_DIR");
  if (!dir) return std::nullopt;
  namespace fs = std::filesystem;
  const fs::path p(dir);
  ExperimentConfig c;
  c.task = TaskKind::kIdxMlp;
  c.idx_train_images = (p / "train-images-idx3-ubyte").string();
  c.idx_train_labels = (p / "train-labels-idx1-ubyte").string();
  c.idx_test_images = (p / "t10k-images-idx3-ubyte").string();
  c.idx_test_labels = (p / "t10k-labels-idx1-ubyte").string();
  if (!fs::exists(c.idx_train_images)) return std::nullopt;
  c.n_clients = 100;
  c.classes_per_client = 2;
  c.gamma = 0.0;
  c.ratio = 0.2;
  c.rounds = 400;
  c.hidden_dim = 64;
  c.diagnostics = false;
  c.track_gradient = false;
  const TaskData task = build_task(c, c.seed);
  const auto budgets = build_budgets(c);
  std::map<std::string, double> acc;
  for (const char* m : {"fedavg_full", "cc_fedavg", "strategy1", "strategy2"}) {
    acc[m] = *run_method(task, budgets, build_method(c, m), c, c.seed, c.rounds)
                  .final_test_acc();
  }
  const double cc = acc["cc_fedavg"];
  return Verdict{acc["fedavg_full"] - cc <= kIdxGap &&
                     cc > acc["strategy1"] && cc > acc["strategy2"],
                 Fmt("fedavg %.4f cc %.4f s1 %.4f s2 %.4f", acc["fedavg_full"],
                     cc, acc["strategy1"], acc["strategy2"])};
}

}  // namespace
}  // namespace ccfl

int main() {
  using namespace ccfl;
  int failures = 0;
  auto report = [&](const char* id, const char* name,
                    const std::function<Verdict()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    std::printf("%s %s %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", id, name,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.pass;
  };

  report("C1", "all-full-budget CC-FedAvg equals FedAvg", C1);
  report("C2", "backup variants agree", C2);
  report("C3", "local training matches unrolled steps", C3);
  std::optional<ClassificationSweep> sweep;
  auto get_sweep = [&]() -> const ClassificationSweep& {
    if (!sweep) sweep = RunClassificationSweep();
    return *sweep;
  };
  report("C4", "update replay beats model replay early",
         [&] { return C4(get_sweep()); });
  report("C5", "method ordering", [&] { return C5(get_sweep()); });
  report("C6", "second-moment bound", C6);
  report("C7", "convergence-rate trend", C7);
  report("C8", "FedNova step sensitivity", C8);
  report("C9", "synchronized skipping algebra", C9);
  report("C10", "efficiency parity", C10);
  report("C11", "Strategy 1 participation bias", C11);

  try {
    const auto v = C12();
    if (!v) {
      std::printf("SKIP C12 large-scale IDX run: set CCFL_IDX_DIR to a "
                  "directory with the four IDX files\n");
    } else {
      std::printf("%s C12 large-scale IDX run (non-gating): %s\n",
                  v->pass ? "PASS" : "FAIL", v->detail.c_str());
    }
  } catch (const std::exception& e) {
    std::printf("FAIL C12 large-scale IDX run (non-gating): %s\n", e.what());
  }
  std::printf("%d gating criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
